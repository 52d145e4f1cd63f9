#pragma once

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <vector>

namespace freeknot::detail {

struct LocalFit {
  Eigen::VectorXd coeffs;  // in powers of (x - start/n), x = i/n
  Eigen::VectorXd fitted;
  double sse = 0.0;
  double max_abs_residual = 0.0;
};

// Least-squares degree-d fit to y_seg observed at x = start/n + i/n, i = 1..len.
// Requires len >= d+1.
LocalFit fit_local_polynomial(const Eigen::Ref<const Eigen::VectorXd>& y_seg, int d, int n);

struct ProjectionFit {
  Eigen::VectorXd global;
  Eigen::VectorXd fitted;
};

// Least squares on the column-equilibrated matrix with a rank-revealing QR at
// relative threshold 1e-10; throws RankDeficiencyError on a rank drop.
ProjectionFit project_onto_columns(const Eigen::VectorXd& y, const Eigen::MatrixXd& b);

// Sequential Givens QR of rows (1, x, ..., x^d | y). sse() is the residual sum
// of squares of the rows added so far; projected() is |Q^T y|^2 restricted to
// the column space.
class GivensAccumulator {
 public:
  explicit GivensAccumulator(int d) : p_(d + 1), r_(p_ * p_, 0.0), z_(p_, 0.0), row_(p_ + 1) {}

  void reset() {
    std::fill(r_.begin(), r_.end(), 0.0);
    std::fill(z_.begin(), z_.end(), 0.0);
    sse_ = 0.0;
  }

  void add(double x, double y) {
    double v = 1.0;
    for (int l = 0; l < p_; ++l) {
      row_[l] = v;
      v *= x;
    }
    double yv = y;
    for (int j = 0; j < p_; ++j) {
      const double rj = row_[j];
      if (rj == 0.0) continue;
      double& rjj = r_[j * p_ + j];
      const double h = std::sqrt(rjj * rjj + rj * rj);
      const double c = rjj / h;
      const double s = rj / h;
      rjj = h;
      for (int l = j + 1; l < p_; ++l) {
        double& rjl = r_[j * p_ + l];
        const double t = c * rjl + s * row_[l];
        row_[l] = -s * rjl + c * row_[l];
        rjl = t;
      }
      const double t = c * z_[j] + s * yv;
      yv = -s * z_[j] + c * yv;
      z_[j] = t;
    }
    sse_ += yv * yv;
  }

  double sse() const { return sse_; }
  double projected() const {
    double s = 0.0;
    for (double v : z_) s += v * v;
    return s;
  }

 private:
  int p_;
  std::vector<double> r_;
  std::vector<double> z_;
  std::vector<double> row_;
  double sse_ = 0.0;
};

}  // namespace freeknot::detail
