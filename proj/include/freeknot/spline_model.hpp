#pragma once

#include <Eigen/Dense>

#include <optional>
#include <vector>

namespace freeknot {

// Observation vector indexed 1..n in math, 0..n-1 in storage.
using Signal = Eigen::VectorXd;

int transition_boundary(int d, int d0);

// Class parameters (d, d0, k, n). Construction validates them.
class ModelParams {
 public:
  ModelParams(int d, int d0, int k, int n);

  int d() const { return d_; }
  int d0() const { return d0_; }
  int k() const { return k_; }
  int n() const { return n_; }
  int k0() const { return transition_boundary(d_, d0_); }

 private:
  int d_;
  int d0_;
  int k_;
  int n_;
};

// Integer knots 0 = n_0 <= n_1 <= ... <= n_k = n. Nonempty pieces hold at
// least d+1 design points; empty pieces (repeated knots) are allowed.
class KnotVector {
 public:
  static KnotVector validate(std::vector<int> knots, int d, int n);

  const std::vector<int>& values() const { return knots_; }
  int operator[](std::size_t i) const { return knots_[i]; }
  int n() const { return knots_.back(); }
  int degree() const { return d_; }
  int pieces() const { return static_cast<int>(knots_.size()) - 1; }
  int nonempty_pieces() const;
  bool piece_empty(int p) const { return knots_[p + 1] == knots_[p]; }
  // Distinct knots strictly inside (0, n).
  std::vector<int> inner_distinct() const;
  // Piece p covering design index i in 1..n, i.e. n_p < i <= n_{p+1}.
  int piece_of(int i) const;

  // Pads with leading zeros to k+1 entries; requires pieces() <= k.
  KnotVector padded(int k) const;

  bool operator==(const KnotVector& o) const { return knots_ == o.knots_ && d_ == o.d_; }

 private:
  KnotVector(std::vector<int> knots, int d) : knots_(std::move(knots)), d_(d) {}
  std::vector<int> knots_;
  int d_;
};

KnotVector validate_knots(const std::vector<int>& knots, int d, int n);

// Local shifted-monomial storage: on (n_p/n, n_{p+1}/n] the polynomial is
// sum_l a^p_l (x - n_p/n)^(l-1). Empty pieces carry a zero-length vector.
class PiecewiseSpline {
 public:
  PiecewiseSpline(KnotVector knots, std::vector<Eigen::VectorXd> coeffs);

  const KnotVector& knots() const { return knots_; }
  const std::vector<Eigen::VectorXd>& coeffs() const { return coeffs_; }
  const Eigen::VectorXd& piece(int p) const { return coeffs_[p]; }
  int degree() const { return knots_.degree(); }
  int n() const { return knots_.n(); }
  PiecewiseSpline scaled(double factor) const;

 private:
  KnotVector knots_;
  std::vector<Eigen::VectorXd> coeffs_;
};

Signal evaluate_spline(const PiecewiseSpline& spline);

// Coefficient of a^{i-1}_q in a^i_p when derivatives up to order p-1 match
// across a knot at distance `gap` from the previous piece start.
double transition_coefficient(int d, int p, int q, double gap);
// Rows p = 1..d0+1, columns q = 1..d+1.
Eigen::MatrixXd transition_matrix(int d, int d0, double gap);

// Re-expands sum_l c_l (x-s)^l as sum_l c'_l (x-s-delta)^l (0-based powers).
Eigen::VectorXd shift_polynomial(const Eigen::VectorXd& c, double delta);

// Columns (i/n)^l for l = 0..d, then ((i - t)/n)_+^l for each distinct inner
// knot t and l = d0+1..d. (u)_+^0 is the indicator of u > 0.
Eigen::MatrixXd basis_matrix(const ModelParams& params, const KnotVector& knots);
Eigen::MatrixXd basis_matrix(int d, int d0, const KnotVector& knots);

// Global truncated-power coefficients in the column order of basis_matrix.
PiecewiseSpline spline_from_global(int d, int d0, const KnotVector& knots,
                                   const Eigen::VectorXd& global);
// Inverse of spline_from_global; throws MembershipError when derivative
// matching up to order d0 fails by more than tol.
Eigen::VectorXd global_from_spline(const PiecewiseSpline& spline, int d0, double tol = 1e-8);

struct MembershipResult {
  bool member = false;
  int min_pieces = 0;  // 0 when not representable with any number of pieces
  std::optional<KnotVector> witness;  // padded to k+1 entries
  std::optional<PiecewiseSpline> spline;
  double max_residual = 0.0;
};

// Decides theta in Theta(d, d0, k) up to max-abs residual tol.
MembershipResult check_membership(const Signal& theta, const ModelParams& params, double tol = 1e-8);

struct L2Pair {
  double discrete = 0.0;    // sum_i theta_i^2
  double integral = 0.0;    // n * int_0^1 f^2
};
L2Pair discrete_vs_integral_l2(const PiecewiseSpline& spline);

double binomial(int n, int k);

}  // namespace freeknot
