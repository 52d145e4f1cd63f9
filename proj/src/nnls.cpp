#include "freeknot/nnls.hpp"

#include <algorithm>
#include <string>

#include "freeknot/errors.hpp"

namespace freeknot {

namespace {

Eigen::VectorXd solve_passive(const Eigen::MatrixXd& a, const Eigen::VectorXd& b, const std::vector<char>& passive) {
  std::vector<int> cols;
  for (int j = 0; j < static_cast<int>(passive.size()); ++j)
    if (passive[j]) cols.push_back(j);
  Eigen::VectorXd z = Eigen::VectorXd::Zero(a.cols());
  if (cols.empty()) return z;
  Eigen::MatrixXd sub(a.rows(), static_cast<Eigen::Index>(cols.size()));
  for (std::size_t c = 0; c < cols.size(); ++c) sub.col(static_cast<Eigen::Index>(c)) = a.col(cols[c]);
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(sub);
  qr.setThreshold(1e-12);
  const Eigen::VectorXd zs = qr.solve(b);
  for (std::size_t c = 0; c < cols.size(); ++c) z(cols[c]) = zs(static_cast<Eigen::Index>(c));
  return z;
}

}  // namespace

NnlsResult nnls(const Eigen::MatrixXd& a, const Eigen::VectorXd& b, const std::vector<bool>& constrained,
                double dual_tol) {
  const int p = static_cast<int>(a.cols());
  if (static_cast<int>(constrained.size()) != p) throw ParameterError("constraint mask size mismatch");
  Eigen::VectorXd norms = a.colwise().norm();
  std::vector<char> zero_col(p, 0);
  for (int j = 0; j < p; ++j) {
    if (norms(j) == 0.0) {
      zero_col[j] = 1;
      norms(j) = 1.0;
    }
  }
  const Eigen::MatrixXd as = a * norms.cwiseInverse().asDiagonal();
  const double tol = dual_tol * std::max(b.norm(), 1e-300);

  std::vector<char> passive(p, 0);
  for (int j = 0; j < p; ++j) passive[j] = !constrained[j] && !zero_col[j];
  Eigen::VectorXd x = solve_passive(as, b, passive);

  std::vector<char> blocked(p, 0);
  const int cap = 100 * std::max(p, 1);
  int iter = 0;
  while (true) {
    const Eigen::VectorXd w = as.transpose() * (b - as * x);
    int t = -1;
    double wmax = tol;
    for (int j = 0; j < p; ++j) {
      if (passive[j] || !constrained[j] || zero_col[j] || blocked[j]) continue;
      if (w(j) > wmax) {
        wmax = w(j);
        t = j;
      }
    }
    if (t < 0) break;
    passive[t] = 1;
    bool first = true;
    while (true) {
      if (++iter > cap) {
        throw SolverError("active-set NNLS did not converge within " + std::to_string(cap) + " iterations");
      }
      const Eigen::VectorXd z = solve_passive(as, b, passive);
      if (first && z(t) <= 0.0) {
        // Rounding made the entering coordinate non-positive; skip it until x moves.
        passive[t] = 0;
        blocked[t] = 1;
        break;
      }
      first = false;
      bool feasible = true;
      double alpha = 1.0;
      for (int j = 0; j < p; ++j) {
        if (!passive[j] || !constrained[j] || z(j) > 0.0) continue;
        feasible = false;
        const double denom = x(j) - z(j);
        if (denom > 0.0) alpha = std::min(alpha, x(j) / denom);
      }
      if (feasible) {
        x = z;
        std::fill(blocked.begin(), blocked.end(), 0);
        break;
      }
      x += alpha * (z - x);
      for (int j = 0; j < p; ++j) {
        if (passive[j] && constrained[j] && x(j) <= 1e-15 * (1.0 + std::abs(z(j)))) {
          passive[j] = 0;
          x(j) = 0.0;
        }
      }
      std::fill(blocked.begin(), blocked.end(), 0);
    }
  }
  for (int j = 0; j < p; ++j)
    if (zero_col[j]) x(j) = 0.0;
  return NnlsResult{x.cwiseQuotient(norms), iter};
}

}  // namespace freeknot
