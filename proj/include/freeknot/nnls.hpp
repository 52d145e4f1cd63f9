#pragma once

#include <Eigen/Dense>

#include <vector>

namespace freeknot {

struct NnlsResult {
  Eigen::VectorXd x;
  int iterations = 0;
};

// Lawson-Hanson active set for min |A x - b|^2 subject to x_j >= 0 where
// constrained[j]; other coordinates are free. Terminates when every inactive
// constrained coordinate has dual value <= dual_tol * |b| on the
// column-equilibrated problem. Throws SolverError past 100 * cols iterations.
NnlsResult nnls(const Eigen::MatrixXd& a, const Eigen::VectorXd& b, const std::vector<bool>& constrained,
                double dual_tol = 1e-13);

}  // namespace freeknot
