#pragma once

#include <optional>
#include <vector>

#include "freeknot/l0_solvers.hpp"

namespace freeknot {

// theta*_i = sum_{j=1}^{j*} a_j ((n_j - i)/n)_+^d + sum_{j=j*}^{k-1} b_j ((i - n_j)/n)_+^d
//          + sum_{l=0}^{d-1} (c_l / l!) (i/n)^l
// with a_j (-1)^(d+1) >= 0 and b_j >= 0. For d = 0 the truncated powers are
// the indicators 1{i <= n_j} and 1{i > n_j}.
struct MonotoneCanonical {
  int d;
  int j_star;
  KnotVector knots;       // k+1 entries, n_0 = 0, n_k = n
  std::vector<double> a;  // a_1..a_{j*}
  std::vector<double> b;  // b_{j*}..b_{k-1}
  std::vector<double> c;  // c_0..c_{d-1}
};

Signal canonical_evaluate(const MonotoneCanonical& rep);
PiecewiseSpline canonical_to_spline(const MonotoneCanonical& rep);

// Design columns in variable order (a-block sign-flipped, b-block, c-block)
// and the matching non-negativity mask.
struct CanonicalDesign {
  Eigen::MatrixXd matrix;
  std::vector<bool> constrained;
};
CanonicalDesign canonical_design(int d, const KnotVector& knots, int j_star);

struct ShapeFit {
  FitResult fit;
  MonotoneCanonical canonical;
};

ShapeFit fit_shape_given_knots(const Signal& y, int d, const KnotVector& knots, int j_star);

// Searches knot sets that cannot be refined further (adding a knot enlarges
// the cone, so these dominate) and every pivot j* in [0, k].
ShapeFit shape_lse(const Signal& y, int d, int k, double budget = kDefaultBudget);

// Returns a canonical refit with max-abs residual <= tol when theta lies in
// Theta*(d, k).
std::optional<ShapeFit> check_shape_membership(const Signal& theta, int d, int k, double tol = 1e-8);

// max_l |c_l| sqrt(n) for theta normalized to unit norm.
double coef_bound_statistic(const Signal& theta_star, int d, int k);

}  // namespace freeknot
