#include "freeknot/shape_restricted.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "freeknot/errors.hpp"
#include "freeknot/nnls.hpp"

namespace freeknot {

namespace {

double factorial(int l) {
  double f = 1.0;
  for (int i = 2; i <= l; ++i) f *= i;
  return f;
}

// ((n_j - i)/n)_+^d with the d = 0 convention 1{i <= n_j}.
double left_power(int nj, int i, int n, int d) {
  if (d == 0) return i <= nj ? 1.0 : 0.0;
  return i < nj ? std::pow(static_cast<double>(nj - i) / n, d) : 0.0;
}

// ((i - n_j)/n)_+^d with the d = 0 convention 1{i > n_j}.
double right_power(int nj, int i, int n, int d) {
  if (d == 0) return i > nj ? 1.0 : 0.0;
  return i > nj ? std::pow(static_cast<double>(i - nj) / n, d) : 0.0;
}

void check_pivot(const KnotVector& knots, int j_star) {
  if (j_star < 0 || j_star > knots.pieces()) {
    throw ParameterError("pivot j* must lie in [0, k], got " + std::to_string(j_star));
  }
}

KnotVector compact(const KnotVector& knots) {
  std::vector<int> kv{0};
  for (int t : knots.inner_distinct()) kv.push_back(t);
  kv.push_back(knots.n());
  return KnotVector::validate(kv, knots.degree(), knots.n());
}

bool strictly_better(double cand, double best, double scale) {
  return cand < best * (1.0 - 1e-10) - 1e-28 * scale;
}

}  // namespace

CanonicalDesign canonical_design(int d, const KnotVector& knots, int j_star) {
  check_pivot(knots, j_star);
  const int n = knots.n();
  const int k = knots.pieces();
  const int na = j_star;
  const int nb = k - j_star;
  CanonicalDesign out{Eigen::MatrixXd::Zero(n, na + nb + d), std::vector<bool>(na + nb + d, false)};
  const double flip = (d + 1) % 2 == 0 ? 1.0 : -1.0;
  for (int i = 1; i <= n; ++i) {
    for (int j = 1; j <= j_star; ++j) out.matrix(i - 1, j - 1) = flip * left_power(knots[j], i, n, d);
    for (int j = j_star; j <= k - 1; ++j) out.matrix(i - 1, na + (j - j_star)) = right_power(knots[j], i, n, d);
    const double x = static_cast<double>(i) / n;
    for (int l = 0; l < d; ++l) out.matrix(i - 1, na + nb + l) = std::pow(x, l) / factorial(l);
  }
  for (int j = 0; j < na + nb; ++j) out.constrained[j] = true;
  return out;
}

Signal canonical_evaluate(const MonotoneCanonical& rep) {
  const auto& kn = rep.knots;
  const int n = kn.n();
  const int d = rep.d;
  check_pivot(kn, rep.j_star);
  Signal theta = Signal::Zero(n);
  for (int i = 1; i <= n; ++i) {
    double v = 0.0;
    for (int j = 1; j <= rep.j_star; ++j) v += rep.a[j - 1] * left_power(kn[j], i, n, d);
    for (int j = rep.j_star; j <= kn.pieces() - 1; ++j) v += rep.b[j - rep.j_star] * right_power(kn[j], i, n, d);
    const double x = static_cast<double>(i) / n;
    for (int l = 0; l < d; ++l) v += rep.c[l] * std::pow(x, l) / factorial(l);
    theta(i - 1) = v;
  }
  return theta;
}

PiecewiseSpline canonical_to_spline(const MonotoneCanonical& rep) {
  const auto& kn = rep.knots;
  const int n = kn.n();
  const int d = rep.d;
  std::vector<Eigen::VectorXd> coeffs(static_cast<std::size_t>(kn.pieces()));
  Eigen::VectorXd mono = Eigen::VectorXd::Zero(d + 1);
  mono(d) = 1.0;
  const double sign_d = d % 2 == 0 ? 1.0 : -1.0;
  for (int p = 0; p < kn.pieces(); ++p) {
    if (kn.piece_empty(p)) continue;
    const double s = static_cast<double>(kn[p]) / n;
    Eigen::VectorXd poly = Eigen::VectorXd::Zero(d + 1);
    for (int l = 0; l < d; ++l) poly(l) = rep.c[l] / factorial(l);
    poly = shift_polynomial(poly, s);
    for (int j = 1; j <= rep.j_star; ++j) {
      if (kn[j] < kn[p + 1]) continue;
      // (tau - x)^d = (-1)^d (x - tau)^d
      poly += rep.a[j - 1] * sign_d * shift_polynomial(mono, s - static_cast<double>(kn[j]) / n);
    }
    for (int j = rep.j_star; j <= kn.pieces() - 1; ++j) {
      if (kn[j] > kn[p]) continue;
      poly += rep.b[j - rep.j_star] * shift_polynomial(mono, s - static_cast<double>(kn[j]) / n);
    }
    coeffs[p] = poly;
  }
  return PiecewiseSpline(kn, std::move(coeffs));
}

ShapeFit fit_shape_given_knots(const Signal& y, int d, const KnotVector& knots, int j_star) {
  if (knots.degree() != d) throw ParameterError("knot vector degree differs from d");
  if (y.size() != knots.n()) throw ParameterError("observation length differs from n");
  const CanonicalDesign des = canonical_design(d, knots, j_star);
  const NnlsResult sol = nnls(des.matrix, y, des.constrained);
  const int na = j_star;
  const int nb = knots.pieces() - j_star;
  const double flip = (d + 1) % 2 == 0 ? 1.0 : -1.0;
  MonotoneCanonical rep{d, j_star, knots, {}, {}, {}};
  for (int j = 0; j < na; ++j) rep.a.push_back(flip * sol.x(j));
  for (int j = 0; j < nb; ++j) rep.b.push_back(sol.x(na + j));
  for (int l = 0; l < d; ++l) rep.c.push_back(sol.x(na + nb + l));
  Signal theta = des.matrix * sol.x;
  const double sse = (y - theta).squaredNorm();
  PiecewiseSpline spline = canonical_to_spline(rep);
  FitResult fit{std::move(theta), knots, std::move(spline), sse, knots.pieces()};
  return ShapeFit{std::move(fit), std::move(rep)};
}

ShapeFit shape_lse(const Signal& y, int d, int k, double budget) {
  const int n = static_cast<int>(y.size());
  if (d < 0) throw ParameterError("degree d must be >= 0");
  if (k < 1) throw ParameterError("k must be >= 1");
  if (n < d + 1) throw InfeasibleSegmentError("n < d+1");
  const double count = count_configurations(n, d, k) * (k + 1);
  if (count > budget) throw BudgetExceededError(count, budget);
  const int g = d + 1;
  const double scale = std::max(y.squaredNorm(), std::numeric_limits<double>::min());
  std::optional<ShapeFit> best;
  for_each_configuration(n, d, k, [&](const std::vector<int>& inner) {
    if (static_cast<int>(inner.size()) < k - 1) {
      int prev = 0;
      for (int t : inner) {
        if (t - prev >= 2 * g) return;
        prev = t;
      }
      if (n - prev >= 2 * g) return;
    }
    const KnotVector kv = knots_from_inner(inner, d, n, static_cast<int>(inner.size()) + 1);
    for (int js = 0; js <= kv.pieces(); ++js) {
      ShapeFit f = fit_shape_given_knots(y, d, kv, js);
      if (!best || strictly_better(f.fit.sse, best->fit.sse, scale)) best = std::move(f);
    }
  });
  if (!best) throw InfeasibleSegmentError("no valid knot configuration");
  best->fit.knots = best->fit.knots.padded(k);
  best->fit.spline = PiecewiseSpline(best->fit.knots, [&] {
    std::vector<Eigen::VectorXd> c(static_cast<std::size_t>(k - best->canonical.knots.pieces()));
    for (const auto& v : best->fit.spline.coeffs()) c.push_back(v);
    return c;
  }());
  best->fit.k_selected = k;
  return std::move(*best);
}

std::optional<ShapeFit> check_shape_membership(const Signal& theta, int d, int k, double tol) {
  const int n = static_cast<int>(theta.size());
  const int d0 = d - 1;
  const MembershipResult m = check_membership(theta, ModelParams(d, d0, k, n), tol);
  if (!m.member) return std::nullopt;
  const KnotVector kv = compact(*m.witness);
  for (int js = 0; js <= kv.pieces(); ++js) {
    ShapeFit f = fit_shape_given_knots(theta, d, kv, js);
    if ((theta - f.fit.theta_hat).cwiseAbs().maxCoeff() <= tol) return f;
  }
  return std::nullopt;
}

double coef_bound_statistic(const Signal& theta_star, int d, int k) {
  const double norm = theta_star.norm();
  if (norm == 0.0) return 0.0;
  const Signal unit = theta_star / norm;
  const auto f = check_shape_membership(unit, d, k);
  if (!f) throw MembershipError("signal is not a d-monotone spline with at most k pieces");
  double m = 0.0;
  for (double c : f->canonical.c) m = std::max(m, std::abs(c));
  return m * std::sqrt(static_cast<double>(theta_star.size()));
}

}  // namespace freeknot
