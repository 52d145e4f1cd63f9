#include <doctest.h>

#include "freeknot/analysis_kernels.hpp"
#include "freeknot/errors.hpp"
#include "freeknot/nnls.hpp"
#include "freeknot/shape_restricted.hpp"
#include "oracles.hpp"
#include "shape_oracle.hpp"

using namespace freeknot;

namespace {

MonotoneCanonical random_rep(std::mt19937_64& g, int d, const KnotVector& kn, int js) {
  std::normal_distribution<double> z(0.0, 1.0);
  const double flip = (d + 1) % 2 == 0 ? 1.0 : -1.0;
  MonotoneCanonical rep{d, js, kn, {}, {}, {}};
  for (int j = 1; j <= js; ++j) rep.a.push_back(flip * std::abs(z(g)));
  for (int j = js; j <= kn.pieces() - 1; ++j) rep.b.push_back(std::abs(z(g)));
  for (int l = 0; l < d; ++l) rep.c.push_back(z(g));
  return rep;
}

Eigen::VectorXd finite_difference(const Signal& t, int order) {
  Eigen::VectorXd v = t;
  for (int o = 0; o < order; ++o) {
    const Eigen::VectorXd next = v.tail(v.size() - 1) - v.head(v.size() - 1);
    v = next;
  }
  return v;
}

}  // namespace

TEST_CASE("nnls against subset enumeration") {
  auto g = oracle::rng(41);
  for (int rep = 0; rep < 60; ++rep) {
    const int m = 8 + rep % 10;
    const int p = 2 + rep % 5;
    const Eigen::MatrixXd a = Eigen::MatrixXd::NullaryExpr(m, p, [&]() { return std::normal_distribution<double>()(g); });
    const Eigen::VectorXd b = oracle::gaussian(g, m);
    std::vector<bool> cons(p);
    for (int j = 0; j < p; ++j) cons[j] = (rep + j) % 3 != 0;
    const NnlsResult r = nnls(a, b, cons);
    for (int j = 0; j < p; ++j)
      if (cons[j]) CHECK(r.x(j) >= 0.0);
    CHECK((b - a * r.x).squaredNorm() == doctest::Approx(oracle::subset_nnls_sse(a, b, cons)).epsilon(1e-9));
  }
}

TEST_CASE("canonical evaluation examples") {
  const KnotVector kn = validate_knots({0, 4, 10}, 1, 10);
  MonotoneCanonical poly{1, 1, kn, {0.0}, {0.0}, {2.0}};
  CHECK((canonical_evaluate(poly) - Signal::Constant(10, 2.0)).norm() == 0.0);
  const KnotVector k0 = validate_knots({0, 3, 8}, 0, 8);
  MonotoneCanonical step{0, 1, k0, {0.0}, {1.0}, {}};
  Signal want(8);
  want << 0, 0, 0, 1, 1, 1, 1, 1;
  CHECK((canonical_evaluate(step) - want).norm() == 0.0);
}

TEST_CASE("canonical members are d-monotone and match their spline form") {
  auto g = oracle::rng(42);
  for (int rep = 0; rep < 60; ++rep) {
    const int d = rep % 4;
    const int n = 20 + rep;
    const KnotVector kn = validate_knots({0, n / 3, (2 * n) / 3, n}, d, n);
    const MonotoneCanonical rep_c = random_rep(g, d, kn, rep % 4);
    const Signal th = canonical_evaluate(rep_c);
    const Eigen::VectorXd diff = finite_difference(th, d + 1);
    CHECK(diff.minCoeff() >= -1e-10);
    CHECK((evaluate_spline(canonical_to_spline(rep_c)) - th).cwiseAbs().maxCoeff() < 1e-10);
    CHECK(check_membership(th, ModelParams(d, d - 1, 3, n)).member);
  }
}

TEST_CASE("fit shape given knots") {
  SUBCASE("two-point pooling") {
    Signal y(2);
    y << 2, 1;
    const KnotVector kn = validate_knots({0, 1, 2}, 0, 2);
    double best = std::numeric_limits<double>::infinity();
    Signal fit;
    for (int js = 0; js <= 2; ++js) {
      const ShapeFit f = fit_shape_given_knots(y, 0, kn, js);
      if (f.fit.sse < best) {
        best = f.fit.sse;
        fit = f.fit.theta_hat;
      }
    }
    CHECK(fit(0) == doctest::Approx(1.5));
    CHECK(fit(1) == doctest::Approx(1.5));
  }
  SUBCASE("representable convex input") {
    auto g = oracle::rng(43);
    const KnotVector kn = validate_knots({0, 5, 12}, 1, 12);
    const Signal th = canonical_evaluate(random_rep(g, 1, kn, 1));
    CHECK(fit_shape_given_knots(th, 1, kn, 1).fit.sse < 1e-20);
  }
  SUBCASE("matches a projected-gradient oracle") {
    auto g = oracle::rng(44);
    for (int rep = 0; rep < 12; ++rep) {
      const int n = 8 + rep % 5;
      const Signal y = oracle::gaussian(g, n);
      const KnotVector kn = validate_knots({0, 3, n - 3, n}, 1, n);
      const int js = rep % 4;
      const CanonicalDesign des = canonical_design(1, kn, js);
      const double lib = fit_shape_given_knots(y, 1, kn, js).fit.sse;
      const double pg = oracle::projected_gradient_sse(des.matrix, y, des.constrained);
      CHECK(std::abs(lib - pg) <= 1e-10 * std::max(1.0, pg) + 1e-10);
    }
  }
}

TEST_CASE("shape lse equals brute force") {
  auto g = oracle::rng(45);
  for (int rep = 0; rep < 30; ++rep) {
    const int n = 7 + rep % 9;
    const int k = 1 + rep % 3;
    const Signal y = oracle::gaussian(g, n);
    const ShapeFit f = shape_lse(y, 1, k);
    CHECK(f.fit.sse == doctest::Approx(oracle::brute_shape(y, 1, k)).epsilon(1e-9));
    CHECK(f.fit.knots.pieces() == k);
    CHECK((f.fit.theta_hat - evaluate_spline(f.fit.spline)).cwiseAbs().maxCoeff() < 1e-9);
    CHECK(check_membership(f.fit.theta_hat, ModelParams(1, 0, k, n), 1e-7).member);
  }
}

TEST_CASE("shape lse with d = 0 and k = n is isotonic regression") {
  auto g = oracle::rng(46);
  for (int n = 2; n <= 20; n += 3) {
    const Signal y = oracle::gaussian(g, n);
    const ShapeFit f = shape_lse(y, 0, n, 1e9);
    CHECK((f.fit.theta_hat - oracle::pava(y)).cwiseAbs().maxCoeff() < 1e-9);
  }
}

TEST_CASE("shape lse recovers noiseless members and nests in k") {
  auto g = oracle::rng(47);
  for (int rep = 0; rep < 10; ++rep) {
    const int n = 14;
    const KnotVector kn = validate_knots({0, 5, 9, 14}, 1, 14);
    const Signal th = canonical_evaluate(random_rep(g, 1, kn, rep % 4));
    const ShapeFit f = shape_lse(th, 1, 3);
    CHECK(f.fit.sse < 1e-16 * std::max(1.0, th.squaredNorm()));
    const Signal y = oracle::gaussian(g, n);
    double prev = std::numeric_limits<double>::infinity();
    for (int k = 1; k <= 4; ++k) {
      const ShapeFit s = shape_lse(y, 1, k);
      CHECK(s.fit.sse <= prev + 1e-12);
      prev = s.fit.sse;
      // Slopes between fitted knots are non-decreasing.
      CHECK(finite_difference(s.fit.theta_hat, 2).minCoeff() >= -1e-9);
    }
  }
  CHECK_THROWS_AS(shape_lse(oracle::gaussian(g, 200), 1, 4, 1e4), BudgetExceededError);
}

TEST_CASE("coefficient bound statistic") {
  CHECK(coef_bound_statistic(Signal::Zero(32), 1, 3) == 0.0);
  const int n = 64;
  Signal lin(n);
  for (int i = 1; i <= n; ++i) lin(i - 1) = 0.5 + 2.0 * i / n;
  // Pure linear: c_0 is the intercept of the normalized sequence.
  CHECK(coef_bound_statistic(lin, 1, 3) == doctest::Approx(std::sqrt(n) * 0.5 / lin.norm()).epsilon(1e-8));
  Signal bumpy = Signal::Zero(n);
  for (int i = 0; i < n; i += 2) bumpy(i) = 1.0;
  CHECK_THROWS_AS(coef_bound_statistic(bumpy, 1, 3), MembershipError);
  const EnsembleReport r = check_shape_coef(51, 200);
  CHECK(r.pass);
}
