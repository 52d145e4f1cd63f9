#include <doctest.h>

#include "freeknot/analysis_kernels.hpp"
#include "freeknot/errors.hpp"
#include "freeknot/spline_model.hpp"
#include "oracles.hpp"

using namespace freeknot;

namespace {

// Random spline assembled from global truncated-power coefficients.
PiecewiseSpline random_global_spline(std::mt19937_64& g, int d, int d0, int n, int k) {
  std::uniform_int_distribution<int> pick(d + 1, n - d - 1);
  std::vector<int> inner;
  for (int t = 0; t < k - 1; ++t) {
    const int c = pick(g);
    bool ok = c >= d + 1 && n - c >= d + 1;
    for (int s : inner) ok = ok && std::abs(s - c) >= d + 1;
    if (ok) inner.push_back(c);
  }
  std::sort(inner.begin(), inner.end());
  std::vector<int> kv{0};
  kv.insert(kv.end(), inner.begin(), inner.end());
  kv.push_back(n);
  const KnotVector knots = KnotVector::validate(kv, d, n);
  const Eigen::VectorXd global = oracle::gaussian(g, (d + 1) + static_cast<int>(inner.size()) * (d - d0));
  return spline_from_global(d, d0, knots, global);
}

double derivative_at(const Eigen::VectorXd& a, double u, int r) {
  double v = 0.0;
  for (int l = r; l < a.size(); ++l) {
    double f = 1.0;
    for (int t = 0; t < r; ++t) f *= (l - t);
    v += a(l) * f * std::pow(u, l - r);
  }
  return v;
}

}  // namespace

TEST_CASE("transition boundary values") {
  CHECK(transition_boundary(0, -1) == 2);
  CHECK(transition_boundary(3, 2) == 5);
  CHECK(transition_boundary(3, 1) == 3);
  CHECK_THROWS_AS(transition_boundary(2, 2), ParameterError);
  CHECK_THROWS_AS(transition_boundary(2, -2), ParameterError);
}

TEST_CASE("transition boundary is non-decreasing in d0 with fixed endpoints") {
  for (int d = 0; d <= 8; ++d) {
    CHECK(transition_boundary(d, -1) == 2);
    CHECK(transition_boundary(d, d - 1) == d + 2);
    for (int d0 = 0; d0 <= d - 1; ++d0) CHECK(transition_boundary(d, d0) >= transition_boundary(d, d0 - 1));
  }
}

TEST_CASE("model params validation") {
  CHECK(ModelParams(2, 1, 3, 10).k0() == 4);
  CHECK_THROWS_AS(ModelParams(1, 0, 0, 10), ParameterError);
  CHECK_THROWS_AS(ModelParams(2, 0, 2, 2), ValidationError);
}

TEST_CASE("knot validation") {
  CHECK(validate_knots({0, 5, 10}, 1, 10).pieces() == 2);
  CHECK_THROWS_AS(validate_knots({0, 1, 10}, 1, 10), KnotGapError);
  const KnotVector e = validate_knots({0, 5, 5, 10}, 1, 10);
  CHECK(e.piece_empty(1));
  CHECK(e.nonempty_pieces() == 2);
  CHECK_THROWS_AS(validate_knots({0, 6, 4, 10}, 1, 10), KnotOrderError);
  CHECK_THROWS_AS(validate_knots({1, 5, 10}, 1, 10), KnotEndpointError);
  CHECK_THROWS_AS(validate_knots({0, 5, 9}, 1, 10), KnotEndpointError);
  CHECK(e.piece_of(5) == 0);
  CHECK(e.piece_of(6) == 2);
  CHECK(e.padded(4).values() == std::vector<int>{0, 0, 5, 5, 10});
}

TEST_CASE("basis matrix columns") {
  const KnotVector k1 = validate_knots({0, 2, 4}, 0, 4);
  const Eigen::MatrixXd b0 = basis_matrix(ModelParams(0, -1, 2, 4), k1);
  REQUIRE(b0.cols() == 2);
  Eigen::MatrixXd want(4, 2);
  want << 1, 0, 1, 0, 1, 1, 1, 1;
  CHECK((b0 - want).norm() == 0.0);

  const KnotVector k2 = validate_knots({0, 3, 6}, 1, 6);
  const Eigen::MatrixXd b1 = basis_matrix(ModelParams(1, 0, 2, 6), k2);
  REQUIRE(b1.cols() == 3);
  for (int i = 1; i <= 6; ++i) {
    CHECK(b1(i - 1, 0) == 1.0);
    CHECK(b1(i - 1, 1) == doctest::Approx(i / 6.0));
    CHECK(b1(i - 1, 2) == doctest::Approx(std::max(0.0, (i - 3) / 6.0)));
  }
}

TEST_CASE("basis matrix has full column rank for well-spaced knots") {
  auto g = oracle::rng(11);
  for (int rep = 0; rep < 40; ++rep) {
    const int d = rep % 4;
    const int d0 = -1 + static_cast<int>(rep / 4) % (d + 1);
    const int n = 30 + rep;
    const PiecewiseSpline s = random_global_spline(g, d, d0, n, 3);
    const Eigen::MatrixXd b = basis_matrix(d, d0, s.knots());
    const int inner = static_cast<int>(s.knots().inner_distinct().size());
    CHECK(b.cols() == (d + 1) + inner * (d - d0));
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(b);
    svd.setThreshold(1e-10);
    CHECK(svd.rank() == b.cols());
  }
}

TEST_CASE("evaluate spline simple pieces") {
  const KnotVector kv = validate_knots({0, 8}, 1, 8);
  Eigen::VectorXd c(2);
  c << 3.5, 0.0;
  CHECK((evaluate_spline(PiecewiseSpline(kv, {c})) - Signal::Constant(8, 3.5)).norm() == 0.0);
  c << 0.0, 1.0;
  const Signal t = evaluate_spline(PiecewiseSpline(kv, {c}));
  for (int i = 1; i <= 8; ++i) CHECK(t(i - 1) == doctest::Approx(i / 8.0));
}

TEST_CASE("evaluate spline agrees with basis times global coefficients") {
  auto g = oracle::rng(12);
  for (int rep = 0; rep < 60; ++rep) {
    const int d = rep % 4;
    const int d0 = -1 + rep % (d + 1);
    const int n = 20 + rep;
    const int inner = 2;
    const PiecewiseSpline s0 = random_global_spline(g, d, d0, n, inner + 1);
    const int cols = (d + 1) + static_cast<int>(s0.knots().inner_distinct().size()) * (d - d0);
    const Eigen::VectorXd global = oracle::gaussian(g, cols);
    const PiecewiseSpline s = spline_from_global(d, d0, s0.knots(), global);
    const Signal direct = basis_matrix(d, d0, s.knots()) * global;
    CHECK((evaluate_spline(s) - direct).cwiseAbs().maxCoeff() < 1e-10);
    CHECK((global_from_spline(s, d0) - global).cwiseAbs().maxCoeff() < 1e-10);
  }
}

TEST_CASE("global_from_spline rejects splines that break continuity") {
  const KnotVector kv = validate_knots({0, 4, 8}, 1, 8);
  Eigen::VectorXd a(2), b(2);
  a << 0.0, 1.0;
  b << 2.0, 1.0;
  CHECK_THROWS_AS(global_from_spline(PiecewiseSpline(kv, {a, b}), 0), MembershipError);
  CHECK_NOTHROW(global_from_spline(PiecewiseSpline(kv, {a, b}), -1));
}

TEST_CASE("transition coefficients") {
  CHECK(transition_coefficient(3, 2, 2, 0.7) == 1.0);
  CHECK(transition_coefficient(3, 3, 2, 0.7) == 0.0);
  CHECK(transition_coefficient(3, 2, 4, 0.3) == doctest::Approx(3 * 0.3 * 0.3));
  CHECK_THROWS_AS(transition_coefficient(3, 0, 2, 0.3), ParameterError);
  CHECK_THROWS_AS(transition_coefficient(3, 2, 5, 0.3), ParameterError);
  // Transition matrix reproduces the Taylor shift of a polynomial.
  Eigen::VectorXd c(4);
  c << 1.0, -2.0, 0.5, 3.0;
  const Eigen::MatrixXd t = transition_matrix(3, 3 - 1, 0.25);
  CHECK((t * c - shift_polynomial(c, 0.25).head(3)).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("one-sided derivatives match at inner knots up to d0") {
  auto g = oracle::rng(13);
  for (int rep = 0; rep < 60; ++rep) {
    const int d = 1 + rep % 4;
    const int d0 = rep % d;
    const PiecewiseSpline s = random_global_spline(g, d, d0, 40, 4);
    const auto& kn = s.knots();
    const int n = kn.n();
    for (int p = 1; p < kn.pieces(); ++p) {
      const double u = static_cast<double>(kn[p] - kn[p - 1]) / n;
      for (int r = 0; r <= d0; ++r) {
        const double left = derivative_at(s.piece(p - 1), u, r);
        const double right = derivative_at(s.piece(p), 0.0, r);
        CHECK(std::abs(left - right) <= 1e-8 * (1.0 + std::abs(left)));
      }
    }
  }
}

TEST_CASE("membership examples") {
  Signal step(8);
  step << 0, 0, 0, 0, 1, 1, 1, 1;
  const MembershipResult m = check_membership(step, ModelParams(0, -1, 2, 8));
  CHECK(m.member);
  CHECK(m.min_pieces == 2);
  REQUIRE(m.witness);
  CHECK(m.witness->values() == std::vector<int>{0, 4, 8});
  CHECK_FALSE(check_membership(step, ModelParams(1, 0, 2, 8)).member);

  const SparseSystem hat = sparse_construct(1, 0, 4);
  CHECK(check_membership(hat.signal, ModelParams(1, 0, 4, hat.n)).member);
  CHECK_FALSE(check_membership(hat.signal, ModelParams(1, 0, 3, hat.n)).member);
}

TEST_CASE("membership holds for evaluated splines") {
  auto g = oracle::rng(14);
  for (int rep = 0; rep < 80; ++rep) {
    const int d = rep % 4;
    const int d0 = -1 + rep % (d + 1);
    const int k = 1 + rep % 4;
    const PiecewiseSpline s = random_global_spline(g, d, d0, 30 + rep % 17, k);
    const Signal th = evaluate_spline(s);
    const MembershipResult m = check_membership(th, ModelParams(d, d0, k, s.n()));
    CHECK(m.member);
    REQUIRE(m.witness);
    CHECK(m.witness->pieces() == k);
    REQUIRE(m.spline);
    CHECK((evaluate_spline(*m.spline) - th).cwiseAbs().maxCoeff() <= 1e-8);
  }
}

TEST_CASE("membership agrees with brute-force enumeration") {
  auto g = oracle::rng(15);
  int members = 0;
  for (int rep = 0; rep < 120; ++rep) {
    const int d = rep % 3;
    const int d0 = -1 + rep % (d + 1);
    const int n = 9 + rep % 6;
    const int k = 1 + rep % 3;
    Signal th;
    if (rep % 3 == 0) {
      th = oracle::gaussian(g, n);
    } else {
      // A member of a random class, possibly with more pieces than k.
      const int kk = 1 + (rep / 3) % 3;
      th = evaluate_spline(random_global_spline(g, d, d0, n, kk));
    }
    const bool brute = oracle::brute_membership_residual(th, d, d0, k) <= 1e-8;
    const bool fast = check_membership(th, ModelParams(d, d0, k, n)).member;
    CHECK(brute == fast);
    members += fast;
  }
  CHECK(members > 20);
}

TEST_CASE("discrete and integral l2 norms") {
  const KnotVector kv = validate_knots({0, 10}, 0, 10);
  Eigen::VectorXd c(1);
  c << 0.0;
  L2Pair z = discrete_vs_integral_l2(PiecewiseSpline(kv, {c}));
  CHECK(z.discrete == 0.0);
  CHECK(z.integral == 0.0);
  c << 2.0;
  const L2Pair k2 = discrete_vs_integral_l2(PiecewiseSpline(kv, {c}));
  CHECK(k2.discrete == doctest::Approx(40.0));
  CHECK(k2.integral == doctest::Approx(40.0));
}

TEST_CASE("integral l2 matches numerical quadrature") {
  auto g = oracle::rng(16);
  for (int rep = 0; rep < 30; ++rep) {
    const int d = rep % 4;
    const PiecewiseSpline s = random_global_spline(g, d, -1, 24 + rep, 3);
    const auto& kn = s.knots();
    const int n = kn.n();
    double quad = 0.0;
    for (int p = 0; p < kn.pieces(); ++p) {
      if (kn.piece_empty(p)) continue;
      const Eigen::VectorXd a = s.piece(p);
      const double lo = static_cast<double>(kn[p]) / n;
      const double hi = static_cast<double>(kn[p + 1]) / n;
      quad += oracle::simpson(
          [&](double x) {
            const double v = derivative_at(a, x - lo, 0);
            return v * v;
          },
          lo, hi);
    }
    CHECK(discrete_vs_integral_l2(s).integral == doctest::Approx(n * quad).epsilon(1e-9));
  }
}

TEST_CASE("discrete l2 dominates a calibrated fraction of the integral") {
  const Calibration cal = calibrate_l2(31, 300);
  CHECK(cal.value > 0.0);
  const EnsembleReport r = check_l2(31, 200);
  CHECK(r.pass);
  CHECK(r.min_ratio >= cal.value);
}
