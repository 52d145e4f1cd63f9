#include <doctest.h>

#include <array>

#include "freeknot/analysis_kernels.hpp"
#include "freeknot/errors.hpp"
#include "oracles.hpp"

using namespace freeknot;

namespace {

// Ceiling form of the smallest k with (k-2)(d+1) >= (k-1)(d0+1) + 1.
int dof_closed_form(int d, int d0) { return (2 * d + 2 - d0 + (d - d0) - 1) / (d - d0); }

}  // namespace

TEST_CASE("beta table structure") {
  const KnotVector kn = validate_knots({0, 7, 10, 15, 30}, 2, 30);
  const BetaTable t = beta_table(2, 1, kn);
  CHECK(t.k0 == 4);
  CHECK(t.smax == 2);
  for (int s = 0; s <= t.smax; ++s) {
    CHECK(t.beta[s][0] == doctest::Approx(1.0));
    for (int j = 0; j < static_cast<int>(t.beta[s].size()); ++j) {
      CHECK(t.beta[s][j] >= 0.0);
      if (j > s * (t.d - t.d0)) CHECK(t.beta[s][j] == 0.0);
    }
  }
  // s = 1 with d0 = d-1 is (1, gap).
  CHECK(t.beta[1][1] == doctest::Approx(5.0 / 30.0));
  CHECK_THROWS_AS(beta_table(2, 1, validate_knots({0, 10, 30}, 2, 30)), ParameterError);
}

TEST_CASE("beta recursion against a hand expansion") {
  // d = 2, d0 = 1, s = 2: beta^2_j = sum_l C(2-l, j-l) g2^(j-l) beta^1_l with beta^1 = (1, g1).
  const KnotVector kn = validate_knots({0, 6, 9, 17, 30}, 2, 30);
  const BetaTable t = beta_table(2, 1, kn);
  const double g1 = 8.0 / 30.0;  // n_3 - n_2
  const double g2 = 3.0 / 30.0;  // n_2 - n_1
  CHECK(t.beta[2][0] == doctest::Approx(1.0));
  CHECK(t.beta[2][1] == doctest::Approx(2 * g2 + g1));
  CHECK(t.beta[2][2] == doctest::Approx(g2 * g2 + g1 * g2));
}

TEST_CASE("beta ratio right side is the flattened span product") {
  for (std::uint64_t stream = 0; stream < 40; ++stream) {
    const int d = 1 + static_cast<int>(stream % 3);
    const int d0 = stream % 2 == 0 ? d - 1 : std::max(-1, d - 2);
    if (d0 < 0) continue;
    const KnotVector kn = random_k0_knots(d, d0, 7, stream, false);
    const BetaTable t = beta_table(d, d0, kn);
    const int q = d - d0;
    for (int s = 1; s <= t.smax; ++s) {
      for (int j1 = 0; j1 <= s * q; ++j1) {
        for (int j2 = j1; j2 <= s * q; ++j2) {
          double flat = 1.0;
          for (int m = j1 + 1; m <= j2; ++m) {
            const int l = (m + q - 1) / q;
            flat *= static_cast<double>(kn[t.k0 - l] - kn[t.k0 - 1 - s]) / kn.n();
          }
          const RatioCheck r = beta_ratio_check(t, s, 1, j1, j2);
          CHECK(r.rhs == doctest::Approx(flat).epsilon(1e-12));
          if (j1 == j2) CHECK(r.rhs == doctest::Approx(1.0));
        }
      }
    }
  }
}

TEST_CASE("uncombined first-step ratio equals the adjacent gap") {
  for (int d = 1; d <= 4; ++d) {
    const KnotVector kn = random_k0_knots(d, d - 1, 9, static_cast<std::uint64_t>(d), false);
    const BetaTable t = beta_table(d, d - 1, kn);
    CHECK(t.beta[1][1] / t.beta[1][0] == doctest::Approx(t.gap(d + 1, d)));
    // The combined ratio carries the D(i,1) factor on top.
    for (int i = 1; i <= t.imax(1); ++i) {
      const RatioCheck r = beta_ratio_check(t, 1, i, 0, 1);
      CHECK(r.lhs == doctest::Approx(t.dfactor(i - 1, 1) * t.gap(d + 1, d)));
    }
  }
}

TEST_CASE("beta ratio argument validation") {
  const BetaTable t = beta_table(1, 0, validate_knots({0, 4, 9, 20}, 1, 20));
  CHECK_THROWS_AS(beta_ratio_check(t, 0, 1, 0, 1), ParameterError);
  CHECK_THROWS_AS(beta_ratio_check(t, 1, 1, 1, 0), ParameterError);
  CHECK_THROWS_AS(beta_ratio_check(t, 1, 3, 0, 1), ParameterError);
}

TEST_CASE("quadratic form preconditions") {
  const KnotVector kn = validate_knots({0, 10, 14, 24}, 1, 24);
  const PiecewiseSpline s = random_unit_spline(1, 0, kn, 3, 0);
  CHECK(evaluate_spline(s).norm() == doctest::Approx(1.0));
  CHECK_NOTHROW(quad_form_residuals(s, 0, 1));
  CHECK_THROWS_AS(quad_form_residuals(s.scaled(2.0), 0, 1), PreconditionError);
  const KnotVector short_end = validate_knots({0, 3, 20, 24}, 1, 24);
  CHECK_THROWS_AS(quad_form_residuals(random_unit_spline(1, 0, short_end, 3, 0), 0, 0), PreconditionError);
  const KnotVector two = validate_knots({0, 12, 24}, 1, 24);
  CHECK_THROWS_AS(quad_form_residuals(random_unit_spline(1, 0, two, 3, 0), 0, 0), PreconditionError);
}

TEST_CASE("quadratic form at s = 0 is bounded by the last-piece energy") {
  // With b_l = a_l (L/n)^l the s = 0 value is L |b|^2 while the last-piece
  // energy is L b' A(L, d) b, so value * lambda_min(A) <= energy.
  for (std::uint64_t stream = 0; stream < 60; ++stream) {
    const int d = static_cast<int>(stream % 4);
    const int d0 = d - 1;
    const KnotVector kn = random_k0_knots(d, d0, 11, stream, true);
    const PiecewiseSpline s = random_unit_spline(d, d0, kn, 11, stream + 1000);
    const int k0 = kn.pieces();
    const int len = kn.n() - kn[k0 - 1];
    const double energy = evaluate_spline(s).tail(len).squaredNorm();
    const double v = quad_form_residuals(s, d0, 0);
    CHECK(v * moment_matrix_lambda_min(len, d) <= energy * (1 + 1e-9) + 1e-14);
  }
}

TEST_CASE("moment matrix") {
  CHECK(moment_matrix(7, 0)(0, 0) == doctest::Approx(1.0));
  CHECK(moment_matrix_lambda_min(1, 0) == doctest::Approx(1.0));
  // Exact entries: sum_k (k/m)^r / m.
  const int m = 5;
  const Eigen::MatrixXd a = moment_matrix(m, 2);
  for (int i = 0; i <= 2; ++i) {
    for (int j = 0; j <= 2; ++j) {
      Rational s = 0;
      for (int k = 1; k <= m; ++k) {
        Rational p = 1;
        for (int r = 0; r < i + j; ++r) p *= Rational(k, m);
        s += p;
      }
      CHECK(a(i, j) == doctest::Approx(static_cast<double>(Rational(s / m))).epsilon(1e-14));
    }
  }
  for (int d = 0; d <= 3; ++d) {
    for (int mm = d + 1; mm <= 60; ++mm) CHECK(moment_matrix_lambda_min(mm, d) > 0.0);
    const Eigen::MatrixXd lim = moment_matrix(100000, d);
    for (int i = 0; i <= d; ++i)
      for (int j = 0; j <= d; ++j) CHECK(std::abs(lim(i, j) - 1.0 / (i + j + 1)) < 1e-3);
  }
  CHECK_THROWS_AS(moment_matrix(2, 2), PreconditionError);
}

TEST_CASE("alternating binomial identity") {
  CHECK(binomial_identity_check(3, {0, 0, 1}) == 0);
  CHECK(binomial_identity_check(5, {0, 0, 0, 0, 1}) == 0);
  CHECK(binomial_identity_check(6, {7, -3, 2, 0, 5, 1}) == 0);
  CHECK_THROWS_AS(binomial_identity_check(3, {0, 0, 0, 1}), PreconditionError);
  CHECK(check_binomial().pass);
}

TEST_CASE("minimum piece count for a sparse member") {
  for (int d = 0; d <= 8; ++d) {
    for (int d0 = -1; d0 < d; ++d0) {
      const DofResult r = dof_min_pieces(d, d0);
      CHECK(r.min_pieces == dof_closed_form(d, d0));
      CHECK(r.min_pieces <= r.k0_plus_one);
      if (d0 == d - 1) CHECK(r.min_pieces == r.k0_plus_one);
    }
  }
  const std::vector<std::array<int, 3>> rows{{0, -1, 3}, {1, -1, 3}, {1, 0, 4}, {2, -1, 3}, {2, 0, 3}, {2, 1, 5}};
  for (const auto& [d, d0, k] : rows) CHECK(dof_min_pieces(d, d0).min_pieces == k);
  CHECK(check_dof().pass);
}

TEST_CASE("sparse construction examples") {
  SUBCASE("boxcar") {
    const SparseSystem s = sparse_construct(0, -1, 3, 9);
    CHECK(s.nullspace_dim == 1);
    Signal want = Signal::Zero(9);
    want.segment(3, 3).setConstant(1.0);
    CHECK((s.signal.cwiseAbs() - want).norm() == 0.0);
    CHECK(s.membership_ok);
  }
  SUBCASE("hat") {
    const SparseSystem s = sparse_construct(1, 0, 4, 12);
    CHECK(s.nullspace_dim == 1);
    CHECK(s.general_position);
    CHECK(s.max_outside == 0.0);
    // Peak at the middle knot 1/2.
    CHECK(std::abs(s.signal(5)) == doctest::Approx(1.0));
    CHECK(s.membership_ok);
  }
  SUBCASE("too few pieces") {
    const SparseSystem s = sparse_construct(1, 0, 3);
    CHECK(s.nullspace_dim == 0);
    CHECK(s.signal.norm() == 0.0);
  }
  CHECK_THROWS_AS(sparse_construct(1, 0, 4, 13), ParameterError);
}

TEST_CASE("sparse nullspace matches a floating-point rank and vanishes outside") {
  for (int d = 0; d <= 4; ++d) {
    for (int d0 = -1; d0 < d; ++d0) {
      const int k0 = transition_boundary(d, d0);
      for (int k = 2; k <= k0 + 1; ++k) {
        const SparseSystem s = sparse_construct(d, d0, k);
        const int cols = (k - 2) * (d - d0);
        Eigen::MatrixXd a(d0 + 1, cols);
        for (int r = 0; r <= d0; ++r)
          for (int c = 0; c < cols; ++c) a(r, c) = static_cast<double>(s.matrix[r][c]);
        int rank = 0;
        if (cols > 0 && d0 >= 0) {
          Eigen::JacobiSVD<Eigen::MatrixXd> svd(a);
          svd.setThreshold(1e-10);
          rank = static_cast<int>(svd.rank());
        }
        CHECK(s.nullspace_dim == cols - rank);
        if (s.nullspace_dim == 0) continue;
        // Exact check of f^(r)(2/3) = 0 for r <= d0, so the zero last piece joins smoothly.
        const int q = d - d0;
        {
          const Rational x = s.tau[k - 1];
          for (int r = 0; r <= d0; ++r) {
            Rational f = 0;
            for (int j = 1; j <= k - 2; ++j) {
              for (int l = d0 + 1; l <= d; ++l) {
                Rational term = s.coefficients[(j - 1) * q + (l - d0 - 1)];
                for (int t = 0; t < r; ++t) term *= (l - t);
                for (int t = 0; t < l - r; ++t) term *= (x - s.tau[j]);
                f += term;
              }
            }
            CHECK(f == 0);
          }
        }
        CHECK(s.max_outside == 0.0);
        CHECK(s.membership_ok);
        CHECK(s.signal.cwiseAbs().maxCoeff() == doctest::Approx(1.0));
      }
    }
  }
  CHECK(check_sparse().pass);
}

TEST_CASE("random knot generators respect their contract") {
  for (std::uint64_t stream = 0; stream < 100; ++stream) {
    const int d = static_cast<int>(stream % 4);
    const KnotVector kn = random_k0_knots(d, d - 1, 5, stream, true);
    const int k0 = transition_boundary(d, d - 1);
    CHECK(kn.pieces() == k0);
    CHECK(kn.nonempty_pieces() == k0);
    int middle = 0;
    for (int p = 1; p + 1 < k0; ++p) middle = std::max(middle, kn[p + 1] - kn[p]);
    CHECK(kn[1] - kn[0] >= middle);
    CHECK(kn[k0] - kn[k0 - 1] >= middle);
    const PiecewiseSpline s = random_unit_spline(d, d - 1, kn, 5, stream);
    CHECK(evaluate_spline(s).norm() == doctest::Approx(1.0));
    CHECK(check_membership(evaluate_spline(s), ModelParams(d, d - 1, k0, kn.n()), 1e-7).member);
  }
}

TEST_CASE("calibrated ensembles pass on held-out streams") {
  const EnsembleReport beta = check_beta(61, 200);
  CHECK(beta.pass);
  CHECK(beta.calibration->value > 0.0);
  CHECK(check_quad(62, 300).pass);
  CHECK(check_moment().pass);
}
