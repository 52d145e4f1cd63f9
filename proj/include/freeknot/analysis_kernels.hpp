#pragma once

#include <boost/multiprecision/cpp_int.hpp>

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "freeknot/spline_model.hpp"

namespace freeknot {

using BigInt = boost::multiprecision::cpp_int;
using Rational = boost::multiprecision::cpp_rational;

// Recursion tables over a k0-piece configuration. Indices: s in [0, smax],
// i in [1, d+1] (stored at i-1), j in [0, smax (d - d0)]. Entries outside the
// defined range are zero.
struct BetaTable {
  int d;
  int d0;
  int k0;
  int smax;  // floor((d0+1)/(d-d0))
  std::vector<int> knots;
  std::vector<std::vector<double>> beta;  // beta[s][j]
  Eigen::MatrixXd dfactor;                // D(i, j)
  std::vector<Eigen::MatrixXd> combined;  // combined[s](i-1, j) = D(i,j) beta[s][j]

  // n_{a;b} = (n_a - n_b)/n
  double gap(int a, int b) const;
  // Highest valid i for a given s: d + 1 - s (d - d0).
  int imax(int s) const { return d + 1 - s * (d - d0); }
};

BetaTable beta_table(int d, int d0, const KnotVector& knots);

struct RatioCheck {
  double lhs;
  double rhs;
};

RatioCheck beta_ratio_check(const BetaTable& table, int s, int i, int j1, int j2);

// Right side of the cancellation inequality on piece k0-1-s. theta must be a
// unit-norm spline with k0 nonempty pieces whose first and last gaps are at
// least every middle gap.
double quad_form_residuals(const PiecewiseSpline& theta, int d0, int s, double norm_tol = 1e-9);

Eigen::MatrixXd moment_matrix(int m, int d);
double moment_matrix_lambda_min(int m, int d);

// sum_{j=0}^n binom(n, j) P(j) (-1)^j with P given by ascending coefficients.
BigInt binomial_identity_check(int n, const std::vector<BigInt>& poly);

struct DofResult {
  int min_pieces;   // smallest k with (k-2)(d+1) >= (k-1)(d0+1) + 1
  int k0_plus_one;
};
DofResult dof_min_pieces(int d, int d0);

// Middle-vanishing construction on [1/3, 2/3] with k pieces: inner knots
// tau_1 = 1/3 < ... < tau_{k-1} = 2/3, unknowns c^j_l for middle pieces
// j = 1..k-2 and l = d0+1..d, and one row per derivative order r <= d0
// forcing f^(r)(2/3) = 0.
struct SparseSystem {
  int d;
  int d0;
  int k;
  int n = 0;
  std::vector<Rational> tau;                  // tau_0 .. tau_k
  std::vector<std::vector<Rational>> matrix;  // (d0+1) x (k-2)(d-d0)
  int nullspace_dim = 0;
  std::vector<std::vector<Rational>> nullspace;
  std::vector<Rational> coefficients;  // chosen nullspace element, empty when dim = 0
  bool general_position = false;       // every middle coefficient nonzero
  Signal signal;                       // f(i/n), scaled to max |f| = 1; zero when dim = 0
  bool membership_ok = false;
  double max_outside = 0.0;            // max |theta_i| over i <= n/3 or i > 2n/3
};

// n = 0 picks the smallest multiple of 3(k-2) that is >= max(3(k-2)(d+1), 60).
SparseSystem sparse_construct(int d, int d0, int k, int n = 0);

// Empirical constants with their provenance.
struct Calibration {
  std::string name;
  double value;
  std::uint64_t seed;
  int instances;
  std::string grid;
};

struct EnsembleReport {
  std::string suite;
  int instances = 0;
  double min_ratio = 0.0;
  double max_residual = 0.0;
  bool pass = false;
  std::optional<Calibration> calibration;
};

// min over (s, i, j1 <= j2) of lhs/rhs on one configuration.
double beta_min_ratio(const BetaTable& table);
KnotVector random_k0_knots(int d, int d0, std::uint64_t seed, std::uint64_t stream, bool end_long);
PiecewiseSpline random_unit_spline(int d, int d0, const KnotVector& knots, std::uint64_t seed,
                                   std::uint64_t stream);

Calibration calibrate_beta(std::uint64_t seed, int instances);
Calibration calibrate_quad(std::uint64_t seed, int instances);
Calibration calibrate_l2(std::uint64_t seed, int instances);
Calibration calibrate_shape_coef(std::uint64_t seed, int instances);

EnsembleReport check_binomial();
EnsembleReport check_moment();
EnsembleReport check_beta(std::uint64_t seed, int instances = 200);
EnsembleReport check_quad(std::uint64_t seed, int instances = 500);
EnsembleReport check_l2(std::uint64_t seed, int instances = 200);
EnsembleReport check_sparse();
EnsembleReport check_dof();
EnsembleReport check_shape_coef(std::uint64_t seed, int instances = 500);

}  // namespace freeknot
