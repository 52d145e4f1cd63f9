#pragma once

#include <cstdint>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "freeknot/analysis_kernels.hpp"
#include "freeknot/l0_solvers.hpp"

namespace freeknot {

// Y = theta0 + sigma * eps with eps drawn from stream (seed, replicate).
Signal simulate(const Signal& theta0, double sigma, std::uint64_t seed, std::uint64_t replicate = 0);

// max over 1 <= n1 < n2 <= n of
//   |sum_{i in (n1, n2]} (i - n1)^d eps_i| / ((n2 - n1)^d sqrt(min(n2, n - n1))).
double lil_statistic(const Signal& eps, int d);

// sup over unit-norm theta in Theta(d, d0, k) of (eps . theta)^2.
// d0 = -1 runs a max-DP over segmentations; otherwise knot configurations are
// enumerated under the budget.
double complexity_width(const Signal& eps, const ModelParams& params, double budget = 1e9);
// Always enumerates configurations; any d0.
double complexity_width_enumerated(const Signal& eps, const ModelParams& params, double budget = 1e9);

// M = floor(log2(n / (d+1))).
int lf_levels(int n, int d);
// alpha_l (x - tau_l/n)_+^d at x = i/n with tau_l = floor((1 - 2^-l) n).
Signal least_favorable_signal(int n, int d, int ell, double c_scale = 1.0);

// l0 = floor(log2(n / (2 k/3))). Index l0 + 1 selects the reference block.
int shaped_levels(int n, int k);
// Convex piecewise-linear ensemble member over k/3 blocks of n/(k/3) points.
// Every kink sits on the grid, so the output lies in Theta*(1, k).
Signal shaped_lf_ensemble(int n, int k, const std::vector<int>& index_vector, double c_scale = 1.0);
// count i.i.d. uniform index vectors in [1; l0]^(k/3).
std::vector<std::vector<int>> sample_index_vectors(int n, int k, int count, std::uint64_t seed);

// Step of height h on the last ceil(n/8) points, h chosen so ||theta|| = scale.
Signal sparse_boxcar(int n, double scale);

enum class SignalKind { zero, lf_spline, sparse_boxcar, shaped_lf, custom_file };
enum class Estimator { l0_fit, adaptive, shape_lse };

SignalKind parse_signal_kind(const std::string& s);
Estimator parse_estimator(const std::string& s);
std::string to_string(SignalKind s);
std::string to_string(Estimator e);

struct ExperimentConfig {
  std::vector<int> n_grid;
  int d = 0;
  int d0 = -1;
  int k = 2;
  int reps = 1;
  std::uint64_t master_seed = 0;
  SignalKind signal_kind = SignalKind::zero;
  double sigma = 1.0;
  double scale = 10.0;      // signal amplitude for lf_spline (c_scale) and sparse_boxcar (norm)
  int lf_level = 0;         // 0 picks ceil(M/2)
  double tau = kDefaultTau;
  int k_max = 0;            // 0 picks default_k_max
  double budget = kDefaultBudget;
  Signal custom;            // used when signal_kind = custom_file

  void validate() const;
};

Signal make_signal(const ExperimentConfig& config, int n);

struct RiskRow {
  int n;
  int k;
  double mean_risk;  // nan when the cell failed
  double std_error;
  double rate_loglog;
  double rate_log;
  bool failed = false;
  std::string error;
};

struct RiskCurve {
  ExperimentConfig config;
  Estimator estimator;
  std::vector<RiskRow> rows;
};

double rate_loglog(int n, int k);  // k loglog(16n/k)
double rate_log(int n, int k);     // k log(en/k)

RiskCurve mc_risk(const ExperimentConfig& config, Estimator estimator);

struct CurveRow {
  int n;
  double mean;
  double std_error;
};

// mean of Z^2 per n over reps noise draws.
std::vector<CurveRow> lil_curve(const std::vector<int>& n_grid, int d, int reps, std::uint64_t seed);
// mean complexity width per n over reps noise draws.
std::vector<CurveRow> width_curve(const std::vector<int>& n_grid, int d, int d0, int k, int reps,
                                  std::uint64_t seed, double budget = 1e9);

// Median of the grid values with the highest rate of selecting true_k on
// calibration replicates (streams [0, reps)).
Calibration calibrate_tau(const Signal& theta0, int d, int d0, int true_k, double sigma, int reps,
                          std::uint64_t seed, const std::vector<double>& grid);
// Share of replicates in streams [first, first + reps) that select true_k.
double selection_rate(const Signal& theta0, int d, int d0, int true_k, double sigma, double tau, int reps,
                      std::uint64_t seed, std::uint64_t first);

void write_risk_csv(std::ostream& os, const RiskCurve& curve);
void write_lil_csv(std::ostream& os, const std::vector<CurveRow>& rows, int d, int reps, std::uint64_t seed);
void write_width_csv(std::ostream& os, const std::vector<CurveRow>& rows, int k, int d, int d0, int reps,
                     std::uint64_t seed);

}  // namespace freeknot
