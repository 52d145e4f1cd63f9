#pragma once

#include <functional>
#include <vector>

#include "freeknot/spline_model.hpp"

namespace freeknot {

inline constexpr double kDefaultBudget = 1e7;
inline constexpr double kDefaultTau = 2.5;

struct FitResult {
  Signal theta_hat;
  KnotVector knots;  // padded to k_selected+1 entries
  PiecewiseSpline spline;
  double sse;
  int k_selected;
};

struct SegmentFit {
  double sse = 0.0;
  Eigen::VectorXd coeffs;  // powers of (x - start/n)
};

// Degree-d least squares on one segment observed at x = start/n + i/n,
// i = 1..len. n_scale = 0 uses the segment length as n.
SegmentFit segment_cost(const Eigen::Ref<const Eigen::VectorXd>& y, int d, int n_scale = 0);

FitResult fit_given_knots(const Signal& y, const ModelParams& params, const KnotVector& knots);

// Optimal partitioning for d0 = -1.
FitResult dp_fit(const Signal& y, const ModelParams& params);
// Optimal SSE with at most m pieces for m = 1..k_max (d0 = -1).
std::vector<double> dp_sse_path(const Signal& y, int d, int k_max);

// Number of distinct valid inner-knot sets with at most k pieces.
double count_configurations(int n, int d, int k);

// Calls fn(inner) for every valid inner-knot set with at most k pieces, ordered
// by the lexicographic order of the zero-padded knot vector.
void for_each_configuration(int n, int d, int k, const std::function<void(const std::vector<int>&)>& fn);

KnotVector knots_from_inner(const std::vector<int>& inner, int d, int n, int k);

FitResult exhaustive_fit(const Signal& y, const ModelParams& params, double budget = kDefaultBudget);

struct PenaltySpec {
  double tau = kDefaultTau;
  double sigma = 1.0;
  int d = 0;
  int d0 = -1;
  int n = 1;
};

double penalty(int k, const PenaltySpec& spec);

struct SelectionStep {
  int k;
  double sse;
  double penalty;
  double objective;
};

struct AdaptiveFit {
  FitResult fit;
  std::vector<SelectionStep> trace;
};

int default_k_max(int d, int d0, int n);

// Ignores params.k(); k ranges over [1, k_max].
AdaptiveFit adaptive_fit(const Signal& y, const ModelParams& params, const PenaltySpec& spec, int k_max,
                         double budget = kDefaultBudget);

// median |Y_{i+1} - Y_i| / (sqrt(2) * 0.6745)
double estimate_sigma(const Signal& y);

}  // namespace freeknot
