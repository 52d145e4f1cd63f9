#include "freeknot/l0_solvers.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "freeknot/errors.hpp"
#include "poly_fit.hpp"

namespace freeknot {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Improvement must beat rounding noise to displace an earlier configuration.
bool strictly_better(double cand, double best, double scale) {
  return cand < best * (1.0 - 1e-10) - 1e-28 * scale;
}

// cost[t * (n+1) + j] = SSE of the degree-d fit on (t, j]; +inf if too short.
std::vector<double> segment_cost_table(const Signal& y, int d) {
  const int n = static_cast<int>(y.size());
  std::vector<double> cost(static_cast<std::size_t>(n + 1) * (n + 1), kInf);
  detail::GivensAccumulator acc(d);
  for (int j = 1; j <= n; ++j) {
    acc.reset();
    for (int t = j - 1; t >= 0; --t) {
      acc.add(static_cast<double>(j - t - 1) / n, y(t));
      if (j - t >= d + 1) cost[static_cast<std::size_t>(t) * (n + 1) + j] = acc.sse();
    }
  }
  return cost;
}

struct DpTable {
  int n;
  int kmax;
  std::vector<double> b;    // b[m*(n+1)+j], best SSE of (0, j] with at most m pieces
  std::vector<int> arg;     // last split, or -1 when inherited from m-1
  double at(int m, int j) const { return b[static_cast<std::size_t>(m) * (n + 1) + j]; }
};

DpTable run_dp(const Signal& y, int d, int kmax) {
  const int n = static_cast<int>(y.size());
  if (n < d + 1) throw InfeasibleSegmentError("n < d+1: no feasible segmentation");
  DpTable t{n, kmax, std::vector<double>(static_cast<std::size_t>(kmax + 1) * (n + 1), kInf),
            std::vector<int>(static_cast<std::size_t>(kmax + 1) * (n + 1), -1)};
  auto idx = [n](int m, int j) { return static_cast<std::size_t>(m) * (n + 1) + j; };
  for (int m = 0; m <= kmax; ++m) t.b[idx(m, 0)] = 0.0;
  std::vector<double> split(kmax + 1);
  std::vector<int> split_arg(kmax + 1);
  detail::GivensAccumulator acc(d);
  for (int j = 1; j <= n; ++j) {
    std::fill(split.begin(), split.end(), kInf);
    std::fill(split_arg.begin(), split_arg.end(), -1);
    acc.reset();
    double mean = 0.0, m2 = 0.0;
    for (int s = j - 1; s >= 0; --s) {
      double c;
      if (d == 0) {
        // Welford update; identical to the Givens recursion for one column.
        const int cnt = j - s;
        const double delta = y(s) - mean;
        mean += delta / cnt;
        m2 += delta * (y(s) - mean);
        c = m2;
      } else {
        acc.add(static_cast<double>(j - s - 1) / n, y(s));
        c = acc.sse();
      }
      if (j - s < d + 1) continue;
      for (int m = 1; m <= kmax; ++m) {
        const double prev = t.b[idx(m - 1, s)];
        if (prev == kInf) continue;
        const double cand = prev + c;
        if (cand <= split[m]) {
          split[m] = cand;
          split_arg[m] = s;
        }
      }
    }
    for (int m = 1; m <= kmax; ++m) {
      const double inherit = t.b[idx(m - 1, j)];
      if (split[m] < inherit) {
        t.b[idx(m, j)] = split[m];
        t.arg[idx(m, j)] = split_arg[m];
      } else {
        t.b[idx(m, j)] = inherit;
        t.arg[idx(m, j)] = -1;
      }
    }
  }
  return t;
}

std::vector<int> backtrack(const DpTable& t, int k) {
  std::vector<int> kv{t.n};
  int j = t.n;
  int m = k;
  while (j > 0) {
    const int a = t.arg[static_cast<std::size_t>(m) * (t.n + 1) + j];
    if (a < 0) {
      --m;
      continue;
    }
    kv.push_back(a);
    j = a;
    --m;
  }
  std::reverse(kv.begin(), kv.end());
  return kv;
}

FitResult assemble(const Signal& y, const ModelParams& params, const KnotVector& knots, int k) {
  FitResult r = fit_given_knots(y, params, knots);
  r.k_selected = k;
  return r;
}

}  // namespace

SegmentFit segment_cost(const Eigen::Ref<const Eigen::VectorXd>& y, int d, int n_scale) {
  const int len = static_cast<int>(y.size());
  const auto f = detail::fit_local_polynomial(y, d, n_scale > 0 ? n_scale : len);
  return SegmentFit{f.sse, f.coeffs};
}

FitResult fit_given_knots(const Signal& y, const ModelParams& params, const KnotVector& knots) {
  const int n = params.n();
  const int d = params.d();
  if (y.size() != n) throw ParameterError("observation length differs from n");
  if (knots.n() != n || knots.degree() != d) throw ParameterError("knot vector does not match parameters");
  if (params.d0() == -1) {
    std::vector<Eigen::VectorXd> coeffs(static_cast<std::size_t>(knots.pieces()));
    Signal theta(n);
    double sse = 0.0;
    for (int p = 0; p < knots.pieces(); ++p) {
      if (knots.piece_empty(p)) continue;
      const int len = knots[p + 1] - knots[p];
      const auto f = detail::fit_local_polynomial(y.segment(knots[p], len), d, n);
      coeffs[p] = f.coeffs;
      theta.segment(knots[p], len) = f.fitted;
      sse += f.sse;
    }
    return FitResult{theta, knots, PiecewiseSpline(knots, std::move(coeffs)), sse, knots.pieces()};
  }
  const auto pf = detail::project_onto_columns(y, basis_matrix(params, knots));
  PiecewiseSpline spline = spline_from_global(d, params.d0(), knots, pf.global);
  const double sse = (y - pf.fitted).squaredNorm();
  return FitResult{pf.fitted, knots, std::move(spline), sse, knots.pieces()};
}

std::vector<double> dp_sse_path(const Signal& y, int d, int k_max) {
  const DpTable t = run_dp(y, d, k_max);
  std::vector<double> out;
  for (int m = 1; m <= k_max; ++m) out.push_back(t.at(m, t.n));
  return out;
}

FitResult dp_fit(const Signal& y, const ModelParams& params) {
  if (params.d0() != -1) throw ParameterError("dp_fit requires d0 = -1");
  if (y.size() != params.n()) throw ParameterError("observation length differs from n");
  const DpTable t = run_dp(y, params.d(), params.k());
  const auto kv = backtrack(t, params.k());
  const KnotVector knots = KnotVector::validate(kv, params.d(), params.n()).padded(params.k());
  return assemble(y, params, knots, params.k());
}

double count_configurations(int n, int d, int k) {
  double total = 0.0;
  for (int m = 0; m < k; ++m) {
    const long rest = static_cast<long>(n) - static_cast<long>(m + 1) * (d + 1);
    if (rest < 0) break;
    // Compositions of n into m+1 parts, each at least d+1.
    double c = 1.0;
    for (int i = 1; i <= m; ++i) c = c * static_cast<double>(rest + i) / i;
    total += c;
  }
  return total;
}

void for_each_configuration(int n, int d, int k, const std::function<void(const std::vector<int>&)>& fn) {
  const int g = d + 1;
  std::vector<int> inner;
  // Recursive fill of exactly m knots after position `last`.
  std::function<void(int, int)> rec = [&](int last, int remaining) {
    if (remaining == 0) {
      if (n - last >= g) fn(inner);
      return;
    }
    const int hi = n - g * remaining;
    for (int t = last + g; t <= hi; ++t) {
      inner.push_back(t);
      rec(t, remaining - 1);
      inner.pop_back();
    }
  };
  if (n < g) return;
  for (int m = 0; m < k; ++m) {
    if (n < g * (m + 1)) break;
    rec(0, m);
  }
}

KnotVector knots_from_inner(const std::vector<int>& inner, int d, int n, int k) {
  std::vector<int> kv;
  kv.reserve(inner.size() + 2);
  kv.push_back(0);
  kv.insert(kv.end(), inner.begin(), inner.end());
  kv.push_back(n);
  return KnotVector::validate(std::move(kv), d, n).padded(k);
}

FitResult exhaustive_fit(const Signal& y, const ModelParams& params, double budget) {
  const int n = params.n();
  const int d = params.d();
  if (y.size() != n) throw ParameterError("observation length differs from n");
  const double count = count_configurations(n, d, params.k());
  if (count > budget) throw BudgetExceededError(count, budget);

  const double scale = std::max(y.squaredNorm(), std::numeric_limits<double>::min());
  std::vector<int> best_inner;
  double best = kInf;
  if (params.d0() == -1) {
    const auto cost = segment_cost_table(y, d);
    for_each_configuration(n, d, params.k(), [&](const std::vector<int>& inner) {
      double s = 0.0;
      int prev = 0;
      for (int t : inner) {
        s += cost[static_cast<std::size_t>(prev) * (n + 1) + t];
        prev = t;
      }
      s += cost[static_cast<std::size_t>(prev) * (n + 1) + n];
      if (best == kInf || strictly_better(s, best, scale)) {
        best = s;
        best_inner = inner;
      }
    });
  } else {
    for_each_configuration(n, d, params.k(), [&](const std::vector<int>& inner) {
      const KnotVector kv = knots_from_inner(inner, d, n, static_cast<int>(inner.size()) + 1);
      const auto pf = detail::project_onto_columns(y, basis_matrix(params, kv));
      const double s = (y - pf.fitted).squaredNorm();
      if (best == kInf || strictly_better(s, best, scale)) {
        best = s;
        best_inner = inner;
      }
    });
  }
  if (best == kInf) throw InfeasibleSegmentError("no valid knot configuration");
  return assemble(y, params, knots_from_inner(best_inner, d, n, params.k()), params.k());
}

double penalty(int k, const PenaltySpec& spec) {
  if (k < 1) throw ParameterError("penalty requires k >= 1");
  const int k0 = transition_boundary(spec.d, spec.d0);
  const double base = spec.tau * spec.sigma * spec.sigma;
  const double n = spec.n;
  if (k == 1) return base;
  if (k <= k0) return base * k * std::log(std::log(16.0 * n / k));
  return base * k * std::log(std::exp(1.0) * n / k);
}

int default_k_max(int d, int d0, int n) {
  return std::max(1, std::min(transition_boundary(d, d0) + 3, n / (d + 1)));
}

AdaptiveFit adaptive_fit(const Signal& y, const ModelParams& params, const PenaltySpec& spec, int k_max,
                         double budget) {
  if (k_max < 1) throw ParameterError("k_max must be >= 1");
  const int n = params.n();
  const int d = params.d();
  const int d0 = params.d0();
  std::vector<SelectionStep> trace;
  std::vector<double> sse;
  std::vector<FitResult> fits;
  if (d0 == -1) {
    sse = dp_sse_path(y, d, k_max);
  } else {
    for (int k = 1; k <= k_max; ++k) {
      fits.push_back(exhaustive_fit(y, ModelParams(d, d0, k, n), budget));
      sse.push_back(fits.back().sse);
    }
  }
  int k_hat = 1;
  double best = kInf;
  for (int k = 1; k <= k_max; ++k) {
    const double pen = penalty(k, spec);
    const double obj = sse[k - 1] + pen;
    trace.push_back(SelectionStep{k, sse[k - 1], pen, obj});
    if (obj < best) {
      best = obj;
      k_hat = k;
    }
  }
  FitResult fit = d0 == -1 ? dp_fit(y, ModelParams(d, d0, k_hat, n)) : fits[k_hat - 1];
  return AdaptiveFit{std::move(fit), std::move(trace)};
}

double estimate_sigma(const Signal& y) {
  if (y.size() < 2) throw ParameterError("sigma estimate needs at least two observations");
  std::vector<double> diffs(static_cast<std::size_t>(y.size() - 1));
  for (Eigen::Index i = 0; i + 1 < y.size(); ++i) diffs[i] = std::abs(y(i + 1) - y(i));
  const std::size_t mid = diffs.size() / 2;
  std::nth_element(diffs.begin(), diffs.begin() + mid, diffs.end());
  double med = diffs[mid];
  if (diffs.size() % 2 == 0) {
    const double lo = *std::max_element(diffs.begin(), diffs.begin() + mid);
    med = 0.5 * (med + lo);
  }
  return med / (std::sqrt(2.0) * 0.6745);
}

}  // namespace freeknot
