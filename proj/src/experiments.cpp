#include "freeknot/experiments.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <string>

#include <Eigen/Cholesky>

#include "freeknot/errors.hpp"
#include "freeknot/rng.hpp"
#include "freeknot/shape_restricted.hpp"
#include "poly_fit.hpp"

namespace freeknot {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// Max-DP over segmentations with at most k pieces of length >= d+1; each
// segment contributes the squared norm of eps projected onto degree-d
// polynomials on it.
double width_dp(const Signal& eps, int d, int k) {
  const int n = static_cast<int>(eps.size());
  const int g = d + 1;
  std::vector<std::vector<double>> f(static_cast<std::size_t>(k + 1),
                                     std::vector<double>(static_cast<std::size_t>(n + 1), kNegInf));
  f[0][0] = 0.0;
  if (d == 0) {
    std::vector<double> s(static_cast<std::size_t>(n + 1), 0.0);
    std::vector<double> inv(static_cast<std::size_t>(n + 1), 0.0);
    for (int i = 1; i <= n; ++i) {
      s[i] = s[i - 1] + eps(i - 1);
      inv[i] = 1.0 / i;
    }
    for (int j = 1; j <= n; ++j) f[1][j] = s[j] * s[j] * inv[j];
    for (int m = 2; m <= k; ++m) {
      const std::vector<double>& prev = f[m - 1];
      std::vector<double>& cur = f[m];
      const int jlo = m == k ? n : 1;
      for (int j = jlo; j <= n; ++j) {
        double best = prev[j];
        const double sj = s[j];
        for (int a = 1; a < j; ++a) {
          const double diff = sj - s[a];
          const double v = prev[a] + diff * diff * inv[j - a];
          best = v > best ? v : best;
        }
        cur[j] = best;
      }
    }
    return f[k][n];
  }
  detail::GivensAccumulator acc(d);
  for (int j = 1; j <= n; ++j) {
    std::vector<double> split(static_cast<std::size_t>(k + 1), kNegInf);
    acc.reset();
    for (int a = j - 1; a >= 0; --a) {
      acc.add(static_cast<double>(j - a - 1) / n, eps(a));
      if (j - a < g) continue;
      const double p = acc.projected();
      for (int m = 1; m <= k; ++m) {
        if (f[m - 1][a] == kNegInf) continue;
        split[m] = std::max(split[m], f[m - 1][a] + p);
      }
    }
    for (int m = 1; m <= k; ++m) f[m][j] = std::max(f[m - 1][j], split[m]);
  }
  return f[k][n];
}

// Enumerates knot configurations; Gram entries of the integer-scaled truncated
// powers (i - t)_+^l come from power sums, so each configuration costs O(p^3).
double width_enumerate(const Signal& eps, int d, int d0, int k, double budget) {
  const int n = static_cast<int>(eps.size());
  const double count = count_configurations(n, d, k);
  if (count > budget) throw BudgetExceededError(count, budget);
  // w[r][L] = sum_{u=1}^{L} u^r
  std::vector<std::vector<double>> w(static_cast<std::size_t>(2 * d + 1),
                                     std::vector<double>(static_cast<std::size_t>(n + 1), 0.0));
  for (int u = 1; u <= n; ++u) {
    double p = 1.0;
    for (int r = 0; r <= 2 * d; ++r) {
      w[r][u] = w[r][u - 1] + p;
      p *= u;
    }
  }
  // e[t][l] = sum_{i > t} eps_i (i - t)^l
  std::vector<std::vector<double>> e(static_cast<std::size_t>(n + 1), std::vector<double>(static_cast<std::size_t>(d + 1), 0.0));
  for (int t = n; t >= 1; --t) {
    for (int l = 0; l <= d; ++l) {
      double v = eps(t - 1);
      for (int m = 0; m <= l; ++m) v += binomial(l, m) * e[t][m];
      e[t - 1][l] = v;
    }
  }
  double best = 0.0;
  std::vector<std::pair<int, int>> cols;
  for_each_configuration(n, d, k, [&](const std::vector<int>& inner) {
    cols.clear();
    for (int l = 0; l <= d; ++l) cols.emplace_back(0, l);
    for (int t : inner)
      for (int l = d0 + 1; l <= d; ++l) cols.emplace_back(t, l);
    const int p = static_cast<int>(cols.size());
    Eigen::MatrixXd gram(p, p);
    Eigen::VectorXd rhs(p);
    for (int x = 0; x < p; ++x) {
      rhs(x) = e[cols[x].first][cols[x].second];
      for (int y = 0; y <= x; ++y) {
        // s <= t; sum_{u=1}^{n-t} u^a (u + t - s)^b
        auto [t, a] = cols[x];
        auto [s, b] = cols[y];
        if (s > t) {
          std::swap(t, s);
          std::swap(a, b);
        }
        double v = 0.0;
        double shift = 1.0;
        for (int m = b; m >= 0; --m) {
          v += binomial(b, m) * shift * w[a + m][n - t];
          shift *= (t - s);
        }
        gram(x, y) = v;
        gram(y, x) = v;
      }
    }
    const Eigen::VectorXd scale = gram.diagonal().cwiseSqrt().cwiseInverse();
    const Eigen::MatrixXd gs = scale.asDiagonal() * gram * scale.asDiagonal();
    const Eigen::VectorXd rs = scale.cwiseProduct(rhs);
    const Eigen::LDLT<Eigen::MatrixXd> ldlt(gs);
    const double proj = rs.dot(ldlt.solve(rs));
    best = std::max(best, proj);
  });
  return best;
}

int floor_log2(long long v) {
  int r = -1;
  while (v > 0) {
    v >>= 1;
    ++r;
  }
  return r;
}

double loglog16(double n, double k) { return std::log(std::log(16.0 * n / k)); }

struct Moments {
  double sum = 0.0;
  double sumsq = 0.0;
  int count = 0;
  void add(double v) {
    sum += v;
    sumsq += v * v;
    ++count;
  }
  double mean() const { return sum / count; }
  double std_error() const {
    if (count < 2) return 0.0;
    const double m = mean();
    const double var = std::max(0.0, (sumsq - count * m * m) / (count - 1));
    return std::sqrt(var / count);
  }
};

void write_double(std::ostream& os, double v) {
  if (std::isnan(v)) {
    os << "nan";
  } else {
    os << std::setprecision(12) << v;
  }
}

}  // namespace

Signal simulate(const Signal& theta0, double sigma, std::uint64_t seed, std::uint64_t replicate) {
  if (!(sigma >= 0.0)) throw ParameterError("sigma must be >= 0");
  const int n = static_cast<int>(theta0.size());
  if (sigma == 0.0) return theta0;
  return theta0 + sigma * standard_normal_vector(seed, replicate, n);
}

double lil_statistic(const Signal& eps, int d) {
  const int n = static_cast<int>(eps.size());
  if (n < 2) throw PreconditionError("lil statistic needs n >= 2");
  if (d < 0) throw ParameterError("degree d must be >= 0");
  std::vector<double> pw(static_cast<std::size_t>(n + 1)), ipw(static_cast<std::size_t>(n + 1)),
      isq(static_cast<std::size_t>(n + 1));
  for (int m = 1; m <= n; ++m) {
    pw[m] = std::pow(static_cast<double>(m), d);
    ipw[m] = 1.0 / pw[m];
    isq[m] = 1.0 / std::sqrt(static_cast<double>(m));
  }
  const double* e = eps.data();
  double best = 0.0;
  for (int n1 = 1; n1 < n; ++n1) {
    double s = 0.0;
    // n2 <= n - n1: the cap is sqrt(n2); afterwards it is sqrt(n - n1).
    int n2 = n1 + 1;
    for (; n2 <= n - n1; ++n2) {
      const int len = n2 - n1;
      s += pw[len] * e[n2 - 1];
      best = std::max(best, std::abs(s) * ipw[len] * isq[n2]);
    }
    const double tail = isq[n - n1];
    for (; n2 <= n; ++n2) {
      const int len = n2 - n1;
      s += pw[len] * e[n2 - 1];
      best = std::max(best, std::abs(s) * ipw[len] * tail);
    }
  }
  return best;
}

double complexity_width(const Signal& eps, const ModelParams& params, double budget) {
  if (eps.size() != params.n()) throw ParameterError("noise length differs from n");
  if (params.d0() == -1) return width_dp(eps, params.d(), params.k());
  return width_enumerate(eps, params.d(), params.d0(), params.k(), budget);
}

double complexity_width_enumerated(const Signal& eps, const ModelParams& params, double budget) {
  if (eps.size() != params.n()) throw ParameterError("noise length differs from n");
  return width_enumerate(eps, params.d(), params.d0(), params.k(), budget);
}

int lf_levels(int n, int d) {
  if (d < 0) throw ParameterError("degree d must be >= 0");
  if (n < d + 1) throw ParameterError("n must be >= d+1");
  return floor_log2(n / (d + 1));
}

Signal least_favorable_signal(int n, int d, int ell, double c_scale) {
  const int m = lf_levels(n, d);
  if (ell < 1 || ell > m) {
    throw ParameterError("level must lie in [1, " + std::to_string(m) + "], got " + std::to_string(ell));
  }
  const long long two_l = 1LL << ell;
  const int tau = n - static_cast<int>((n + two_l - 1) / two_l);
  const double alpha = c_scale * std::pow(static_cast<double>(two_l), (2.0 * d + 1.0) / 2.0) *
                       std::sqrt(std::log(std::log(16.0 * n)) / n);
  Signal theta = Signal::Zero(n);
  for (int i = tau + 1; i <= n; ++i) theta(i - 1) = alpha * std::pow(static_cast<double>(i - tau) / n, d);
  return theta;
}

int shaped_levels(int n, int k) {
  if (k < 3 || k % 3 != 0) throw ParameterError("k must be a positive multiple of 3");
  const int kt = k / 3;
  if (n < 4 * kt) throw ParameterError("n must be >= 4k/3");
  return floor_log2(n / (2 * kt));
}

Signal shaped_lf_ensemble(int n, int k, const std::vector<int>& index_vector, double c_scale) {
  const int l0 = shaped_levels(n, k);
  const int kt = k / 3;
  if (n % kt != 0) throw PreconditionError("n must be divisible by k/3");
  if (static_cast<int>(index_vector.size()) != kt) {
    throw ParameterError("index vector needs k/3 = " + std::to_string(kt) + " entries");
  }
  for (int v : index_vector) {
    if (v < 1 || v > l0 + 1) {
      throw ParameterError("index entries must lie in [1, " + std::to_string(l0) + "] or equal " +
                           std::to_string(l0 + 1) + " for the reference");
    }
  }
  const int len = n / kt;
  auto knot = [&](int l) {
    const long long p = 1LL << (l - 1);
    return len - static_cast<int>((len + p - 1) / p);
  };
  auto slope = [&](int l) {
    return c_scale * std::pow(std::ldexp(1.0, l - 1), 1.5) * std::sqrt(std::log(std::log(16.0 * n / k)) / n) / n;
  };
  const int t_ref = knot(l0 + 1);
  const double a_ref = slope(l0 + 1);
  auto ref = [&](int u) { return u > t_ref ? a_ref * (u - t_ref) : 0.0; };

  Signal theta(n);
  double ext_value = 0.0;
  double ext_slope = 0.0;
  for (int j = 0; j < kt; ++j) {
    const int l = index_vector[j];
    std::vector<double> f(static_cast<std::size_t>(len + 1), 0.0);
    if (l == l0 + 1) {
      for (int u = 0; u <= len; ++u) f[u] = ref(u);
    } else {
      const int t = knot(l);
      const double a = slope(l);
      int g = t;
      for (int u = t; u <= len; ++u)
        if (a * (u - t) >= ref(u)) g = u;
      const double top = ref(g);
      for (int u = 0; u <= len; ++u) {
        if (u <= t) {
          f[u] = 0.0;
        } else if (u <= g) {
          f[u] = top * (u - t) / (g - t);
        } else {
          f[u] = ref(u);
        }
      }
    }
    for (int u = 1; u <= len; ++u) theta(j * len + u - 1) = ext_value + ext_slope * u + f[u];
    ext_value += ext_slope * len + ref(len);
    ext_slope += a_ref;
  }
  return theta;
}

std::vector<std::vector<int>> sample_index_vectors(int n, int k, int count, std::uint64_t seed) {
  const int l0 = shaped_levels(n, k);
  std::vector<std::vector<int>> out;
  for (int c = 0; c < count; ++c) {
    auto eng = make_engine(seed, static_cast<std::uint64_t>(c));
    std::uniform_int_distribution<int> pick(1, l0);
    std::vector<int> v(static_cast<std::size_t>(k / 3));
    for (int& x : v) x = pick(eng);
    out.push_back(std::move(v));
  }
  return out;
}

Signal sparse_boxcar(int n, double scale) {
  if (n < 2) throw ParameterError("boxcar needs n >= 2");
  const int m = (n + 7) / 8;
  Signal theta = Signal::Zero(n);
  theta.tail(m).setConstant(scale / std::sqrt(static_cast<double>(m)));
  return theta;
}

SignalKind parse_signal_kind(const std::string& s) {
  if (s == "zero") return SignalKind::zero;
  if (s == "lf_spline") return SignalKind::lf_spline;
  if (s == "sparse_boxcar") return SignalKind::sparse_boxcar;
  if (s == "shaped_lf") return SignalKind::shaped_lf;
  if (s == "custom_file") return SignalKind::custom_file;
  throw ParameterError("unknown signal kind '" + s + "'");
}

Estimator parse_estimator(const std::string& s) {
  if (s == "l0_fit") return Estimator::l0_fit;
  if (s == "adaptive") return Estimator::adaptive;
  if (s == "shape_lse") return Estimator::shape_lse;
  throw ParameterError("unknown estimator '" + s + "'");
}

std::string to_string(SignalKind s) {
  switch (s) {
    case SignalKind::zero: return "zero";
    case SignalKind::lf_spline: return "lf_spline";
    case SignalKind::sparse_boxcar: return "sparse_boxcar";
    case SignalKind::shaped_lf: return "shaped_lf";
    case SignalKind::custom_file: return "custom_file";
  }
  return "";
}

std::string to_string(Estimator e) {
  switch (e) {
    case Estimator::l0_fit: return "l0_fit";
    case Estimator::adaptive: return "adaptive";
    case Estimator::shape_lse: return "shape_lse";
  }
  return "";
}

void ExperimentConfig::validate() const {
  if (n_grid.empty()) throw ParameterError("n grid is empty");
  for (std::size_t i = 1; i < n_grid.size(); ++i)
    if (n_grid[i] <= n_grid[i - 1]) throw ParameterError("n grid must be strictly increasing");
  if (reps < 1) throw ParameterError("reps must be >= 1");
  if (!(sigma >= 0.0)) throw ParameterError("sigma must be >= 0");
  for (int n : n_grid) ModelParams(d, d0, k, n);
  if (signal_kind == SignalKind::custom_file &&
      (n_grid.size() != 1 || n_grid[0] != static_cast<int>(custom.size()))) {
    throw ParameterError("custom signal needs a single-entry n grid equal to its length");
  }
}

Signal make_signal(const ExperimentConfig& config, int n) {
  switch (config.signal_kind) {
    case SignalKind::zero:
      return Signal::Zero(n);
    case SignalKind::lf_spline: {
      const int m = lf_levels(n, config.d);
      const int ell = config.lf_level > 0 ? config.lf_level : (m + 1) / 2;
      return least_favorable_signal(n, config.d, ell, config.scale);
    }
    case SignalKind::sparse_boxcar:
      return sparse_boxcar(n, config.scale);
    case SignalKind::shaped_lf: {
      const int l0 = shaped_levels(n, config.k);
      return shaped_lf_ensemble(n, config.k, std::vector<int>(static_cast<std::size_t>(config.k / 3), l0 + 1),
                                config.scale);
    }
    case SignalKind::custom_file:
      if (config.custom.size() != n) throw ParameterError("custom signal length differs from n");
      return config.custom;
  }
  throw ParameterError("unknown signal kind");
}

double rate_loglog(int n, int k) { return k * loglog16(n, k); }
double rate_log(int n, int k) { return k * std::log(std::exp(1.0) * n / k); }

RiskCurve mc_risk(const ExperimentConfig& config, Estimator estimator) {
  config.validate();
  const int d = config.d;
  const int d0 = config.d0;
  const int k = config.k;
  // Refuse up front rather than per cell.
  for (int n : config.n_grid) {
    double cost = 0.0;
    if (estimator == Estimator::l0_fit && d0 >= 0) cost = count_configurations(n, d, k);
    if (estimator == Estimator::shape_lse) cost = count_configurations(n, d, k) * (k + 1);
    if (cost > config.budget) throw BudgetExceededError(cost, config.budget);
  }
  RiskCurve curve{config, estimator, {}};
  for (int n : config.n_grid) {
    RiskRow row{n, k, 0.0, 0.0, rate_loglog(n, k), rate_log(n, k), false, {}};
    try {
      const Signal theta0 = make_signal(config, n);
      const ModelParams params(d, d0, k, n);
      const int kmax = config.k_max > 0 ? config.k_max : default_k_max(d, d0, n);
      Moments mom;
      for (int r = 0; r < config.reps; ++r) {
        const Signal y = simulate(theta0, config.sigma, config.master_seed, static_cast<std::uint64_t>(r));
        Signal hat;
        switch (estimator) {
          case Estimator::l0_fit:
            hat = d0 == -1 ? dp_fit(y, params).theta_hat : exhaustive_fit(y, params, config.budget).theta_hat;
            break;
          case Estimator::adaptive: {
            const PenaltySpec spec{config.tau, config.sigma, d, d0, n};
            hat = adaptive_fit(y, params, spec, kmax, config.budget).fit.theta_hat;
            break;
          }
          case Estimator::shape_lse:
            hat = shape_lse(y, d, k, config.budget).fit.theta_hat;
            break;
        }
        mom.add((hat - theta0).squaredNorm());
      }
      row.mean_risk = mom.mean();
      row.std_error = mom.std_error();
    } catch (const BudgetExceededError&) {
      throw;
    } catch (const std::exception& e) {
      row.failed = true;
      row.error = e.what();
      row.mean_risk = std::numeric_limits<double>::quiet_NaN();
      row.std_error = std::numeric_limits<double>::quiet_NaN();
    }
    curve.rows.push_back(row);
  }
  return curve;
}

std::vector<CurveRow> lil_curve(const std::vector<int>& n_grid, int d, int reps, std::uint64_t seed) {
  if (reps < 1) throw ParameterError("reps must be >= 1");
  std::vector<CurveRow> out;
  for (int n : n_grid) {
    Moments mom;
    for (int r = 0; r < reps; ++r) {
      const double z = lil_statistic(standard_normal_vector(seed, static_cast<std::uint64_t>(r), n), d);
      mom.add(z * z);
    }
    out.push_back(CurveRow{n, mom.mean(), mom.std_error()});
  }
  return out;
}

std::vector<CurveRow> width_curve(const std::vector<int>& n_grid, int d, int d0, int k, int reps,
                                  std::uint64_t seed, double budget) {
  if (reps < 1) throw ParameterError("reps must be >= 1");
  std::vector<CurveRow> out;
  for (int n : n_grid) {
    const ModelParams params(d, d0, k, n);
    if (d0 >= 0) {
      const double cost = count_configurations(n, d, k);
      if (cost > budget) throw BudgetExceededError(cost, budget);
    }
    Moments mom;
    for (int r = 0; r < reps; ++r)
      mom.add(complexity_width(standard_normal_vector(seed, static_cast<std::uint64_t>(r), n), params, budget));
    out.push_back(CurveRow{n, mom.mean(), mom.std_error()});
  }
  return out;
}

double selection_rate(const Signal& theta0, int d, int d0, int true_k, double sigma, double tau, int reps,
                      std::uint64_t seed, std::uint64_t first) {
  const int n = static_cast<int>(theta0.size());
  const ModelParams params(d, d0, 1, n);
  const PenaltySpec spec{tau, sigma, d, d0, n};
  const int kmax = default_k_max(d, d0, n);
  int hits = 0;
  for (int r = 0; r < reps; ++r) {
    const Signal y = simulate(theta0, sigma, seed, first + static_cast<std::uint64_t>(r));
    if (adaptive_fit(y, params, spec, kmax).fit.k_selected == true_k) ++hits;
  }
  return static_cast<double>(hits) / reps;
}

Calibration calibrate_tau(const Signal& theta0, int d, int d0, int true_k, double sigma, int reps,
                          std::uint64_t seed, const std::vector<double>& grid) {
  if (grid.empty()) throw ParameterError("tau grid is empty");
  std::vector<double> rates;
  for (double t : grid) rates.push_back(selection_rate(theta0, d, d0, true_k, sigma, t, reps, seed, 0));
  const double top = *std::max_element(rates.begin(), rates.end());
  std::vector<double> best;
  for (std::size_t i = 0; i < grid.size(); ++i)
    if (rates[i] == top) best.push_back(grid[i]);
  std::string desc;
  for (double t : grid) desc += (desc.empty() ? "" : ",") + std::to_string(t);
  return Calibration{"tau = median of grid values with the highest selection rate", best[(best.size() - 1) / 2],
                     seed, reps, "tau in {" + desc + "}"};
}

void write_risk_csv(std::ostream& os, const RiskCurve& curve) {
  const auto& c = curve.config;
  os << "n,k,d,d0,estimator,mean_risk,std_error,rate_loglog,rate_log,reps,seed\n";
  for (const auto& r : curve.rows) {
    os << r.n << ',' << r.k << ',' << c.d << ',' << c.d0 << ',' << to_string(curve.estimator) << ',';
    write_double(os, r.mean_risk);
    os << ',';
    write_double(os, r.std_error);
    os << ',';
    write_double(os, r.rate_loglog);
    os << ',';
    write_double(os, r.rate_log);
    os << ',' << c.reps << ',' << c.master_seed << '\n';
  }
}

void write_lil_csv(std::ostream& os, const std::vector<CurveRow>& rows, int d, int reps, std::uint64_t seed) {
  os << "n,d,mean_Z2,std_error,loglog16n,reps,seed\n";
  for (const auto& r : rows) {
    os << r.n << ',' << d << ',';
    write_double(os, r.mean);
    os << ',';
    write_double(os, r.std_error);
    os << ',';
    write_double(os, loglog16(r.n, 1));
    os << ',' << reps << ',' << seed << '\n';
  }
}

void write_width_csv(std::ostream& os, const std::vector<CurveRow>& rows, int k, int d, int d0, int reps,
                     std::uint64_t seed) {
  os << "n,k,d,d0,mean_width,std_error,loglog16n,log_en,reps,seed\n";
  for (const auto& r : rows) {
    os << r.n << ',' << k << ',' << d << ',' << d0 << ',';
    write_double(os, r.mean);
    os << ',';
    write_double(os, r.std_error);
    os << ',';
    write_double(os, loglog16(r.n, 1));
    os << ',';
    write_double(os, std::log(std::exp(1.0) * r.n));
    os << ',' << reps << ',' << seed << '\n';
  }
}

}  // namespace freeknot
