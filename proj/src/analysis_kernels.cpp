#include "freeknot/analysis_kernels.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "freeknot/errors.hpp"
#include "freeknot/rng.hpp"
#include "freeknot/shape_restricted.hpp"

namespace freeknot {

namespace {

double rising(int m, int len) {
  double r = 1.0;
  for (int t = 0; t < len; ++t) r *= (m + t);
  return r;
}

double falling(int m, int len) {
  double r = 1.0;
  for (int t = 0; t < len; ++t) r *= (m - t);
  return r;
}

Rational rpow(const Rational& x, int e) {
  Rational r = 1;
  for (int t = 0; t < e; ++t) r *= x;
  return r;
}

// Streams used by test ensembles start here so they never overlap calibration.
constexpr std::uint64_t kTestStreamBase = 1u << 20;

}  // namespace

double BetaTable::gap(int a, int b) const {
  return static_cast<double>(knots[a] - knots[b]) / knots.back();
}

BetaTable beta_table(int d, int d0, const KnotVector& knots) {
  const int k0 = transition_boundary(d, d0);
  if (knots.pieces() != k0) {
    throw ParameterError("beta table needs a k0-piece configuration (k0=" + std::to_string(k0) + ")");
  }
  if (knots.degree() != d) throw ParameterError("knot vector degree differs from d");
  const int q = d - d0;
  const int smax = (d0 + 1) / q;
  const int jmax = smax * q;
  BetaTable t{d, d0, k0, smax, knots.values(), {}, Eigen::MatrixXd::Zero(d + 1, jmax + 1), {}};
  t.beta.assign(static_cast<std::size_t>(smax + 1), std::vector<double>(static_cast<std::size_t>(jmax + 1), 0.0));
  t.beta[0][0] = 1.0;
  for (int s = 1; s <= smax; ++s) {
    const double g = t.gap(k0 - s, k0 - 1 - s);
    for (int j = 0; j <= s * q; ++j) {
      double v = 0.0;
      for (int l = 0; l <= std::min(j, (s - 1) * q); ++l)
        v += binomial(s * q - l, j - l) * std::pow(g, j - l) * t.beta[s - 1][l];
      t.beta[s][j] = v;
    }
  }
  for (int i = 1; i <= d + 1; ++i) {
    for (int j = 0; j <= jmax; ++j) {
      const double den = falling(d + 1 - i, j);
      t.dfactor(i - 1, j) = den == 0.0 ? 0.0 : rising(i, j) / den;
    }
  }
  for (int s = 0; s <= smax; ++s) {
    Eigen::MatrixXd c = Eigen::MatrixXd::Zero(d + 1, jmax + 1);
    for (int i = 1; i <= t.imax(s); ++i)
      for (int j = 0; j <= s * q; ++j) c(i - 1, j) = t.dfactor(i - 1, j) * t.beta[s][j];
    t.combined.push_back(std::move(c));
  }
  return t;
}

RatioCheck beta_ratio_check(const BetaTable& t, int s, int i, int j1, int j2) {
  const int q = t.d - t.d0;
  if (s < 1 || s > t.smax) throw ParameterError("s out of range for the beta table");
  if (i < 1 || i > t.imax(s)) throw ParameterError("i out of range for the beta table");
  if (j1 < 0 || j1 > j2 || j2 > s * q) throw ParameterError("need 0 <= j1 <= j2 <= s(d-d0)");
  const double den = t.combined[s](i - 1, j1);
  if (den == 0.0) throw DegenerateKnotError("beta entry in the denominator is zero");
  const double lhs = t.combined[s](i - 1, j2) / den;

  const int k0 = t.k0;
  auto span = [&](int l) { return t.gap(k0 - l, k0 - 1 - s); };
  double total = 1.0;
  for (int l = 1; l <= s; ++l) total *= std::pow(span(l), q);
  const int fl = j1 / q;
  double low = 1.0;
  for (int l = 1; l <= fl; ++l) low *= std::pow(span(l), q);
  low *= std::pow(span(1 + fl), j1 % q);
  const int cl = (j2 + q - 1) / q;
  double high = 1.0;
  for (int l = cl + 1; l <= s; ++l) high *= std::pow(span(l), q);
  high *= std::pow(span(cl), (q - j2 % q) % q);
  if (low == 0.0 || high == 0.0) throw DegenerateKnotError("zero knot span in the ratio bound");
  return RatioCheck{lhs, total / (low * high)};
}

double quad_form_residuals(const PiecewiseSpline& theta, int d0, int s, double norm_tol) {
  const int d = theta.degree();
  const int k0 = transition_boundary(d, d0);
  const auto& kn = theta.knots();
  const int n = kn.n();
  if (kn.pieces() != k0 || kn.nonempty_pieces() != k0) {
    throw PreconditionError("quadratic form needs k0 nonempty pieces");
  }
  const double norm = evaluate_spline(theta).norm();
  if (std::abs(norm - 1.0) > norm_tol) throw PreconditionError("quadratic form needs a unit-norm spline");
  int middle = 0;
  for (int p = 1; p + 1 < k0; ++p) middle = std::max(middle, kn[p + 1] - kn[p]);
  if (kn[1] - kn[0] < middle || kn[k0] - kn[k0 - 1] < middle) {
    throw PreconditionError("first and last pieces must be at least as long as every middle piece");
  }
  const BetaTable t = beta_table(d, d0, kn);
  if (s < 0 || s > t.smax) throw ParameterError("s out of range");
  const int q = d - d0;
  const Eigen::VectorXd& a = theta.piece(k0 - 1 - s);
  const double tail = static_cast<double>(n - kn[k0 - 1]);
  double value = 0.0;
  for (int i = 1; i <= t.imax(s); ++i) {
    double inner = 0.0;
    for (int j = 0; j <= s * q; ++j) inner += t.combined[s](i - 1, j) * a(i + j - 1);
    value += std::pow(tail, 2 * i - 1) / std::pow(static_cast<double>(n), 2 * (i - 1)) * inner * inner;
  }
  return value;
}

Eigen::MatrixXd moment_matrix(int m, int d) {
  if (m <= d) throw PreconditionError("moment matrix needs m >= d+1");
  std::vector<double> pw(static_cast<std::size_t>(2 * d + 1), 0.0);
  for (int k = 1; k <= m; ++k) {
    const double u = static_cast<double>(k) / m;
    double p = 1.0;
    for (int r = 0; r <= 2 * d; ++r) {
      pw[r] += p;
      p *= u;
    }
  }
  Eigen::MatrixXd a(d + 1, d + 1);
  for (int i = 0; i <= d; ++i)
    for (int j = 0; j <= d; ++j) a(i, j) = pw[i + j] / m;
  return a;
}

double moment_matrix_lambda_min(int m, int d) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(moment_matrix(m, d), Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

BigInt binomial_identity_check(int n, const std::vector<BigInt>& poly) {
  int deg = -1;
  for (int i = 0; i < static_cast<int>(poly.size()); ++i)
    if (poly[i] != 0) deg = i;
  if (deg >= n) throw PreconditionError("identity only holds for deg P < n");
  BigInt total = 0;
  BigInt binom = 1;
  for (int j = 0; j <= n; ++j) {
    BigInt pj = 0;
    for (int i = deg; i >= 0; --i) pj = pj * j + poly[i];
    total += (j % 2 == 0 ? 1 : -1) * binom * pj;
    binom = binom * (n - j) / (j + 1);
  }
  return total;
}

DofResult dof_min_pieces(int d, int d0) {
  const int k0 = transition_boundary(d, d0);
  int k = 1;
  while ((k - 2) * (d + 1) < (k - 1) * (d0 + 1) + 1) ++k;
  return DofResult{k, k0 + 1};
}

SparseSystem sparse_construct(int d, int d0, int k, int n) {
  transition_boundary(d, d0);
  if (k < 2) throw ParameterError("sparse construction needs k >= 2");
  const int mid = k - 2;
  if (n == 0) {
    const int step = 3 * std::max(mid, 1);
    const int need = std::max(step * (d + 1), 60);
    n = (need + step - 1) / step * step;
  }
  if (n % (3 * std::max(mid, 1)) != 0 || n / (3 * std::max(mid, 1)) < d + 1) {
    throw ParameterError("n must be a multiple of 3(k-2) with middle pieces of at least d+1 points");
  }
  SparseSystem out{d, d0, k, n, {}, {}, 0, {}, {}, false, Signal::Zero(n), false, 0.0};
  out.tau.push_back(0);
  if (mid == 0) {
    out.tau.push_back(Rational(1, 3));
  } else {
    for (int j = 1; j <= k - 1; ++j) out.tau.push_back(Rational(1, 3) + Rational(j - 1, 3 * mid));
  }
  out.tau.push_back(1);

  const int q = d - d0;
  const int cols = mid * q;
  const Rational tend = out.tau[k - 1];
  out.matrix.assign(static_cast<std::size_t>(d0 + 1), std::vector<Rational>(static_cast<std::size_t>(cols), 0));
  for (int r = 0; r <= d0; ++r) {
    for (int j = 1; j <= mid; ++j) {
      for (int l = d0 + 1; l <= d; ++l) {
        Rational f = 1;
        for (int t = 0; t < r; ++t) f *= (l - t);
        out.matrix[r][(j - 1) * q + (l - d0 - 1)] = f * rpow(tend - out.tau[j], l - r);
      }
    }
  }

  // Reduced row echelon form over the rationals.
  std::vector<std::vector<Rational>> m = out.matrix;
  std::vector<int> pivots;
  int row = 0;
  for (int c = 0; c < cols && row < d0 + 1; ++c) {
    int pr = -1;
    for (int r = row; r < d0 + 1; ++r)
      if (m[r][c] != 0) {
        pr = r;
        break;
      }
    if (pr < 0) continue;
    std::swap(m[row], m[pr]);
    const Rational inv = 1 / m[row][c];
    for (auto& v : m[row]) v *= inv;
    for (int r = 0; r < d0 + 1; ++r) {
      if (r == row || m[r][c] == 0) continue;
      const Rational f = m[r][c];
      for (int cc = 0; cc < cols; ++cc) m[r][cc] -= f * m[row][cc];
    }
    pivots.push_back(c);
    ++row;
  }
  std::vector<char> is_pivot(static_cast<std::size_t>(cols), 0);
  for (int c : pivots) is_pivot[c] = 1;
  for (int f = 0; f < cols; ++f) {
    if (is_pivot[f]) continue;
    std::vector<Rational> v(static_cast<std::size_t>(cols), 0);
    v[f] = 1;
    for (std::size_t r = 0; r < pivots.size(); ++r) v[pivots[r]] = -m[r][f];
    out.nullspace.push_back(std::move(v));
  }
  out.nullspace_dim = static_cast<int>(out.nullspace.size());
  if (out.nullspace_dim == 0) return out;

  // Prefer a combination with every coefficient nonzero.
  for (int family = 1; family <= 4 && !out.general_position; ++family) {
    std::vector<Rational> c(static_cast<std::size_t>(cols), 0);
    for (int t = 0; t < out.nullspace_dim; ++t) {
      const Rational w = rpow(Rational(t + 1), family);
      for (int cc = 0; cc < cols; ++cc) c[cc] += w * out.nullspace[t][cc];
    }
    const bool all_nonzero = std::all_of(c.begin(), c.end(), [](const Rational& v) { return v != 0; });
    if (family == 1 || all_nonzero) out.coefficients = c;
    out.general_position = all_nonzero;
  }

  std::vector<Rational> vals(static_cast<std::size_t>(n), 0);
  for (int i = 1; i <= n; ++i) {
    const Rational x(i, n);
    if (x <= out.tau[1] || x > tend) continue;
    Rational f = 0;
    for (int j = 1; j <= mid; ++j) {
      const Rational u = x - out.tau[j];
      if (u <= 0) continue;
      for (int l = d0 + 1; l <= d; ++l) f += out.coefficients[(j - 1) * q + (l - d0 - 1)] * rpow(u, l);
    }
    vals[i - 1] = f;
  }
  Rational peak = 0;
  for (const auto& v : vals) peak = std::max(peak, v < 0 ? Rational(-v) : v);
  if (peak == 0) return out;
  for (int i = 0; i < n; ++i) out.signal(i) = static_cast<double>(Rational(vals[i] / peak));
  for (int i = 1; i <= n; ++i) {
    if (3 * i <= n || 3 * i > 2 * n) out.max_outside = std::max(out.max_outside, std::abs(out.signal(i - 1)));
  }
  out.membership_ok = check_membership(out.signal, ModelParams(d, d0, k, n)).member;
  return out;
}

double beta_min_ratio(const BetaTable& t) {
  double best = std::numeric_limits<double>::infinity();
  const int q = t.d - t.d0;
  for (int s = 1; s <= t.smax; ++s)
    for (int i = 1; i <= t.imax(s); ++i)
      for (int j1 = 0; j1 <= s * q; ++j1)
        for (int j2 = j1; j2 <= s * q; ++j2) {
          const RatioCheck r = beta_ratio_check(t, s, i, j1, j2);
          best = std::min(best, r.lhs / r.rhs);
        }
  return best;
}

KnotVector random_k0_knots(int d, int d0, std::uint64_t seed, std::uint64_t stream, bool end_long) {
  const int k0 = transition_boundary(d, d0);
  auto eng = make_engine(seed, stream);
  std::uniform_real_distribution<double> u(0.0, std::log(60.0));
  std::uniform_int_distribution<int> extra(0, 40);
  auto draw = [&] { return d + static_cast<int>(std::floor(std::exp(u(eng)))); };
  std::vector<int> gaps(static_cast<std::size_t>(k0));
  int middle = 0;
  for (int p = 1; p + 1 < k0; ++p) {
    gaps[p] = draw();
    middle = std::max(middle, gaps[p]);
  }
  if (end_long) {
    gaps[0] = std::max(middle, d + 1) + extra(eng);
    gaps[k0 - 1] = std::max(middle, d + 1) + extra(eng);
  } else {
    gaps[0] = draw();
    gaps[k0 - 1] = draw();
  }
  std::vector<int> kv{0};
  for (int g : gaps) kv.push_back(kv.back() + g);
  return KnotVector::validate(kv, d, kv.back());
}

PiecewiseSpline random_unit_spline(int d, int d0, const KnotVector& knots, std::uint64_t seed,
                                   std::uint64_t stream) {
  auto eng = make_engine(seed, stream);
  std::normal_distribution<double> z(0.0, 1.0);
  const int n = knots.n();
  std::vector<Eigen::VectorXd> coeffs(static_cast<std::size_t>(knots.pieces()));
  int prev = -1;
  for (int p = 0; p < knots.pieces(); ++p) {
    if (knots.piece_empty(p)) continue;
    const double h = static_cast<double>(knots[p + 1] - knots[p]) / n;
    Eigen::VectorXd a(d + 1);
    for (int l = 0; l <= d; ++l) a(l) = z(eng) / std::pow(h, l);
    if (prev >= 0 && d0 >= 0) {
      const double gap = static_cast<double>(knots[p] - knots[prev]) / n;
      a.head(d0 + 1) = transition_matrix(d, d0, gap) * coeffs[prev];
    }
    coeffs[p] = a;
    prev = p;
  }
  PiecewiseSpline s(knots, std::move(coeffs));
  const double norm = evaluate_spline(s).norm();
  return s.scaled(1.0 / norm);
}

namespace {

const std::vector<std::pair<int, int>>& beta_grid() {
  static const std::vector<std::pair<int, int>> g{{1, 0}, {2, 1}, {3, 2}, {3, 1}};
  return g;
}

double quad_instance(std::uint64_t seed, std::uint64_t stream) {
  const int d = static_cast<int>(stream % 4);
  const int d0 = d - 1;
  const KnotVector kn = random_k0_knots(d, d0, seed, stream, true);
  const PiecewiseSpline s = random_unit_spline(d, d0, kn, seed, stream + (1ull << 40));
  const int smax = (d0 + 1) / (d - d0);
  double v = 0.0;
  for (int t = 0; t <= smax; ++t) v = std::max(v, quad_form_residuals(s, d0, t));
  return v;
}

double l2_instance(std::uint64_t seed, std::uint64_t stream) {
  auto eng = make_engine(seed, stream);
  const int d = static_cast<int>(stream % 4);
  std::uniform_int_distribution<int> pieces_dist(1, 4);
  const int pieces = pieces_dist(eng);
  std::uniform_int_distribution<int> gap_dist(d + 1, std::max(d + 1, 64 / pieces));
  std::vector<int> kv{0};
  for (int p = 0; p < pieces; ++p) kv.push_back(kv.back() + gap_dist(eng));
  const KnotVector kn = KnotVector::validate(kv, d, kv.back());
  const PiecewiseSpline s = random_unit_spline(d, -1, kn, seed, stream + (1ull << 40));
  const L2Pair l2 = discrete_vs_integral_l2(s);
  return l2.discrete / l2.integral;
}

Signal random_shape_member(int d, int n, int k, std::uint64_t seed, std::uint64_t stream) {
  auto eng = make_engine(seed, stream);
  std::normal_distribution<double> z(0.0, 1.0);
  std::uniform_int_distribution<int> pick(0, k);
  // Uniform knot set among compositions with gaps >= d+1.
  std::vector<int> kv{0};
  const int slack = n - k * (d + 1);
  std::vector<int> cuts;
  std::uniform_int_distribution<int> cut(0, slack);
  for (int p = 0; p < k - 1; ++p) cuts.push_back(cut(eng));
  std::sort(cuts.begin(), cuts.end());
  for (int p = 0; p < k - 1; ++p) kv.push_back(cuts[p] + (p + 1) * (d + 1));
  kv.push_back(n);
  const KnotVector kn = KnotVector::validate(kv, d, n);
  const int js = pick(eng);
  MonotoneCanonical rep{d, js, kn, {}, {}, {}};
  const double flip = (d + 1) % 2 == 0 ? 1.0 : -1.0;
  for (int j = 1; j <= js; ++j) rep.a.push_back(flip * std::abs(z(eng)));
  for (int j = js; j <= k - 1; ++j) rep.b.push_back(std::abs(z(eng)));
  for (int l = 0; l < d; ++l) rep.c.push_back(z(eng));
  const Signal th = canonical_evaluate(rep);
  const double nrm = th.norm();
  return nrm > 0 ? Signal(th / nrm) : th;
}

double shape_instance(std::uint64_t seed, std::uint64_t stream) {
  const int d = static_cast<int>(stream % 3);
  const int n = (stream / 3) % 2 == 0 ? 64 : 256;
  return coef_bound_statistic(random_shape_member(d, n, 3, seed, stream), d, 3);
}

}  // namespace

Calibration calibrate_beta(std::uint64_t seed, int instances) {
  double lo = std::numeric_limits<double>::infinity();
  for (int t = 0; t < instances; ++t) {
    const auto [d, d0] = beta_grid()[t % beta_grid().size()];
    lo = std::min(lo, beta_min_ratio(beta_table(d, d0, random_k0_knots(d, d0, seed, t, false))));
  }
  return Calibration{"c_emp(beta ratio) = 0.5 * calibration minimum", 0.5 * lo, seed, instances,
                     "(d,d0) in {(1,0),(2,1),(3,2),(3,1)}; log-uniform gaps in [d+1, d+60]"};
}

Calibration calibrate_quad(std::uint64_t seed, int instances) {
  double hi = 0.0;
  for (int t = 0; t < instances; ++t) hi = std::max(hi, quad_instance(seed, t));
  return Calibration{"1/c_emp(quadratic form) = 1.1 * calibration maximum", 1.1 * hi, seed, instances,
                     "d in [0,3], d0 = d-1, end-long knots, all s"};
}

Calibration calibrate_l2(std::uint64_t seed, int instances) {
  double lo = std::numeric_limits<double>::infinity();
  for (int t = 0; t < instances; ++t) lo = std::min(lo, l2_instance(seed, t));
  return Calibration{"c_emp(discrete/integral) = 0.5 * calibration minimum", 0.5 * lo, seed, instances,
                     "d in [0,3], 1-4 pieces, n <= 64+"};
}

Calibration calibrate_shape_coef(std::uint64_t seed, int instances) {
  double hi = 0.0;
  for (int t = 0; t < instances; ++t) hi = std::max(hi, shape_instance(seed, t));
  return Calibration{"C_emp(coef bound) = 1.5 * calibration maximum", 1.5 * hi, seed, instances,
                     "d in {0,1,2}, n in {64,256}, k = 3, random pivot"};
}

EnsembleReport check_binomial() {
  EnsembleReport r{"binomial", 0, 0.0, 0.0, true, std::nullopt};
  for (int n = 1; n <= 15; ++n) {
    for (int p = 0; p < n; ++p) {
      std::vector<BigInt> poly(static_cast<std::size_t>(p + 1), 0);
      poly[p] = 1;
      const BigInt v = binomial_identity_check(n, poly);
      ++r.instances;
      if (v != 0) {
        r.pass = false;
        r.max_residual = std::max(r.max_residual, std::abs(static_cast<double>(v)));
      }
    }
  }
  r.min_ratio = r.pass ? 1.0 : 0.0;
  return r;
}

EnsembleReport check_moment() {
  EnsembleReport r{"moment", 0, std::numeric_limits<double>::infinity(), 0.0, true, std::nullopt};
  for (int d = 0; d <= 4; ++d) {
    for (int m = d + 1; m <= 500; ++m) {
      r.min_ratio = std::min(r.min_ratio, moment_matrix_lambda_min(m, d));
      ++r.instances;
    }
    const Eigen::MatrixXd a = moment_matrix(100000, d);
    for (int i = 0; i <= d; ++i)
      for (int j = 0; j <= d; ++j) r.max_residual = std::max(r.max_residual, std::abs(a(i, j) - 1.0 / (i + j + 1)));
  }
  r.pass = r.min_ratio > 1e-8 && r.max_residual < 1e-3;
  return r;
}

EnsembleReport check_beta(std::uint64_t seed, int instances) {
  const Calibration cal = calibrate_beta(seed, 1000);
  EnsembleReport r{"beta", instances, std::numeric_limits<double>::infinity(), 0.0, true, cal};
  for (int t = 0; t < instances; ++t) {
    const auto [d, d0] = beta_grid()[t % beta_grid().size()];
    const KnotVector kn = random_k0_knots(d, d0, seed, kTestStreamBase + t, false);
    const BetaTable tab = beta_table(d, d0, kn);
    r.min_ratio = std::min(r.min_ratio, beta_min_ratio(tab));
    if (d0 == d - 1) {
      const double g = tab.gap(d + 1, d);
      for (int j = 0; j <= 1; ++j) r.max_residual = std::max(r.max_residual, std::abs(tab.beta[1][j] - std::pow(g, j)));
    }
  }
  r.pass = r.min_ratio >= cal.value && r.max_residual <= 1e-12;
  return r;
}

EnsembleReport check_quad(std::uint64_t seed, int instances) {
  const Calibration cal = calibrate_quad(seed, 2000);
  EnsembleReport r{"quad", instances, 0.0, 0.0, true, cal};
  for (int t = 0; t < instances; ++t) r.max_residual = std::max(r.max_residual, quad_instance(seed, kTestStreamBase + t));
  r.min_ratio = cal.value / r.max_residual;
  r.pass = r.max_residual <= cal.value;
  return r;
}

EnsembleReport check_l2(std::uint64_t seed, int instances) {
  const Calibration cal = calibrate_l2(seed, 1000);
  EnsembleReport r{"l2", instances, std::numeric_limits<double>::infinity(), 0.0, true, cal};
  for (int t = 0; t < instances; ++t) r.min_ratio = std::min(r.min_ratio, l2_instance(seed, kTestStreamBase + t));
  r.pass = r.min_ratio >= cal.value;
  return r;
}

EnsembleReport check_sparse() {
  EnsembleReport r{"sparse", 0, std::numeric_limits<double>::infinity(), 0.0, true, std::nullopt};
  for (int d = 0; d <= 4; ++d) {
    for (int d0 = -1; d0 <= d - 1; ++d0) {
      const int k0 = transition_boundary(d, d0);
      const SparseSystem at = sparse_construct(d, d0, k0 + 1);
      ++r.instances;
      r.min_ratio = std::min(r.min_ratio, static_cast<double>(at.nullspace_dim));
      r.max_residual = std::max(r.max_residual, at.max_outside);
      if (at.nullspace_dim < 1 || !at.membership_ok || at.max_outside != 0.0) r.pass = false;
      for (int k = 2; k <= k0; ++k)
        if (sparse_construct(d, d0, k).nullspace_dim != 0) r.pass = false;
    }
  }
  return r;
}

EnsembleReport check_dof() {
  EnsembleReport r{"dof", 0, 1.0, 0.0, true, std::nullopt};
  for (int d = 0; d <= 6; ++d) {
    for (int d0 = -1; d0 <= d - 1; ++d0) {
      const DofResult res = dof_min_pieces(d, d0);
      ++r.instances;
      if (res.min_pieces > res.k0_plus_one) r.pass = false;
      if (d0 == d - 1 && res.min_pieces != res.k0_plus_one) r.pass = false;
      if (d <= 4 && sparse_construct(d, d0, res.min_pieces).nullspace_dim < 1) r.pass = false;
      if (d <= 4 && res.min_pieces > 2 && sparse_construct(d, d0, res.min_pieces - 1).nullspace_dim != 0) r.pass = false;
      r.min_ratio = std::min(r.min_ratio, static_cast<double>(res.min_pieces) / res.k0_plus_one);
    }
  }
  return r;
}

EnsembleReport check_shape_coef(std::uint64_t seed, int instances) {
  const Calibration cal = calibrate_shape_coef(seed, 1000);
  EnsembleReport r{"shape_coef", instances, 0.0, 0.0, true, cal};
  for (int t = 0; t < instances; ++t) r.max_residual = std::max(r.max_residual, shape_instance(seed, kTestStreamBase + t));
  r.min_ratio = r.max_residual > 0 ? cal.value / r.max_residual : std::numeric_limits<double>::infinity();
  r.pass = r.max_residual <= cal.value;
  return r;
}

}  // namespace freeknot
