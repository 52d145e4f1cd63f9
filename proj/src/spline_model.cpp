#include "freeknot/spline_model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "freeknot/errors.hpp"
#include "poly_fit.hpp"

namespace freeknot {

namespace detail {

LocalFit fit_local_polynomial(const Eigen::Ref<const Eigen::VectorXd>& y_seg, int d, int n) {
  const int len = static_cast<int>(y_seg.size());
  if (len < d + 1) {
    throw InfeasibleSegmentError("segment of length " + std::to_string(len) +
                                 " cannot determine a degree-" + std::to_string(d) + " polynomial");
  }
  // Columns are u^l with u = i/len in (0,1]; rescaled to x-units afterwards.
  Eigen::MatrixXd v(len, d + 1);
  for (int i = 0; i < len; ++i) {
    const double u = static_cast<double>(i + 1) / len;
    double p = 1.0;
    for (int l = 0; l <= d; ++l) {
      v(i, l) = p;
      p *= u;
    }
  }
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(v);
  const Eigen::VectorXd cu = qr.solve(y_seg);
  LocalFit out;
  out.fitted = v * cu;
  const Eigen::VectorXd r = y_seg - out.fitted;
  out.sse = r.squaredNorm();
  out.max_abs_residual = len > 0 ? r.cwiseAbs().maxCoeff() : 0.0;
  out.coeffs.resize(d + 1);
  const double scale = static_cast<double>(n) / len;
  double f = 1.0;
  for (int l = 0; l <= d; ++l) {
    out.coeffs(l) = cu(l) * f;
    f *= scale;
  }
  return out;
}

ProjectionFit project_onto_columns(const Eigen::VectorXd& y, const Eigen::MatrixXd& b) {
  Eigen::VectorXd norms = b.colwise().norm();
  for (Eigen::Index j = 0; j < norms.size(); ++j)
    if (norms(j) == 0.0) norms(j) = 1.0;
  const Eigen::MatrixXd bs = b * norms.cwiseInverse().asDiagonal();
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(bs);
  qr.setThreshold(1e-10);
  if (qr.rank() < bs.cols()) {
    throw RankDeficiencyError("basis rank " + std::to_string(qr.rank()) + " below column count " +
                              std::to_string(bs.cols()));
  }
  ProjectionFit out;
  const Eigen::VectorXd z = qr.solve(y);
  out.global = z.cwiseQuotient(norms);
  out.fitted = bs * z;
  return out;
}

}  // namespace detail

double binomial(int n, int k) {
  if (k < 0 || k > n) return 0.0;
  double r = 1.0;
  for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
  return std::round(r);
}

int transition_boundary(int d, int d0) {
  if (d < 0) throw ParameterError("degree d must be >= 0, got " + std::to_string(d));
  if (d0 < -1 || d0 > d - 1) {
    throw ParameterError("continuity order d0 must lie in [-1, d-1], got d0=" + std::to_string(d0) +
                         " for d=" + std::to_string(d));
  }
  return (d + 1) / (d - d0) + 1;
}

ModelParams::ModelParams(int d, int d0, int k, int n) : d_(d), d0_(d0), k_(k), n_(n) {
  transition_boundary(d, d0);
  if (k < 1) throw ParameterError("number of pieces k must be >= 1");
  if (n < d + 1) throw ParameterError("sample size n must be >= d+1");
}

KnotVector KnotVector::validate(std::vector<int> knots, int d, int n) {
  if (d < 0) throw ParameterError("degree d must be >= 0");
  if (knots.size() < 2 || knots.front() != 0 || knots.back() != n) {
    throw KnotEndpointError("knot vector must start at 0 and end at n=" + std::to_string(n));
  }
  for (std::size_t i = 1; i < knots.size(); ++i) {
    if (knots[i] < knots[i - 1]) {
      throw KnotOrderError("knot vector is not non-decreasing at position " + std::to_string(i));
    }
  }
  for (std::size_t i = 1; i < knots.size(); ++i) {
    const int gap = knots[i] - knots[i - 1];
    if (gap > 0 && gap < d + 1) {
      throw KnotGapError("piece " + std::to_string(i) + " has " + std::to_string(gap) +
                         " points, fewer than d+1=" + std::to_string(d + 1));
    }
  }
  return KnotVector(std::move(knots), d);
}

KnotVector validate_knots(const std::vector<int>& knots, int d, int n) {
  return KnotVector::validate(knots, d, n);
}

int KnotVector::nonempty_pieces() const {
  int c = 0;
  for (int p = 0; p < pieces(); ++p) c += piece_empty(p) ? 0 : 1;
  return c;
}

std::vector<int> KnotVector::inner_distinct() const {
  std::vector<int> out;
  for (std::size_t i = 1; i + 1 < knots_.size(); ++i) {
    const int t = knots_[i];
    if (t > 0 && t < n() && (out.empty() || out.back() != t)) out.push_back(t);
  }
  return out;
}

int KnotVector::piece_of(int i) const {
  // Last p with n_p < i; that piece is necessarily nonempty.
  auto it = std::lower_bound(knots_.begin(), knots_.end(), i);
  return static_cast<int>(it - knots_.begin()) - 1;
}

KnotVector KnotVector::padded(int k) const {
  if (pieces() > k) throw ParameterError("knot vector has more than k pieces");
  std::vector<int> out(static_cast<std::size_t>(k - pieces()), 0);
  out.insert(out.end(), knots_.begin(), knots_.end());
  return KnotVector(std::move(out), d_);
}

PiecewiseSpline::PiecewiseSpline(KnotVector knots, std::vector<Eigen::VectorXd> coeffs)
    : knots_(std::move(knots)), coeffs_(std::move(coeffs)) {
  if (static_cast<int>(coeffs_.size()) != knots_.pieces()) {
    throw ParameterError("one coefficient vector per piece is required");
  }
  for (int p = 0; p < knots_.pieces(); ++p) {
    const int want = knots_.piece_empty(p) ? 0 : knots_.degree() + 1;
    if (coeffs_[p].size() != want) {
      throw ParameterError("piece " + std::to_string(p) + " needs " + std::to_string(want) +
                           " coefficients");
    }
  }
}

PiecewiseSpline PiecewiseSpline::scaled(double factor) const {
  std::vector<Eigen::VectorXd> c = coeffs_;
  for (auto& v : c) v *= factor;
  return PiecewiseSpline(knots_, std::move(c));
}

Signal evaluate_spline(const PiecewiseSpline& spline) {
  const int n = spline.n();
  const int d = spline.degree();
  const auto& kn = spline.knots();
  Signal theta(n);
  for (int p = 0; p < kn.pieces(); ++p) {
    if (kn.piece_empty(p)) continue;
    const Eigen::VectorXd& a = spline.piece(p);
    for (int i = kn[p] + 1; i <= kn[p + 1]; ++i) {
      const double u = static_cast<double>(i - kn[p]) / n;
      double v = 0.0;
      for (int l = d; l >= 0; --l) v = v * u + a(l);
      theta(i - 1) = v;
    }
  }
  return theta;
}

double transition_coefficient(int d, int p, int q, double gap) {
  if (p < 1 || p > d + 1 || q < 1 || q > d + 1) {
    throw ParameterError("transition coefficient indices out of range");
  }
  if (q < p) return 0.0;
  return binomial(q - 1, p - 1) * std::pow(gap, q - p);
}

Eigen::MatrixXd transition_matrix(int d, int d0, double gap) {
  Eigen::MatrixXd m(d0 + 1, d + 1);
  for (int p = 1; p <= d0 + 1; ++p)
    for (int q = 1; q <= d + 1; ++q) m(p - 1, q - 1) = transition_coefficient(d, p, q, gap);
  return m;
}

Eigen::VectorXd shift_polynomial(const Eigen::VectorXd& c, double delta) {
  const int m = static_cast<int>(c.size());
  Eigen::VectorXd out = Eigen::VectorXd::Zero(m);
  for (int l = 0; l < m; ++l) {
    double pw = 1.0;
    for (int j = l; j >= 0; --j) {
      // Term binom(l, j) delta^(l-j) feeds power j.
      out(j) += c(l) * binomial(l, j) * pw;
      pw *= delta;
    }
  }
  return out;
}

Eigen::MatrixXd basis_matrix(int d, int d0, const KnotVector& knots) {
  transition_boundary(d, d0);
  const int n = knots.n();
  const std::vector<int> inner = knots.inner_distinct();
  const int cols = (d + 1) + static_cast<int>(inner.size()) * (d - d0);
  Eigen::MatrixXd b = Eigen::MatrixXd::Zero(n, cols);
  for (int i = 1; i <= n; ++i) {
    const double x = static_cast<double>(i) / n;
    double p = 1.0;
    for (int l = 0; l <= d; ++l) {
      b(i - 1, l) = p;
      p *= x;
    }
  }
  int col = d + 1;
  for (int t : inner) {
    for (int l = d0 + 1; l <= d; ++l, ++col) {
      for (int i = t + 1; i <= n; ++i) b(i - 1, col) = std::pow(static_cast<double>(i - t) / n, l);
    }
  }
  return b;
}

Eigen::MatrixXd basis_matrix(const ModelParams& params, const KnotVector& knots) {
  if (knots.n() != params.n()) throw ParameterError("knot vector and parameters disagree on n");
  if (knots.degree() != params.d()) throw ParameterError("knot vector and parameters disagree on d");
  return basis_matrix(params.d(), params.d0(), knots);
}

PiecewiseSpline spline_from_global(int d, int d0, const KnotVector& knots,
                                   const Eigen::VectorXd& global) {
  const std::vector<int> inner = knots.inner_distinct();
  const int n = knots.n();
  if (global.size() != (d + 1) + static_cast<Eigen::Index>(inner.size()) * (d - d0)) {
    throw ParameterError("global coefficient vector has the wrong length");
  }
  std::vector<Eigen::VectorXd> coeffs(static_cast<std::size_t>(knots.pieces()));
  for (int p = 0; p < knots.pieces(); ++p) {
    if (knots.piece_empty(p)) continue;
    const double s = static_cast<double>(knots[p]) / n;
    Eigen::VectorXd a = shift_polynomial(global.head(d + 1), s);
    for (std::size_t j = 0; j < inner.size() && inner[j] <= knots[p]; ++j) {
      Eigen::VectorXd h = Eigen::VectorXd::Zero(d + 1);
      for (int l = d0 + 1; l <= d; ++l) h(l) = global((d + 1) + static_cast<int>(j) * (d - d0) + (l - d0 - 1));
      a += shift_polynomial(h, s - static_cast<double>(inner[j]) / n);
    }
    coeffs[p] = a;
  }
  return PiecewiseSpline(knots, std::move(coeffs));
}

Eigen::VectorXd global_from_spline(const PiecewiseSpline& spline, int d0, double tol) {
  const int d = spline.degree();
  const auto& kn = spline.knots();
  const int n = kn.n();
  const std::vector<int> inner = kn.inner_distinct();
  Eigen::VectorXd g((d + 1) + static_cast<Eigen::Index>(inner.size()) * (d - d0));
  int prev = -1;
  std::size_t j = 0;
  for (int p = 0; p < kn.pieces(); ++p) {
    if (kn.piece_empty(p)) continue;
    if (prev < 0) {
      g.head(d + 1) = spline.piece(p);
    } else {
      const double gap = static_cast<double>(kn[p] - kn[prev]) / n;
      const Eigen::VectorXd carried = shift_polynomial(spline.piece(prev), gap);
      const Eigen::VectorXd jump = spline.piece(p) - carried;
      const double scale = 1.0 + carried.cwiseAbs().maxCoeff() + spline.piece(p).cwiseAbs().maxCoeff();
      for (int l = 0; l <= d0; ++l) {
        if (std::abs(jump(l)) > tol * scale) {
          throw MembershipError("derivative of order " + std::to_string(l) + " jumps at knot " +
                                std::to_string(kn[p]));
        }
      }
      for (int l = d0 + 1; l <= d; ++l) g((d + 1) + static_cast<int>(j) * (d - d0) + (l - d0 - 1)) = jump(l);
      ++j;
    }
    prev = p;
  }
  return g;
}


namespace {

// window_tol decides which stretches count as a single polynomial; tol is the
// residual bound for the final projection.
MembershipResult membership_attempt(const Signal& theta, const ModelParams& params, double tol, double window_tol) {
  const int n = params.n();
  const int d = params.d();
  const int d0 = params.d0();
  if (theta.size() != n) throw ParameterError("signal length differs from n");
  MembershipResult res;

  auto fit = [&](int a, int b) { return detail::fit_local_polynomial(theta.segment(a, b - a), d, n); };
  auto exact = [&](int a, int b) { return fit(a, b).max_abs_residual <= window_tol; };

  // left[b]: smallest a with (a,b] a single polynomial; right[a]: largest such b.
  std::vector<int> left(n + 1, -1), right(n + 1, -1);
  int a = 0;
  for (int b = d + 1; b <= n; ++b) {
    while (a < b - d - 1 && !exact(a, b)) ++a;
    left[b] = a;
  }
  int b = n;
  for (int s = n - d - 1; s >= 0; --s) {
    while (b > s + d + 1 && !exact(s, b)) --b;
    right[s] = b;
  }

  // Inner knot t is admissible iff the unique polynomials ending and starting
  // at t match derivatives up to order d0.
  const double scale = theta.size() ? theta.cwiseAbs().maxCoeff() : 0.0;
  std::vector<char> knot_ok(n + 1, 1);
  if (d0 >= 0) {
    for (int t = d + 1; t <= n - d - 1; ++t) {
      const auto lf = fit(left[t], t);
      const auto rf = fit(t, right[t]);
      const double gap = static_cast<double>(t - left[t]) / n;
      const Eigen::VectorXd carried = transition_matrix(d, d0, gap) * lf.coeffs;
      const double h = static_cast<double>(std::min(t - left[t], right[t] - t)) / n;
      double dev = 0.0;
      for (int r = 0; r <= d0; ++r) dev += std::abs(carried(r) - rf.coeffs(r)) * std::pow(h, r);
      knot_ok[t] = dev <= tol + 1e-9 * scale;
    }
  }

  constexpr int inf = std::numeric_limits<int>::max() / 2;
  std::vector<int> best(n + 1, inf), from(n + 1, -1);
  best[0] = 0;
  for (int e = d + 1; e <= n; ++e) {
    for (int s = left[e]; s <= e - d - 1; ++s) {
      if (best[s] >= inf || (s > 0 && !knot_ok[s])) continue;
      if (best[s] + 1 < best[e]) {
        best[e] = best[s] + 1;
        from[e] = s;
      }
    }
  }
  if (best[n] >= inf) return res;
  res.min_pieces = best[n];
  if (best[n] > params.k()) return res;

  std::vector<int> kv{n};
  for (int e = n; e > 0; e = from[e]) kv.push_back(from[e]);
  std::reverse(kv.begin(), kv.end());
  const KnotVector knots = KnotVector::validate(kv, d, n).padded(params.k());

  const detail::ProjectionFit pf = detail::project_onto_columns(theta, basis_matrix(d, d0, knots));
  res.max_residual = (theta - pf.fitted).cwiseAbs().maxCoeff();
  if (res.max_residual > tol) return res;
  PiecewiseSpline spline = spline_from_global(d, d0, knots, pf.global);
  // Derivative matching through the transition relation.
  int prev = -1;
  for (int p = 0; p < knots.pieces(); ++p) {
    if (knots.piece_empty(p)) continue;
    if (prev >= 0 && d0 >= 0) {
      const double gap = static_cast<double>(knots[p] - knots[prev]) / n;
      const Eigen::VectorXd carried = transition_matrix(d, d0, gap) * spline.piece(prev);
      const double sc = 1.0 + carried.cwiseAbs().maxCoeff();
      if ((carried - spline.piece(p).head(d0 + 1)).cwiseAbs().maxCoeff() > 1e-8 * sc) return res;
    }
    prev = p;
  }
  res.member = true;
  res.witness = knots;
  res.spline = std::move(spline);
  return res;
}

}  // namespace

MembershipResult check_membership(const Signal& theta, const ModelParams& params, double tol) {
  // A small jump in a high derivative can hide under tol and let a window run
  // past a true knot, which skews the derivative test. Try tight windows first.
  const double tight = 1e-10 * (theta.size() ? theta.cwiseAbs().maxCoeff() : 0.0);
  if (tight < tol) {
    MembershipResult r = membership_attempt(theta, params, tol, tight);
    if (r.member) return r;
  }
  return membership_attempt(theta, params, tol, tol);
}

L2Pair discrete_vs_integral_l2(const PiecewiseSpline& spline) {
  L2Pair out;
  out.discrete = evaluate_spline(spline).squaredNorm();
  const auto& kn = spline.knots();
  const int n = kn.n();
  const int d = spline.degree();
  for (int p = 0; p < kn.pieces(); ++p) {
    if (kn.piece_empty(p)) continue;
    const Eigen::VectorXd& a = spline.piece(p);
    const double h = static_cast<double>(kn[p + 1] - kn[p]) / n;
    for (int l = 0; l <= d; ++l)
      for (int m = 0; m <= d; ++m) out.integral += a(l) * a(m) * std::pow(h, l + m + 1) / (l + m + 1);
  }
  out.integral *= n;
  return out;
}

}  // namespace freeknot
