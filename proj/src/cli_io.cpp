#include "freeknot/cli_io.hpp"

#include <cmath>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "freeknot/analysis_kernels.hpp"
#include "freeknot/errors.hpp"
#include "freeknot/experiments.hpp"

namespace freeknot {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

bool parse_double(const std::string& s, double& v) {
  std::istringstream is(s);
  is >> v;
  return !is.fail() && (is >> std::ws).eof();
}

bool parse_int(const std::string& s, long long& v) {
  std::istringstream is(s);
  is >> v;
  return !is.fail() && (is >> std::ws).eof();
}

[[noreturn]] void malformed(int line, const std::string& what) {
  throw ParseError("line " + std::to_string(line) + ": " + what);
}

}  // namespace

Signal parse_series(std::istream& in) {
  std::vector<double> vals;
  std::string raw;
  int line = 0;
  int data_lines = 0;
  int columns = 0;
  while (std::getline(in, raw)) {
    ++line;
    const std::string s = trim(raw);
    if (s.empty()) continue;
    const auto comma = s.find(',');
    const int cols = comma == std::string::npos ? 1 : 2;
    if (cols == 2 && s.find(',', comma + 1) != std::string::npos) malformed(line, "expected at most two columns");
    if (columns == 0) {
      columns = cols;
    } else if (cols != columns) {
      malformed(line, "column count changed");
    }
    if (cols == 1) {
      double v;
      if (!parse_double(s, v)) malformed(line, "not a number: '" + s + "'");
      vals.push_back(v);
    } else {
      const std::string a = trim(s.substr(0, comma));
      const std::string b = trim(s.substr(comma + 1));
      long long idx;
      double v;
      const bool ok = parse_int(a, idx) && parse_double(b, v);
      if (!ok) {
        if (data_lines == 0 && vals.empty()) continue;  // header
        malformed(line, "expected 'index,value', got '" + s + "'");
      }
      if (idx != static_cast<long long>(vals.size()) + 1) {
        malformed(line, "non-contiguous index " + std::to_string(idx) + ", expected " +
                            std::to_string(vals.size() + 1));
      }
      vals.push_back(v);
    }
    ++data_lines;
  }
  if (vals.empty()) throw ParseError("series is empty");
  return Eigen::Map<const Eigen::VectorXd>(vals.data(), static_cast<Eigen::Index>(vals.size()));
}

Signal parse_series_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot read '" + path + "'");
  return parse_series(in);
}

FitReport make_fit_report(const FitResult& fit, int d0, std::optional<double> penalty) {
  FitReport r;
  r.d = fit.spline.degree();
  r.d0 = d0;
  r.k_selected = fit.k_selected;
  r.knots = fit.knots.values();
  for (int p = 0; p < fit.knots.pieces(); ++p) {
    if (fit.knots.piece_empty(p)) continue;
    const Eigen::VectorXd& c = fit.spline.piece(p);
    r.pieces.push_back(ReportPiece{fit.knots[p], fit.knots[p + 1], std::vector<double>(c.data(), c.data() + c.size())});
  }
  r.sse = fit.sse;
  r.penalty_used = penalty;
  r.theta_hat.assign(fit.theta_hat.data(), fit.theta_hat.data() + fit.theta_hat.size());
  return r;
}

Json to_json(const FitReport& r) {
  Json j;
  j["d"] = r.d;
  j["d0"] = r.d0;
  j["k_selected"] = r.k_selected;
  j["knots"] = r.knots;
  j["pieces"] = Json::array();
  for (const auto& p : r.pieces) j["pieces"].push_back(Json{{"start", p.start}, {"end", p.end}, {"coeffs", p.coeffs}});
  j["sse"] = r.sse;
  j["penalty_used"] = r.penalty_used ? Json(*r.penalty_used) : Json(nullptr);
  j["theta_hat"] = r.theta_hat;
  if (!r.trace.empty()) {
    Json t = Json::array();
    for (const auto& s : r.trace)
      t.push_back(Json{{"k", s.k}, {"sse", s.sse}, {"penalty", s.penalty}, {"objective", s.objective}});
    j["selection_trace"] = t;
  }
  if (r.canonical) {
    j["pivot"] = r.canonical->j_star;
    j["canonical"] = Json{{"knots", r.canonical->knots.values()},
                          {"a", r.canonical->a},
                          {"b", r.canonical->b},
                          {"c", r.canonical->c}};
  }
  return j;
}

FitReport fit_report_from_json(const Json& j) {
  try {
    FitReport r;
    r.d = j.at("d").get<int>();
    r.d0 = j.at("d0").get<int>();
    r.k_selected = j.at("k_selected").get<int>();
    r.knots = j.at("knots").get<std::vector<int>>();
    for (const auto& p : j.at("pieces"))
      r.pieces.push_back(ReportPiece{p.at("start").get<int>(), p.at("end").get<int>(), p.at("coeffs").get<std::vector<double>>()});
    r.sse = j.at("sse").get<double>();
    if (j.contains("penalty_used") && !j.at("penalty_used").is_null()) r.penalty_used = j.at("penalty_used").get<double>();
    r.theta_hat = j.at("theta_hat").get<std::vector<double>>();
    if (j.contains("selection_trace")) {
      for (const auto& s : j.at("selection_trace"))
        r.trace.push_back(SelectionStep{s.at("k").get<int>(), s.at("sse").get<double>(), s.at("penalty").get<double>(),
                                        s.at("objective").get<double>()});
    }
    if (j.contains("canonical")) {
      const auto& c = j.at("canonical");
      const auto kv = c.at("knots").get<std::vector<int>>();
      r.canonical = MonotoneCanonical{r.d, j.at("pivot").get<int>(), KnotVector::validate(kv, r.d, kv.back()),
                                      c.at("a").get<std::vector<double>>(), c.at("b").get<std::vector<double>>(),
                                      c.at("c").get<std::vector<double>>()};
    }
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("malformed fit report: ") + e.what());
  }
}

Signal evaluate_report(const FitReport& r) {
  if (r.knots.empty()) throw ParseError("fit report has no knots");
  const int n = r.knots.back();
  Signal theta = Signal::Zero(n);
  for (const auto& p : r.pieces) {
    if (p.start < 0 || p.end > n || p.start >= p.end) throw ParseError("fit report piece out of range");
    for (int i = p.start + 1; i <= p.end; ++i) {
      const double u = static_cast<double>(i - p.start) / n;
      double v = 0.0;
      for (auto it = p.coeffs.rbegin(); it != p.coeffs.rend(); ++it) v = v * u + *it;
      theta(i - 1) = v;
    }
  }
  return theta;
}

namespace {

struct Options {
  std::string input;
  std::string out;
  int d = 0;
  int d0 = -1;
  int k = 2;
  int k_max = 0;
  int n = 0;
  std::optional<double> sigma;
  double tau = kDefaultTau;
  std::string solver = "dp";
  std::vector<int> n_grid;
  int reps = 1;
  std::uint64_t seed = 0;
  std::string signal = "zero";
  std::string estimator = "l0_fit";
  double scale = 10.0;
  double budget = kDefaultBudget;
  std::string suite = "all";
};

void emit(const std::string& text, const std::string& path, std::ostream& out) {
  if (path.empty()) {
    out << text;
    return;
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) throw ParameterError("cannot write '" + path + "'");
  f << text;
}

std::string dump(const Json& j) { return j.dump(2) + "\n"; }

Json report_json(const EnsembleReport& r) {
  Json j{{"suite", r.suite}, {"instances", r.instances}, {"min_ratio", r.min_ratio}, {"max_residual", r.max_residual},
         {"pass", r.pass}};
  if (r.calibration) {
    const auto& c = *r.calibration;
    j["calibration"] = Json{{"name", c.name}, {"value", c.value}, {"seed", c.seed}, {"instances", c.instances},
                            {"grid", c.grid}};
  }
  return j;
}

std::string run_fit(const Options& o) {
  const Signal y = parse_series_file(o.input);
  const ModelParams params(o.d, o.d0, o.k, static_cast<int>(y.size()));
  FitResult fit = [&] {
    if (o.solver == "dp") {
      if (o.d0 != -1) throw ParameterError("--solver dp needs --d0 -1; use --solver exhaustive");
      return dp_fit(y, params);
    }
    return exhaustive_fit(y, params, o.budget);
  }();
  return dump(to_json(make_fit_report(fit, o.d0)));
}

std::string run_adapt(const Options& o) {
  const Signal y = parse_series_file(o.input);
  const int n = static_cast<int>(y.size());
  const ModelParams params(o.d, o.d0, 1, n);
  const double sigma = o.sigma ? *o.sigma : estimate_sigma(y);
  const PenaltySpec spec{o.tau, sigma, o.d, o.d0, n};
  const int kmax = o.k_max > 0 ? o.k_max : default_k_max(o.d, o.d0, n);
  const AdaptiveFit a = adaptive_fit(y, params, spec, kmax, o.budget);
  FitReport r = make_fit_report(a.fit, o.d0, penalty(a.fit.k_selected, spec));
  r.trace = a.trace;
  Json j = to_json(r);
  j["sigma"] = sigma;
  j["tau"] = o.tau;
  return dump(j);
}

std::string run_shapefit(const Options& o) {
  const Signal y = parse_series_file(o.input);
  const ShapeFit s = shape_lse(y, o.d, o.k, o.budget);
  FitReport r = make_fit_report(s.fit, o.d - 1);
  r.canonical = s.canonical;
  return dump(to_json(r));
}

std::string run_mc(const Options& o) {
  ExperimentConfig c;
  c.n_grid = o.n_grid;
  c.d = o.d;
  c.d0 = o.d0;
  c.k = o.k;
  c.reps = o.reps;
  c.master_seed = o.seed;
  c.signal_kind = parse_signal_kind(o.signal);
  c.sigma = o.sigma ? *o.sigma : 1.0;
  c.scale = o.scale;
  c.tau = o.tau;
  c.k_max = o.k_max;
  c.budget = o.budget;
  if (c.signal_kind == SignalKind::custom_file) {
    if (o.input.empty()) throw ParameterError("--signal custom_file needs --input");
    c.custom = parse_series_file(o.input);
  }
  const RiskCurve curve = mc_risk(c, parse_estimator(o.estimator));
  std::ostringstream os;
  write_risk_csv(os, curve);
  return os.str();
}

std::string run_lil(const Options& o) {
  std::ostringstream os;
  write_lil_csv(os, lil_curve(o.n_grid, o.d, o.reps, o.seed), o.d, o.reps, o.seed);
  return os.str();
}

std::string run_width(const Options& o) {
  std::ostringstream os;
  write_width_csv(os, width_curve(o.n_grid, o.d, o.d0, o.k, o.reps, o.seed, o.budget), o.k, o.d, o.d0, o.reps, o.seed);
  return os.str();
}

std::string run_sparse(const Options& o) {
  const SparseSystem s = sparse_construct(o.d, o.d0, o.k, o.n);
  auto str = [](const Rational& r) { return r.str(); };
  Json j;
  j["d"] = s.d;
  j["d0"] = s.d0;
  j["k"] = s.k;
  j["k0"] = transition_boundary(s.d, s.d0);
  j["n"] = s.n;
  Json tau = Json::array();
  for (const auto& t : s.tau) tau.push_back(str(t));
  j["tau"] = tau;
  Json m = Json::array();
  for (const auto& row : s.matrix) {
    Json r = Json::array();
    for (const auto& v : row) r.push_back(str(v));
    m.push_back(r);
  }
  j["matrix"] = m;
  j["nullspace_dim"] = s.nullspace_dim;
  Json ns = Json::array();
  for (const auto& v : s.nullspace) {
    Json r = Json::array();
    for (const auto& x : v) r.push_back(str(x));
    ns.push_back(r);
  }
  j["nullspace"] = ns;
  Json co = Json::array();
  for (const auto& x : s.coefficients) co.push_back(str(x));
  j["coefficients"] = co;
  j["general_position"] = s.general_position;
  j["membership_ok"] = s.membership_ok;
  j["max_outside"] = s.max_outside;
  j["signal"] = std::vector<double>(s.signal.data(), s.signal.data() + s.signal.size());
  return dump(j);
}

std::string run_checks(const Options& o) {
  const std::vector<std::string> all{"binomial", "moment", "beta", "quad", "l2", "sparse", "dof", "shape_coef"};
  std::vector<std::string> suites;
  if (o.suite == "all") {
    suites = all;
  } else {
    if (std::find(all.begin(), all.end(), o.suite) == all.end()) throw ParameterError("unknown suite '" + o.suite + "'");
    suites.push_back(o.suite);
  }
  Json arr = Json::array();
  bool pass = true;
  for (const auto& s : suites) {
    EnsembleReport r;
    if (s == "binomial") r = check_binomial();
    if (s == "moment") r = check_moment();
    if (s == "beta") r = check_beta(o.seed);
    if (s == "quad") r = check_quad(o.seed);
    if (s == "l2") r = check_l2(o.seed);
    if (s == "sparse") r = check_sparse();
    if (s == "dof") r = check_dof();
    if (s == "shape_coef") r = check_shape_coef(o.seed);
    pass = pass && r.pass;
    arr.push_back(report_json(r));
  }
  return dump(Json{{"seed", o.seed}, {"pass", pass}, {"suites", arr}});
}

}  // namespace

int run_command(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Free-knot spline fitting and minimax-rate experiments", "freeknot"};
  app.require_subcommand(1);
  Options o;

  auto model = [&](CLI::App* sub, bool with_d0, bool with_k) {
    sub->add_option("--d", o.d, "polynomial degree")->required();
    if (with_d0) sub->add_option("--d0", o.d0, "continuity order at inner knots, -1 allows jumps")->required();
    if (with_k) sub->add_option("--k", o.k, "maximum number of pieces")->required();
  };
  auto input = [&](CLI::App* sub, bool required) {
    auto* opt = sub->add_option("--input", o.input, "series file: one value per line or index,value");
    if (required) opt->required()->check(CLI::ExistingFile);
  };
  auto grid = [&](CLI::App* sub) {
    sub->add_option("--n-grid", o.n_grid, "comma-separated sample sizes")->required()->delimiter(',');
    sub->add_option("--reps", o.reps, "replicates per grid point")->required();
    sub->add_option("--seed", o.seed, "master seed")->required();
  };
  auto out_opt = [&](CLI::App* sub) { sub->add_option("--out", o.out, "output file (default stdout)"); };
  auto budget = [&](CLI::App* sub) { sub->add_option("--budget", o.budget, "enumeration budget"); };
  auto sigma = [&](CLI::App* sub) {
    sub->add_option_function<double>("--sigma", [&](double v) { o.sigma = v; }, "noise level");
  };

  auto* fit = app.add_subcommand("fit", "least-squares fit with at most k pieces");
  model(fit, true, true);
  input(fit, true);
  fit->add_option("--solver", o.solver, "dp (d0 = -1) or exhaustive")->check(CLI::IsMember({"dp", "exhaustive"}));
  budget(fit);
  out_opt(fit);

  auto* adapt = app.add_subcommand("adapt", "penalized selection of the number of pieces");
  model(adapt, true, false);
  input(adapt, true);
  adapt->add_option("--k-max", o.k_max, "largest k considered");
  adapt->add_option("--tau", o.tau, "penalty multiplier");
  sigma(adapt);
  budget(adapt);
  out_opt(adapt);

  auto* shapefit = app.add_subcommand("shapefit", "least squares over d-monotone splines with at most k pieces");
  model(shapefit, false, true);
  input(shapefit, true);
  budget(shapefit);
  out_opt(shapefit);

  auto* mc = app.add_subcommand("mc-risk", "Monte Carlo risk curve (CSV)");
  model(mc, true, true);
  grid(mc);
  mc->add_option("--signal", o.signal, "zero, lf_spline, sparse_boxcar, shaped_lf, custom_file");
  mc->add_option("--estimator", o.estimator, "l0_fit, adaptive, shape_lse");
  mc->add_option("--scale", o.scale, "signal amplitude");
  mc->add_option("--tau", o.tau, "penalty multiplier for the adaptive estimator");
  mc->add_option("--k-max", o.k_max, "largest k for the adaptive estimator");
  input(mc, false);
  sigma(mc);
  budget(mc);
  out_opt(mc);

  auto* lil = app.add_subcommand("lil", "iterated-logarithm statistic curve (CSV)");
  model(lil, false, false);
  grid(lil);
  out_opt(lil);

  auto* width = app.add_subcommand("width", "complexity width curve (CSV)");
  model(width, true, true);
  grid(width);
  budget(width);
  out_opt(width);

  auto* sparse = app.add_subcommand("sparse", "middle-vanishing spline construction (JSON)");
  model(sparse, true, true);
  sparse->add_option("--n", o.n, "sample size, 0 picks a default");
  out_opt(sparse);

  auto* checks = app.add_subcommand("checks", "analysis kernel suites (JSON)");
  checks->add_option("--suite", o.suite, "all, binomial, moment, beta, quad, l2, sparse, dof, shape_coef");
  checks->add_option("--seed", o.seed, "master seed")->required();
  out_opt(checks);

  try {
    std::vector<std::string> rev(args.rbegin(), args.rend());
    app.parse(rev);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }

  try {
    std::string text;
    if (fit->parsed()) text = run_fit(o);
    if (adapt->parsed()) text = run_adapt(o);
    if (shapefit->parsed()) text = run_shapefit(o);
    if (mc->parsed()) text = run_mc(o);
    if (lil->parsed()) text = run_lil(o);
    if (width->parsed()) text = run_width(o);
    if (sparse->parsed()) text = run_sparse(o);
    if (checks->parsed()) text = run_checks(o);
    emit(text, o.out, out);
    return 0;
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  } catch (const BudgetExceededError& e) {
    err << "refused: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    err << "failed: " << e.what() << "\n";
    return 3;
  }
}

}  // namespace freeknot
