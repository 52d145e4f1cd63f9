#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "freeknot/l0_solvers.hpp"
#include "freeknot/shape_restricted.hpp"

namespace freeknot {

using Json = nlohmann::ordered_json;

// One value per line, or "index,value" rows with an optional header line.
// Indices must run 1..n in order. Blank lines are skipped.
Signal parse_series(std::istream& in);
Signal parse_series_file(const std::string& path);

struct ReportPiece {
  int start;  // piece covers i in (start, end]
  int end;
  std::vector<double> coeffs;  // powers of (i - start)/n
};

struct FitReport {
  int d = 0;
  int d0 = -1;
  int k_selected = 0;
  std::vector<int> knots;
  std::vector<ReportPiece> pieces;  // nonempty pieces only
  double sse = 0.0;
  std::optional<double> penalty_used;
  std::vector<double> theta_hat;
  std::vector<SelectionStep> trace;          // adapt only
  std::optional<MonotoneCanonical> canonical;  // shapefit only
};

FitReport make_fit_report(const FitResult& fit, int d0, std::optional<double> penalty = std::nullopt);
Json to_json(const FitReport& report);
FitReport fit_report_from_json(const Json& j);
// Evaluates the stored pieces on i = 1..n.
Signal evaluate_report(const FitReport& report);

// args excludes the program name. Exit codes: 0 success, 1 validation or
// usage error, 2 budget refusal, 3 numerical failure.
int run_command(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace freeknot
