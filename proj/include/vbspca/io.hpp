#pragma once

#include <json.hpp>
#include <optional>
#include <string>

#include "vbspca/metrics.hpp"
#include "vbspca/synthetic.hpp"
#include "vbspca/types.hpp"

namespace vbspca {

using Json = nlohmann::json;

struct CsvTable {
  Matrix values;
  std::vector<std::string> header;  // empty when none detected
};

// RFC-4180-style numeric CSV. A non-numeric first row is treated as the
// header. Throws std::runtime_error with row/column context on malformed
// input, including NaN/Inf cells. Locale-independent.
CsvTable read_csv(const std::string& path);
CsvTable parse_csv(const std::string& text);

// Writes with shortest round-trip formatting (17 significant digits max).
void write_csv(const std::string& path, const Matrix& values,
               const std::vector<std::string>& header = {});
std::string format_double(double value);

// JSON schemas (all carry "schema": 1).
Json sim_spec_to_json(const SimSpec& spec);
SimSpec sim_spec_from_json(const Json& j);

Json hyperparameters_to_json(const Hyperparameters& hp);
Hyperparameters hyperparameters_from_json(const Json& j);

// result.json: {schema, algorithm, rank, sigma2, converged, iterations,
// support (1-based), inclusion, loadings (row-major), trace}.
Json fit_result_to_json(const FitResult& fit, const std::string& algorithm,
                        int rank);

Json eval_report_to_json(const EvalReport& report);

void write_json(const std::string& path, const Json& j);
Json read_json(const std::string& path);

}  // namespace vbspca
