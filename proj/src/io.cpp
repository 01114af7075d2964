#include "vbspca/io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace vbspca {

namespace {

// Splits one CSV record; handles quoted fields and trailing CR.
std::vector<std::string> split_record(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cell += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cell += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      cells.push_back(cell);
      cell.clear();
    } else if (c != '\r') {
      cell += c;
    }
  }
  cells.push_back(cell);
  return cells;
}

std::optional<double> parse_cell(const std::string& cell) {
  std::size_t begin = cell.find_first_not_of(" \t");
  if (begin == std::string::npos) return std::nullopt;
  std::size_t end = cell.find_last_not_of(" \t") + 1;
  double value = 0.0;
  auto [ptr, ec] =
      std::from_chars(cell.data() + begin, cell.data() + end, value);
  if (ec != std::errc() || ptr != cell.data() + end) return std::nullopt;
  return value;
}

}  // namespace

CsvTable parse_csv(const std::string& text) {
  std::vector<std::vector<std::string>> records;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    records.push_back(split_record(line));
  }
  if (records.empty()) throw std::runtime_error("csv: empty input");

  CsvTable table;
  std::size_t first_data = 0;
  bool first_numeric = true;
  for (const auto& cell : records[0]) {
    if (!parse_cell(cell)) first_numeric = false;
  }
  if (!first_numeric) {
    table.header = records[0];
    first_data = 1;
    if (records.size() == 1) throw std::runtime_error("csv: header without data");
  }

  const std::size_t cols = records[first_data].size();
  const std::size_t rows = records.size() - first_data;
  table.values.resize(rows, cols);
  for (std::size_t i = first_data; i < records.size(); ++i) {
    if (records[i].size() != cols) {
      throw std::runtime_error("csv: row " + std::to_string(i + 1) + " has " +
                               std::to_string(records[i].size()) +
                               " cells, expected " + std::to_string(cols));
    }
    for (std::size_t c = 0; c < cols; ++c) {
      auto value = parse_cell(records[i][c]);
      if (!value || !std::isfinite(*value)) {
        throw std::runtime_error("csv: bad numeric cell at row " +
                                 std::to_string(i + 1) + " column " +
                                 std::to_string(c + 1));
      }
      table.values(i - first_data, c) = *value;
    }
  }
  return table;
}

CsvTable read_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("csv: cannot open " + path);
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_csv(buffer.str());
}

std::string format_double(double value) {
  if (!std::isfinite(value)) {
    throw std::runtime_error("csv: refusing to write non-finite value");
  }
  char buf[40];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value,
                                 std::chars_format::general, 17);
  (void)ec;
  return std::string(buf, ptr);
}

void write_csv(const std::string& path, const Matrix& values,
               const std::vector<std::string>& header) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("csv: cannot write " + path);
  if (!header.empty()) {
    for (std::size_t i = 0; i < header.size(); ++i) {
      if (i) out << ',';
      out << header[i];
    }
    out << '\n';
  }
  for (Eigen::Index i = 0; i < values.rows(); ++i) {
    for (Eigen::Index j = 0; j < values.cols(); ++j) {
      if (j) out << ',';
      out << format_double(values(i, j));
    }
    out << '\n';
  }
}

Json sim_spec_to_json(const SimSpec& spec) {
  Json j{{"schema", 1},
         {"n", spec.n},
         {"p", spec.p},
         {"s_star", spec.s_star},
         {"r_star", spec.r_star},
         {"lambda_max", spec.lambda_max},
         {"lambda_min", spec.lambda_min},
         {"sigma2_star", spec.sigma2_star},
         {"seed", spec.seed}};
  if (spec.theta_norm2_override) {
    j["theta_norm2_override"] = *spec.theta_norm2_override;
  }
  return j;
}

SimSpec sim_spec_from_json(const Json& j) {
  SimSpec spec;
  spec.n = j.value("n", spec.n);
  spec.p = j.value("p", spec.p);
  spec.s_star = j.value("s_star", spec.s_star);
  spec.r_star = j.value("r_star", spec.r_star);
  spec.lambda_max = j.value("lambda_max", spec.lambda_max);
  spec.lambda_min = j.value("lambda_min", spec.lambda_min);
  spec.sigma2_star = j.value("sigma2_star", spec.sigma2_star);
  spec.seed = j.value("seed", spec.seed);
  if (j.contains("theta_norm2_override") && !j["theta_norm2_override"].is_null()) {
    spec.theta_norm2_override = j["theta_norm2_override"].get<double>();
  }
  spec.validate();
  return spec;
}

Json hyperparameters_to_json(const Hyperparameters& hp) {
  return Json{{"schema", 1},
              {"lambda1", hp.lambda1},
              {"lambda0", hp.lambda0},
              {"alpha1", hp.alpha1},
              {"alpha2", hp.alpha2},
              {"sigma_a", hp.sigma_a},
              {"sigma_b", hp.sigma_b},
              {"slab", hp.slab == Slab::kLaplaceProduct ? "laplace" : "normal"},
              {"em_norm", hp.em_norm == EmNorm::kL1 ? "l1" : "l2"},
              {"max_iter", hp.max_iter},
              {"delta", hp.delta},
              {"iota", hp.iota},
              {"inclusion_threshold", hp.inclusion_threshold},
              {"estimate_sigma2", hp.estimate_sigma2},
              {"sigma2_init", hp.sigma2_init},
              {"em_path_stages", hp.em_path_stages}};
}

Hyperparameters hyperparameters_from_json(const Json& j) {
  Hyperparameters hp;
  hp.lambda1 = j.value("lambda1", hp.lambda1);
  hp.lambda0 = j.value("lambda0", hp.lambda0);
  hp.alpha1 = j.value("alpha1", hp.alpha1);
  hp.alpha2 = j.value("alpha2", hp.alpha2);
  hp.sigma_a = j.value("sigma_a", hp.sigma_a);
  hp.sigma_b = j.value("sigma_b", hp.sigma_b);
  if (j.contains("slab")) {
    const std::string slab = j["slab"].get<std::string>();
    if (slab == "laplace") {
      hp.slab = Slab::kLaplaceProduct;
    } else if (slab == "normal") {
      hp.slab = Slab::kMultivariateNormal;
    } else {
      throw std::runtime_error("config: unknown slab '" + slab + "'");
    }
  }
  if (j.contains("em_norm")) {
    const std::string norm = j["em_norm"].get<std::string>();
    if (norm == "l1") {
      hp.em_norm = EmNorm::kL1;
    } else if (norm == "l2") {
      hp.em_norm = EmNorm::kL2;
    } else {
      throw std::runtime_error("config: unknown em_norm '" + norm + "'");
    }
  }
  hp.max_iter = j.value("max_iter", hp.max_iter);
  hp.delta = j.value("delta", hp.delta);
  hp.iota = j.value("iota", hp.iota);
  hp.inclusion_threshold = j.value("inclusion_threshold", hp.inclusion_threshold);
  hp.estimate_sigma2 = j.value("estimate_sigma2", hp.estimate_sigma2);
  hp.sigma2_init = j.value("sigma2_init", hp.sigma2_init);
  hp.em_path_stages = j.value("em_path_stages", hp.em_path_stages);
  hp.validate();
  return hp;
}

Json fit_result_to_json(const FitResult& fit, const std::string& algorithm,
                        int rank) {
  Json loadings = Json::array();
  for (Eigen::Index i = 0; i < fit.loadings.rows(); ++i) {
    Json row = Json::array();
    for (Eigen::Index j = 0; j < fit.loadings.cols(); ++j) {
      row.push_back(fit.loadings(i, j));
    }
    loadings.push_back(std::move(row));
  }
  Json inclusion = Json::array();
  if (fit.inclusion.cols() == 1) {
    for (Eigen::Index i = 0; i < fit.inclusion.rows(); ++i) {
      inclusion.push_back(fit.inclusion(i, 0));
    }
  } else {
    for (Eigen::Index i = 0; i < fit.inclusion.rows(); ++i) {
      Json row = Json::array();
      for (Eigen::Index j = 0; j < fit.inclusion.cols(); ++j) {
        row.push_back(fit.inclusion(i, j));
      }
      inclusion.push_back(std::move(row));
    }
  }
  Json support = Json::array();
  for (int j : fit.support) support.push_back(j + 1);  // 1-based externally
  return Json{{"schema", 1},
              {"algorithm", algorithm},
              {"rank", rank},
              {"sigma2", fit.sigma2},
              {"converged", fit.converged},
              {"iterations", fit.iterations},
              {"support", std::move(support)},
              {"inclusion", std::move(inclusion)},
              {"loadings", std::move(loadings)},
              {"trace", fit.trace}};
}

Json eval_report_to_json(const EvalReport& report) {
  return Json{{"schema", 1},
              {"frobenius_loss", report.frobenius_loss},
              {"misclassification_pct", report.misclassification_pct},
              {"fdr", report.fdr},
              {"fnr", report.fnr},
              {"overlaps", report.overlaps}};
}

void write_json(const std::string& path, const Json& j) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("json: cannot write " + path);
  out << j.dump(2) << '\n';
}

Json read_json(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("json: cannot open " + path);
  return Json::parse(in);
}

}  // namespace vbspca
