#include "vbspca/bench.hpp"

#include <atomic>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <thread>

#include "vbspca/batch_px_cavi.hpp"
#include "vbspca/pca.hpp"
#include "vbspca/px_cavi.hpp"
#include "vbspca/px_em.hpp"

namespace vbspca {

std::string algorithm_name(Algorithm a) {
  switch (a) {
    case Algorithm::kPxCaviNormal: return "px_cavi_normal";
    case Algorithm::kPxCaviLaplace: return "px_cavi_laplace";
    case Algorithm::kBatchPxCavi: return "batch_px_cavi";
    case Algorithm::kPxEmL1: return "px_em_l1";
    case Algorithm::kPxEmL2: return "px_em_l2";
    case Algorithm::kPca: return "pca";
  }
  throw std::logic_error("unknown algorithm");
}

Algorithm algorithm_from_name(const std::string& name) {
  if (name == "px_cavi_normal") return Algorithm::kPxCaviNormal;
  if (name == "px_cavi_laplace") return Algorithm::kPxCaviLaplace;
  if (name == "batch_px_cavi") return Algorithm::kBatchPxCavi;
  if (name == "px_em_l1") return Algorithm::kPxEmL1;
  if (name == "px_em_l2") return Algorithm::kPxEmL2;
  if (name == "pca") return Algorithm::kPca;
  throw std::invalid_argument("unknown algorithm '" + name + "'");
}

Hyperparameters hyperparameters_for(Algorithm a, Hyperparameters hp) {
  switch (a) {
    case Algorithm::kPxCaviNormal:
    case Algorithm::kBatchPxCavi:
      hp.slab = Slab::kMultivariateNormal;
      break;
    case Algorithm::kPxCaviLaplace:
      hp.slab = Slab::kLaplaceProduct;
      break;
    case Algorithm::kPxEmL1:
      hp.em_norm = EmNorm::kL1;
      break;
    case Algorithm::kPxEmL2:
      hp.em_norm = EmNorm::kL2;
      break;
    case Algorithm::kPca:
      break;
  }
  return hp;
}

namespace {

FitResult fit_plain_pca(const DataMatrix& x, int r) {
  SampleSpectrum spectrum = sample_spectrum(x.values);
  FitResult result;
  result.loadings = spectrum.vectors.leftCols(r);
  result.inclusion = Matrix::Ones(x.p(), 1);
  result.support.resize(x.p());
  for (int j = 0; j < x.p(); ++j) result.support[j] = j;
  result.sigma2 = min_nonzero_eigenvalue(spectrum);
  result.iterations = 1;
  result.converged = true;
  return result;
}

}  // namespace

FitResult run_algorithm(const DataMatrix& x, int r, Algorithm a,
                        const Hyperparameters& base_hp) {
  Hyperparameters hp = hyperparameters_for(a, base_hp);
  switch (a) {
    case Algorithm::kPxCaviNormal:
    case Algorithm::kPxCaviLaplace:
      return fit_px_cavi(x, r, hp);
    case Algorithm::kBatchPxCavi:
      return fit_batch_px_cavi(x, r, hp);
    case Algorithm::kPxEmL1:
    case Algorithm::kPxEmL2:
      return fit_px_em(x, r, hp);
    case Algorithm::kPca:
      return fit_plain_pca(x, r);
  }
  throw std::logic_error("unknown algorithm");
}

EvalReport run_simulation(const SimSpec& spec, Algorithm a,
                          const Hyperparameters& hp, std::optional<int> rank,
                          FitResult* fit_out) {
  auto [gt, x] = simulate(spec);
  const int r = rank.value_or(spec.r_star);
  FitResult fit = run_algorithm(x, r, a, hp);
  EvalReport report = evaluate_fit(fit, gt, hp.inclusion_threshold);
  if (fit_out != nullptr) *fit_out = std::move(fit);
  return report;
}

BenchConfig BenchConfig::from_json(const Json& j) {
  BenchConfig config;
  if (!j.contains("settings") || !j["settings"].is_array() ||
      j["settings"].empty()) {
    throw std::runtime_error("bench config: 'settings' array required");
  }
  for (const auto& s : j["settings"]) {
    config.settings.push_back(sim_spec_from_json(s));
  }
  if (!j.contains("algorithms") || !j["algorithms"].is_array() ||
      j["algorithms"].empty()) {
    throw std::runtime_error("bench config: 'algorithms' array required");
  }
  for (const auto& a : j["algorithms"]) {
    config.algorithms.push_back(algorithm_from_name(a.get<std::string>()));
  }
  config.replications = j.value("replications", config.replications);
  if (config.replications < 1) {
    throw std::runtime_error("bench config: replications must be >= 1");
  }
  if (j.contains("hyperparameters")) {
    config.hp = hyperparameters_from_json(j["hyperparameters"]);
  }
  config.output = j.value("output", config.output);
  config.parallelism = j.value("parallelism", config.parallelism);
  config.base_seed = j.value("base_seed", config.base_seed);
  if (j.contains("rank") && !j["rank"].is_null()) {
    config.rank = j["rank"].get<int>();
  }
  return config;
}

int effective_parallelism(int configured) {
  if (const char* env = std::getenv("VBSPCA_THREADS")) {
    const int value = std::atoi(env);
    if (value >= 1) return value;
  }
  return std::max(configured, 1);
}

namespace {

struct CellStats {
  std::vector<double> frob, misc, fdr, fnr;
  int failures = 0;
};

double mean_of(const std::vector<double>& v) {
  if (v.empty()) return std::nan("");
  double s = 0.0;
  for (double x : v) s += x;
  return s / v.size();
}

double se_of(const std::vector<double>& v) {
  if (v.size() < 2) return std::nan("");
  const double m = mean_of(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / (v.size() - 1.0) / v.size());
}

}  // namespace

std::vector<BenchRow> run_bench(const BenchConfig& config) {
  const int workers = effective_parallelism(config.parallelism);
  std::vector<BenchRow> rows;

  for (const SimSpec& setting : config.settings) {
    for (Algorithm algo : config.algorithms) {
      const int reps = config.replications;
      std::vector<std::optional<EvalReport>> reports(reps);
      std::vector<std::string> errors(reps);
      std::atomic<int> next{0};

      auto worker = [&]() {
        for (int i = next.fetch_add(1); i < reps; i = next.fetch_add(1)) {
          SimSpec spec = setting;
          spec.seed = (setting.seed != 0 ? setting.seed : config.base_seed) + i;
          try {
            reports[i] = run_simulation(spec, algo, config.hp, config.rank);
          } catch (const std::exception& e) {
            errors[i] = e.what();
          }
        }
      };
      if (workers <= 1) {
        worker();
      } else {
        std::vector<std::thread> pool;
        for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
      }

      BenchRow row;
      row.spec = setting;
      row.algorithm = algo;
      row.replications = reps;
      CellStats stats;
      for (int i = 0; i < reps; ++i) {
        if (!reports[i]) {
          ++stats.failures;
          std::cerr << "warning: " << algorithm_name(algo) << " p="
                    << setting.p << " replication " << i << " failed: "
                    << errors[i] << '\n';
          continue;
        }
        stats.frob.push_back(reports[i]->frobenius_loss);
        stats.misc.push_back(reports[i]->misclassification_pct);
        stats.fdr.push_back(reports[i]->fdr);
        stats.fnr.push_back(reports[i]->fnr);
      }
      row.failures = stats.failures;
      row.frob_mean = mean_of(stats.frob);
      row.frob_se = se_of(stats.frob);
      row.misc_mean = mean_of(stats.misc);
      row.misc_se = se_of(stats.misc);
      row.fdr_mean = mean_of(stats.fdr);
      row.fnr_mean = mean_of(stats.fnr);
      rows.push_back(std::move(row));
    }
  }
  return rows;
}

void write_bench_csv(const std::string& path, const std::vector<BenchRow>& rows) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("bench: cannot write " + path);
  out << "p,s_star,r_star,theta_norm2,algorithm,reps,frob_mean,frob_se,"
         "misc_mean,misc_se,fdr_mean,fnr_mean\n";
  auto cell = [](double v) {
    return std::isnan(v) ? std::string("NA") : format_double(v);
  };
  for (const BenchRow& row : rows) {
    out << row.spec.p << ',' << row.spec.s_star << ',' << row.spec.r_star
        << ',';
    if (row.spec.theta_norm2_override) {
      out << format_double(*row.spec.theta_norm2_override);
    } else {
      out << "NA";
    }
    out << ',' << algorithm_name(row.algorithm) << ',' << row.replications
        << ',' << cell(row.frob_mean) << ',' << cell(row.frob_se) << ','
        << cell(row.misc_mean) << ',' << cell(row.misc_se) << ','
        << cell(row.fdr_mean) << ',' << cell(row.fnr_mean) << '\n';
  }
}

}  // namespace vbspca
