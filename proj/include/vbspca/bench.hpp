#pragma once

#include <optional>
#include <string>
#include <vector>

#include "vbspca/io.hpp"
#include "vbspca/metrics.hpp"
#include "vbspca/synthetic.hpp"
#include "vbspca/types.hpp"

namespace vbspca {

enum class Algorithm {
  kPxCaviNormal,
  kPxCaviLaplace,
  kBatchPxCavi,
  kPxEmL1,
  kPxEmL2,
  kPca,
};

std::string algorithm_name(Algorithm a);
Algorithm algorithm_from_name(const std::string& name);

// Applies the algorithm-implied slab / norm settings to a base
// hyperparameter set.
Hyperparameters hyperparameters_for(Algorithm a, Hyperparameters hp);

// Dispatches a fit; kPca returns plain PCA loadings with all-ones inclusion.
FitResult run_algorithm(const DataMatrix& x, int r, Algorithm a,
                        const Hyperparameters& hp);

// Generate-fit-evaluate for one seed. The plug-in rank defaults to r_star.
EvalReport run_simulation(const SimSpec& spec, Algorithm a,
                          const Hyperparameters& hp,
                          std::optional<int> rank = std::nullopt,
                          FitResult* fit_out = nullptr);

struct BenchConfig {
  std::vector<SimSpec> settings;
  std::vector<Algorithm> algorithms;
  int replications = 100;
  Hyperparameters hp;
  std::string output = "bench.csv";
  int parallelism = 1;
  std::int64_t base_seed = 1;
  std::optional<int> rank;  // plug-in rank override

  static BenchConfig from_json(const Json& j);
};

struct BenchRow {
  SimSpec spec;
  Algorithm algorithm = Algorithm::kPxCaviNormal;
  int replications = 0;
  int failures = 0;
  double frob_mean = 0.0, frob_se = 0.0;
  double misc_mean = 0.0, misc_se = 0.0;
  double fdr_mean = 0.0;
  double fnr_mean = 0.0;
};

// Runs every (setting, algorithm) cell; replication seeds are
// setting seed + index so counts can grow without reshuffling earlier
// draws. Replications run on a bounded worker pool; aggregation is
// order-stable by replication index. Per-replication failures are counted
// and the run continues.
std::vector<BenchRow> run_bench(const BenchConfig& config);

// CSV with the fixed column set:
// p,s_star,r_star,theta_norm2,algorithm,reps,frob_mean,frob_se,misc_mean,
// misc_se,fdr_mean,fnr_mean
void write_bench_csv(const std::string& path, const std::vector<BenchRow>& rows);

// VBSPCA_THREADS overrides the configured parallelism when set.
int effective_parallelism(int configured);

}  // namespace vbspca
