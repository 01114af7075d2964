#pragma once

#include <optional>
#include <random>

#include "vbspca/types.hpp"

namespace vbspca {

using Rng = std::mt19937_64;

// One simulation setting. Spike eigenvalues are equally spaced from
// lambda_max down to lambda_min; a rank-one setting uses lambda_max alone
// unless theta_norm2_override is given.
struct SimSpec {
  int n = 200;
  int p = 100;
  int s_star = 20;
  int r_star = 1;
  double lambda_max = 20.0;
  double lambda_min = 10.0;
  double sigma2_star = 0.1;
  std::optional<double> theta_norm2_override;
  std::int64_t seed = 0;

  void validate() const;
};

// Haar-distributed matrix with orthonormal columns (QR of an iid Gaussian
// matrix, R-diagonal signs absorbed). Requires cols <= rows.
Matrix random_orthonormal(int rows, int cols, Rng& rng);

// Draws the support uniformly without replacement and embeds an
// s* x r* Haar block on the support rows. Uses a generator seeded with
// spec.seed, so equal specs give identical truths.
GroundTruth make_ground_truth(const SimSpec& spec);

// n draws of X_i = theta* w_i + sigma eps_i (never forms the p x p
// covariance).
DataMatrix sample_dataset(const GroundTruth& gt, Rng& rng);

// Generator for the data stream paired with a ground truth; kept distinct
// from the truth stream so both are individually reproducible.
Rng data_rng(const GroundTruth& gt);

// Convenience: truth + dataset from one spec.
std::pair<GroundTruth, DataMatrix> simulate(const SimSpec& spec);

}  // namespace vbspca
