#include "vbspca/types.hpp"

#include <cmath>

namespace vbspca {

DataMatrix DataMatrix::create(Matrix values) {
  if (values.rows() < 2) {
    throw std::invalid_argument("DataMatrix: need at least 2 observations");
  }
  if (values.cols() < 1) {
    throw std::invalid_argument("DataMatrix: need at least 1 variable");
  }
  if (!values.allFinite()) {
    throw std::invalid_argument("DataMatrix: non-finite entry");
  }
  return DataMatrix{std::move(values)};
}

double Hyperparameters::lambda0_for(int p) const {
  if (lambda0 > 0.0) return lambda0;
  return static_cast<double>(p) * p * std::log(static_cast<double>(p));
}

void Hyperparameters::validate() const {
  if (lambda1 <= 0.0) throw std::invalid_argument("lambda1 must be positive");
  if (alpha1 <= 0.0) throw std::invalid_argument("alpha1 must be positive");
  if (alpha2 < 0.0) throw std::invalid_argument("alpha2 must be positive or 0 (auto)");
  if (sigma_a <= 0.0 || sigma_b <= 0.0) {
    throw std::invalid_argument("sigma_a and sigma_b must be positive");
  }
  if (max_iter < 1) throw std::invalid_argument("max_iter must be >= 1");
  if (delta <= 0.0) throw std::invalid_argument("delta must be positive");
  if (iota <= 0.0 || iota > 1.0) throw std::invalid_argument("iota must be in (0, 1]");
  if (inclusion_threshold <= 0.0 || inclusion_threshold >= 1.0) {
    throw std::invalid_argument("inclusion_threshold must be in (0, 1)");
  }
  if (lambda0 < 0.0) throw std::invalid_argument("lambda0 must be positive or 0 (auto)");
  if (em_path_stages < 2) throw std::invalid_argument("em_path_stages must be >= 2");
}

Matrix VariationalState::xi_block(int j) const {
  if (slab == Slab::kMultivariateNormal) {
    return d_l * xi_tilde * d_l.transpose();
  }
  return d_l * psi_tilde.row(j).asDiagonal() * d_l.transpose();
}

}  // namespace vbspca
