#pragma once

#include <optional>

#include "vbspca/types.hpp"

namespace vbspca {

// E-step with entrywise inclusion: plugs the exact mean-field moments of
// theta into the score posterior.
EStepStats batch_e_step(const DataMatrix& x, const BatchVariationalState& state);

// Row update (normal slab only): the linear system is row-independent, so
// the shared inverse (lambda1 I + sum H_i)^{-1} is computed once.
struct BatchRowSystem {
  Matrix inverse;  // r x r
  Vector psi;      // its diagonal
};
BatchRowSystem batch_row_system(const EStepStats& stats, double lambda1);
Vector batch_update_row(int j, const EStepStats& stats, const BatchRowSystem& sys);

// Entrywise logits for row j (r-vector).
Vector batch_update_h(int j, const Vector& u_tilde_j, const Vector& psi_j,
                      const EStepStats& stats, const Hyperparameters& hp,
                      double sigma2, double alpha2);

double batch_update_sigma2(const DataMatrix& x, const BatchVariationalState& state,
                           const EStepStats& stats, const Hyperparameters& hp);

// Recovery of mu / Psi (the PX-CAVI machinery with diagonal blocks), then
// the original-space logits and z_theta recomputed from the recovered
// quantities.
void batch_recover(BatchVariationalState& state, const EStepStats& stats,
                   const Hyperparameters& hp, double alpha2);

BatchVariationalState make_batch_init(const DataMatrix& x, int r,
                                      const Hyperparameters& hp);

FitResult fit_batch_px_cavi(const DataMatrix& x, int r, const Hyperparameters& hp,
                            std::optional<BatchVariationalState> init = std::nullopt);

}  // namespace vbspca
