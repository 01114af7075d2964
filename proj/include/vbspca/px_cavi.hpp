#pragma once

#include <optional>

#include "vbspca/types.hpp"

namespace vbspca {

// Latent-score moments given the current recovered state.
EStepStats e_step(const DataMatrix& x, const VariationalState& state);

// Normal-slab row update. The r x r block is row-independent:
//   XiTilde = (h_sum + lambda1 I)^{-1},  u_tilde_j = XiTilde xw_j.
Matrix normal_slab_xi_tilde(const EStepStats& stats, double lambda1);
Vector update_row_normal(int j, const EStepStats& stats, const Matrix& xi_tilde);

// Laplace-slab row update: joint stationary point of the coordinate
// objective over (u_tilde_j, diag XiTilde_j), found by cyclic safeguarded
// Newton with bisection fallback. Warm-started from the previous iterate.
struct LaplaceRowResult {
  Vector u;    // r
  Vector psi;  // r, positive
  bool converged = true;
};
LaplaceRowResult update_row_laplace(int j, const EStepStats& stats,
                                    const Hyperparameters& hp, double sigma2,
                                    const Vector& u_warm, const Vector& psi_warm);

// Inclusion logit for row j, after the row update. `xi_diag` holds the
// Laplace diagonal; ignored for the normal slab (shared block passed
// instead).
double update_h_normal(int j, const Vector& u_tilde_j, const Matrix& xi_tilde,
                       const EStepStats& stats, const Hyperparameters& hp,
                       double sigma2, double alpha2);
double update_h_laplace(int j, const Vector& u_tilde_j, const Vector& psi_j,
                        const EStepStats& stats, const Hyperparameters& hp,
                        double sigma2, double alpha2);

// Noise-variance update. Closed form for the normal slab; bracketed 1-D
// minimization (golden section on log sigma2) for the Laplace slab.
double update_sigma2(const DataMatrix& x, const VariationalState& state,
                     const EStepStats& stats, const Hyperparameters& hp);

// Original-space recovery: D = h_sum / n, u_hat = u_tilde D_L, SVD, sign fix.
void recover_original_space(VariationalState& state, const EStepStats& stats);

// Algorithm stop rule:
// max(||mu mu' - mu0 mu0'||_F, ||z - z0||_1) <= delta.
double convergence_metric(const Matrix& mu_prev, const Vector& z_prev,
                          const Matrix& mu_curr, const Vector& z_curr);
bool converged(const VariationalState& prev, const VariationalState& curr,
               double delta);

// Default initialization: conventional-PCA means, z = 1, Xi_j = 1e-3 I,
// sigma2 = smallest nonzero sample-Gram eigenvalue (unless overridden).
VariationalState make_cavi_init(const DataMatrix& x, int r,
                                const Hyperparameters& hp);

// Full PX-CAVI loop.
FitResult fit_px_cavi(const DataMatrix& x, int r, const Hyperparameters& hp,
                      std::optional<VariationalState> init = std::nullopt);

}  // namespace vbspca
