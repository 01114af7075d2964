#pragma once

#include <optional>

#include "vbspca/types.hpp"

namespace vbspca {

// E-step: score moments (omega, V_w), tempered responsibilities, and the
// completed-data sufficient statistics M = sum omega omega' + n V_w,
// M = M_L M_L', d_j = M_L^{-1} sum_i omega_i X_ij.
void em_e_step(const DataMatrix& x, EmState& state, const Hyperparameters& hp,
               double lambda0);

// Row M-step: minimizes (1/2 sigma2) ||M_L' b - d_j||^2 + pen_j ||b||_q over
// b = beta_tilde_j'. The normal equations use M itself:
// (M + scaled penalty) b = sum_i omega_i X_ij.
// q = 1: cyclic coordinate descent (lasso); q = 2: group soft threshold with
// a 1-D Newton solve for the norm.
Vector em_m_step_row(const Matrix& m_mat, const Vector& c_j, double pen_j,
                     double sigma2, EmNorm norm, bool* hit_cap);

// kappa = (alpha1 + ||gamma||_1 - 1) / (p + alpha1 + alpha2 - 2), clamped.
double em_update_kappa(const Vector& gamma, const Hyperparameters& hp,
                       double alpha2);

// sigma2 from the completed-data expectation, with theta in original space.
double em_update_sigma2(const DataMatrix& x, const EmState& state,
                        const Hyperparameters& hp);

// Objective Q up to its additive constant.
double em_objective(const EmState& state, const Hyperparameters& hp,
                    double lambda0, double alpha2);

// theta = W S from the SVD of beta_tilde D_L^{-1} (D = M/n), same sign
// convention as PX-CAVI; U holds the normalized columns.
void recover_theta_em(EmState& state);

// Initial state: conventional-PCA theta, kappa at its prior mean.
EmState make_em_init(const DataMatrix& x, int r, const Hyperparameters& hp);

// Warm-started sweep over a geometric lambda0 grid from
// lambda1 + 2 sqrt(rho_min) to lambda0_for(p), running the EM loop to its
// stop rule at every stage.
EmState path_following_init(const DataMatrix& x, int r, const Hyperparameters& hp);

FitResult fit_px_em(const DataMatrix& x, int r, const Hyperparameters& hp,
                    std::optional<EmState> init = std::nullopt);

}  // namespace vbspca
