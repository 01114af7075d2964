#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace vbspca {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// Slab density g ∝ exp(-lambda1 ||beta_j||_q^m).
enum class Slab {
  kLaplaceProduct,      // q = 1, m = 1
  kMultivariateNormal,  // q = 2, m = 2
};

// Norm used in the EM penalty (m = 1 in both cases).
enum class EmNorm { kL1, kL2 };

// n x p data matrix, observations in rows.
struct DataMatrix {
  Matrix values;

  int n() const { return static_cast<int>(values.rows()); }
  int p() const { return static_cast<int>(values.cols()); }

  // Validating constructor: n >= 2, p >= 1, all entries finite.
  static DataMatrix create(Matrix values);
};

// Latent state of the synthetic-data generator.
struct GroundTruth {
  int p = 0;
  int n = 0;
  int r_star = 0;
  int s_star = 0;
  std::vector<int> support;  // 0-based, sorted, |support| == s_star
  Matrix u_star;             // p x r*, orthonormal columns, zero rows off support
  Vector lambda_star;        // r* spike eigenvalues, non-increasing
  double sigma2_star = 0.0;
  std::int64_t seed = 0;
};

// Prior and algorithm constants. Zero-valued alpha2/lambda0 mean
// "derive from p at fit time" (p + 1 and p^2 log p respectively).
struct Hyperparameters {
  double lambda1 = 1.0;
  double lambda0 = 0.0;  // EM spike rate; 0 = auto
  double alpha1 = 1.0;
  double alpha2 = 0.0;  // 0 = auto (p + 1)
  double sigma_a = 1.0;
  double sigma_b = 2.0;
  Slab slab = Slab::kMultivariateNormal;
  EmNorm em_norm = EmNorm::kL1;
  int max_iter = 100;       // T
  double delta = 1e-4;      // stopping threshold
  double iota = 0.1;        // tempering exponent, in (0, 1]
  double inclusion_threshold = 0.5;
  bool estimate_sigma2 = false;
  double sigma2_init = 0.0;  // 0 = auto (smallest nonzero sample-Gram eigenvalue)
  int em_path_stages = 10;   // I

  double alpha2_for(int p) const { return alpha2 > 0.0 ? alpha2 : p + 1.0; }
  double lambda0_for(int p) const;
  void validate() const;
};

// Variational state of PX-CAVI. The normal slab keeps one shared r x r
// covariance block (the update is row-independent); the Laplace slab keeps
// per-row diagonals. Recovered original-space blocks are
// Xi_j = D_L XiTilde_j D_L'.
struct VariationalState {
  Slab slab = Slab::kMultivariateNormal;
  Matrix mu;         // p x r, recovered means
  Matrix u_tilde;    // p x r, expanded-space means
  Matrix xi_tilde;   // r x r shared block (normal slab)
  Matrix psi_tilde;  // p x r diagonal entries (Laplace slab)
  Vector z;          // p inclusion probabilities
  Vector h;          // p logits
  double sigma2 = 1.0;
  Matrix d_mat;  // r x r expansion matrix D
  Matrix d_l;    // lower Cholesky factor of D
  Matrix a_mat;  // r x r orthogonal rotation A
  int iteration = 0;

  int p() const { return static_cast<int>(mu.rows()); }
  int r() const { return static_cast<int>(mu.cols()); }

  // Recovered original-space covariance block Xi_j (r x r).
  Matrix xi_block(int j) const;
};

// Batch variant: entrywise inclusion, diagonal per-entry variances.
struct BatchVariationalState {
  Matrix mu;         // p x r, recovered means
  Matrix u_tilde;    // p x r, expanded-space means
  Matrix psi_tilde;  // p x r expanded-space variances
  Matrix psi;        // p x r recovered variances
  Matrix z;          // p x r, expanded-space inclusion
  Matrix h;          // p x r logits
  Matrix z_theta;    // p x r, recovered-space inclusion
  double sigma2 = 1.0;
  Matrix d_mat;
  Matrix d_l;
  Matrix a_mat;
  int iteration = 0;

  int p() const { return static_cast<int>(mu.rows()); }
  int r() const { return static_cast<int>(mu.cols()); }
};

// Moments of the latent scores from one E-step.
struct EStepStats {
  Matrix omega;  // n x r, row i = omega_i
  Matrix v_w;    // r x r, symmetric PD
  Matrix h_sum;  // r x r, sum_i omega_i omega_i' + n V_w
  Matrix xw;     // p x r, row j = sum_i X_ij omega_i
};

// State of PX-EM.
struct EmState {
  Matrix theta;       // p x r, recovered loadings
  Matrix beta_tilde;  // p x r, expanded-space coefficients
  Vector gamma;       // p tempered responsibilities
  Vector gamma_kappa;  // responsibilities feeding the kappa update
  double kappa = 0.5;
  double sigma2 = 1.0;
  Matrix omega;   // n x r
  Matrix v_w;     // r x r
  Matrix m_mat;   // r x r, sum omega omega' + n V_w
  Matrix m_l;     // lower Cholesky factor of m_mat
  Matrix d_vecs;  // p x r, row j = d_j'
  Matrix u;       // p x r, column-normalized loadings
  Matrix a_mat;   // r x r rotation
  double objective = 0.0;
  int iteration = 0;

  int p() const { return static_cast<int>(theta.rows()); }
  int r() const { return static_cast<int>(theta.cols()); }
};

struct FitResult {
  Matrix loadings;           // p x r (mu for CAVI, theta for EM)
  Matrix inclusion;          // p x 1, or p x r in batch mode
  std::vector<int> support;  // 0-based row indices above threshold
  double sigma2 = 0.0;
  int iterations = 0;
  bool converged = false;
  std::vector<double> trace;  // per-iteration convergence metric / objective
  int solver_warnings = 0;    // inner solves that hit their iteration cap
};

}  // namespace vbspca
