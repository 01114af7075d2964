#include "vbspca/batch_px_cavi.hpp"

#include <cassert>
#include <cmath>

#include "vbspca/pca.hpp"

namespace vbspca {

EStepStats batch_e_step(const DataMatrix& x, const BatchVariationalState& state) {
  const int n = x.n();
  const int r = state.r();
  const double sigma2 = state.sigma2;

  // Mean-field moments in the original space:
  //   E[theta_jk]          = z_jk mu_jk
  //   E[theta_jk theta_jl] = z_jk z_jl mu_jk mu_jl            (k != l)
  //   E[theta_jk^2]        = z_jk (mu_jk^2 + sigma2 Psi_jk)
  Matrix m = state.z_theta.cwiseProduct(state.mu);  // p x r
  Matrix second = m.transpose() * m;                // off-diagonal part
  Vector diag_corr =
      (state.z_theta.cwiseProduct(state.mu.cwiseProduct(state.mu) +
                                  sigma2 * state.psi) -
       m.cwiseProduct(m))
          .colwise()
          .sum();
  second += diag_corr.asDiagonal();

  EStepStats stats;
  Matrix precision = second / sigma2 + Matrix::Identity(r, r);
  Eigen::LLT<Matrix> llt(precision);
  if (llt.info() != Eigen::Success) {
    throw std::runtime_error("batch_e_step: score precision not PD");
  }
  stats.v_w = llt.solve(Matrix::Identity(r, r));
  stats.v_w = 0.5 * (stats.v_w + stats.v_w.transpose()).eval();
  stats.omega = (x.values * m) * stats.v_w / sigma2;
  stats.h_sum = stats.omega.transpose() * stats.omega + n * stats.v_w;
  stats.xw = x.values.transpose() * stats.omega;
  return stats;
}

BatchRowSystem batch_row_system(const EStepStats& stats, double lambda1) {
  const int r = static_cast<int>(stats.h_sum.rows());
  Matrix a = stats.h_sum + lambda1 * Matrix::Identity(r, r);
  BatchRowSystem sys;
  sys.inverse = Eigen::LLT<Matrix>(a).solve(Matrix::Identity(r, r));
  sys.inverse = 0.5 * (sys.inverse + sys.inverse.transpose()).eval();
  sys.psi = sys.inverse.diagonal();
  return sys;
}

Vector batch_update_row(int j, const EStepStats& stats, const BatchRowSystem& sys) {
  return sys.inverse * stats.xw.row(j).transpose();
}

Vector batch_update_h(int j, const Vector& u_tilde_j, const Vector& psi_j,
                      const EStepStats& stats, const Hyperparameters& hp,
                      double sigma2, double alpha2) {
  const int r = static_cast<int>(u_tilde_j.size());
  // Per-coordinate pieces of the summed quadratic:
  //   -2 X_ij u_j o omega_i     -> -2 u_j o xw_j
  //   Diag(u_j' u_j H_i)        -> u_j o (h_sum u_j)   (u'u is the outer
  //                                product of the row vector u_j)
  //   sigma2 Psi_j o Diag(H_i)  -> sigma2 Psi_j o diag(h_sum)
  Vector quad = u_tilde_j.cwiseProduct(stats.h_sum * u_tilde_j) -
                2.0 * u_tilde_j.cwiseProduct(stats.xw.row(j).transpose()) +
                sigma2 * psi_j.cwiseProduct(stats.h_sum.diagonal());
  const double prior_const =
      std::log(hp.alpha1 / alpha2) + 0.5 + 0.5 * std::log(hp.lambda1);
  // Slab scaling as in the joint normal-slab update (see update_h_normal).
  Vector pen = 0.5 * hp.lambda1 / sigma2 *
               (u_tilde_j.cwiseProduct(u_tilde_j) + sigma2 * psi_j);
  Vector h = -quad / (2.0 * sigma2) +
             Vector::Constant(r, prior_const) +
             0.5 * psi_j.array().log().matrix() - pen;
  return h;
}

double batch_update_sigma2(const DataMatrix& x, const BatchVariationalState& state,
                           const EStepStats& stats, const Hyperparameters& hp) {
  const int n = x.n();
  const int p = x.p();
  const double tr_xx = x.values.squaredNorm();
  Matrix m = state.z.cwiseProduct(state.u_tilde);  // m_j = z_j o u_j
  const double quad =
      (m.cwiseProduct(m * stats.h_sum)).sum() -
      2.0 * (m.cwiseProduct(stats.xw)).sum() +
      hp.lambda1 * m.squaredNorm();
  return (tr_xx + quad + 2.0 * hp.sigma_b) /
         (static_cast<double>(n) * p + 2.0 * (hp.sigma_a + 1.0));
}

void batch_recover(BatchVariationalState& state, const EStepStats& stats,
                   const Hyperparameters& hp, double alpha2) {
  const int n = static_cast<int>(stats.omega.rows());
  const int p = state.p();
  const int r = state.r();
  state.d_mat = stats.h_sum / n;
  state.d_l = cholesky_lower(state.d_mat);
  Recovery rec = recover_orthogonal(state.u_tilde * state.d_l);
  state.mu = std::move(rec.loadings);
  state.a_mat = std::move(rec.rotation);
  // Psi_jk = (D_L diag(PsiTilde_j) D_L')_kk
  Matrix dl_sq = state.d_l.cwiseProduct(state.d_l);  // r x r
  state.psi = state.psi_tilde * dl_sq.transpose();
  // Original-space logits: the same display evaluated at (mu, Psi).
  for (int j = 0; j < p; ++j) {
    Vector h_theta = batch_update_h(j, state.mu.row(j).transpose(),
                                    state.psi.row(j).transpose(), stats, hp,
                                    state.sigma2, alpha2);
    for (int k = 0; k < r; ++k) {
      state.z_theta(j, k) = clamped_logistic(h_theta(k));
    }
  }
}

BatchVariationalState make_batch_init(const DataMatrix& x, int r,
                                      const Hyperparameters& hp) {
  const int p = x.p();
  SampleSpectrum spectrum = sample_spectrum(x.values);
  BatchVariationalState state;
  state.sigma2 = hp.sigma2_init > 0.0 ? hp.sigma2_init
                                      : min_nonzero_eigenvalue(spectrum);
  state.mu = pca_loadings(spectrum, r, state.sigma2);
  state.u_tilde = state.mu;
  state.psi_tilde = Matrix::Constant(p, r, 1e-3);
  state.psi = state.psi_tilde;
  state.z = Matrix::Ones(p, r);
  state.z_theta = Matrix::Ones(p, r);
  state.h = Matrix::Constant(p, r, 500.0);
  state.d_mat = Matrix::Identity(r, r);
  state.d_l = Matrix::Identity(r, r);
  state.a_mat = Matrix::Identity(r, r);
  return state;
}

FitResult fit_batch_px_cavi(const DataMatrix& x, int r, const Hyperparameters& hp,
                            std::optional<BatchVariationalState> init) {
  hp.validate();
  if (hp.slab == Slab::kLaplaceProduct) {
    throw std::invalid_argument(
        "fit_batch_px_cavi: only the normal slab is supported");
  }
  if (r < 1 || r > std::min(x.n(), x.p())) {
    throw std::invalid_argument("fit_batch_px_cavi: rank out of range");
  }
  const int p = x.p();
  const double alpha2 = hp.alpha2_for(p);

  BatchVariationalState state =
      init ? std::move(*init) : make_batch_init(x, r, hp);
  FitResult result;

  Matrix mu_prev = state.mu;
  Matrix z_theta_prev = state.z_theta;

  for (int t = 0; t < hp.max_iter; ++t) {
    state.iteration = t;
    EStepStats stats = batch_e_step(x, state);

    BatchRowSystem sys = batch_row_system(stats, hp.lambda1);
    state.u_tilde = stats.xw * sys.inverse;
    state.psi_tilde = sys.psi.transpose().replicate(p, 1);
    for (int j = 0; j < p; ++j) {
      Vector h = batch_update_h(j, state.u_tilde.row(j).transpose(), sys.psi,
                                stats, hp, state.sigma2, alpha2);
      state.h.row(j) = h.transpose();
      for (int k = 0; k < r; ++k) state.z(j, k) = clamped_logistic(h(k));
    }

    if (hp.estimate_sigma2) {
      state.sigma2 = batch_update_sigma2(x, state, stats, hp);
    }

    batch_recover(state, stats, hp, alpha2);
    assert(state.psi_tilde.minCoeff() > 0.0);

    const double metric =
        std::max(projection_diff_frobenius(state.mu, mu_prev),
                 (state.z_theta - z_theta_prev).lpNorm<1>());
    result.trace.push_back(metric);
    result.iterations = t + 1;
    if (metric <= hp.delta) {
      result.converged = true;
      break;
    }
    mu_prev = state.mu;
    z_theta_prev = state.z_theta;
  }

  // Posterior-mean loadings E[theta_jk] = z_theta_jk mu_jk.
  result.loadings = state.z_theta.cwiseProduct(state.mu);
  result.inclusion = state.z_theta;
  result.sigma2 = state.sigma2;
  for (int j = 0; j < p; ++j) {
    if (state.z_theta.row(j).maxCoeff() > hp.inclusion_threshold) {
      result.support.push_back(j);
    }
  }
  return result;
}

}  // namespace vbspca
