#include "vbspca/px_em.hpp"

#include <Eigen/Eigenvalues>
#include <cassert>
#include <cstdio>
#include <cstdlib>
#include <cmath>

#include "vbspca/pca.hpp"

namespace vbspca {

namespace {

double row_norm(const Eigen::RowVectorXd& v, EmNorm norm) {
  return norm == EmNorm::kL1 ? v.lpNorm<1>() : v.norm();
}

Vector lasso_cd(const Matrix& g, const Vector& c, double alpha, bool* hit_cap) {
  const int r = static_cast<int>(c.size());
  Vector b = Vector::Zero(r);
  constexpr int kMaxSweeps = 500;
  constexpr double kTol = 1e-10;
  for (int sweep = 0; sweep < kMaxSweeps; ++sweep) {
    double max_change = 0.0;
    for (int k = 0; k < r; ++k) {
      const double old = b(k);
      const double resid = c(k) - g.row(k).dot(b) + g(k, k) * old;
      const double mag = std::abs(resid) - alpha;
      const double next = mag > 0.0 ? std::copysign(mag, resid) / g(k, k) : 0.0;
      b(k) = next;
      max_change = std::max(max_change, std::abs(next - old));
    }
    if (max_change < kTol) return b;
  }
  if (hit_cap != nullptr) *hit_cap = true;
  return b;
}

Vector group_threshold(const Matrix& g, const Vector& c, double alpha,
                       bool* hit_cap) {
  const int r = static_cast<int>(c.size());
  if (c.norm() <= alpha) return Vector::Zero(r);
  // Solve (G + alpha/t I) b = c with t = ||b|| via the eigensystem of G:
  // sum_k ct_k^2 / (lambda_k t + alpha)^2 = 1 has a unique root.
  Eigen::SelfAdjointEigenSolver<Matrix> eig(g);
  const Vector lam = eig.eigenvalues();
  const Vector ct = eig.eigenvectors().transpose() * c;
  auto fn = [&](double t) {
    double s = 0.0;
    for (int k = 0; k < r; ++k) {
      const double denom = lam(k) * t + alpha;
      s += ct(k) * ct(k) / (denom * denom);
    }
    return s - 1.0;
  };
  double lo = 0.0;
  double hi = c.norm() / std::max(lam.minCoeff(), 1e-300);
  double t = std::min((c.norm() - alpha) / std::max(lam.maxCoeff(), 1e-300), hi);
  bool ok = false;
  for (int it = 0; it < 200; ++it) {
    const double f = fn(t);
    if (std::abs(f) < 1e-13) {
      ok = true;
      break;
    }
    if (f > 0.0) {
      lo = t;
    } else {
      hi = t;
    }
    // Newton step on the strictly decreasing fn.
    double deriv = 0.0;
    for (int k = 0; k < r; ++k) {
      const double denom = lam(k) * t + alpha;
      deriv += -2.0 * lam(k) * ct(k) * ct(k) / (denom * denom * denom);
    }
    double next = deriv < 0.0 ? t - f / deriv : 0.5 * (lo + hi);
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    if (next == t) {
      ok = true;
      break;
    }
    t = next;
  }
  if (!ok && hit_cap != nullptr) *hit_cap = true;
  Vector scaled(r);
  for (int k = 0; k < r; ++k) scaled(k) = ct(k) / (lam(k) + alpha / t);
  return eig.eigenvectors() * scaled;
}

}  // namespace

void em_e_step(const DataMatrix& x, EmState& state, const Hyperparameters& hp,
               double lambda0) {
  const int n = x.n();
  const int p = x.p();
  const int r = state.r();
  const double sigma2 = state.sigma2;

  Matrix precision = state.theta.transpose() * state.theta +
                     sigma2 * Matrix::Identity(r, r);
  Eigen::LLT<Matrix> llt(precision);
  state.v_w = sigma2 * llt.solve(Matrix::Identity(r, r));
  state.v_w = 0.5 * (state.v_w + state.v_w.transpose()).eval();
  state.omega = (x.values * state.theta) * llt.solve(Matrix::Identity(r, r));

  // Tempered responsibilities, in logit space:
  // gamma_j = logistic(iota [ (lambda0 - lambda1) ||theta_j||_q + logit kappa ]).
  const double log_odds =
      std::log(state.kappa) - std::log1p(-state.kappa);
  const EmNorm norm = hp.em_norm;
  const bool untempered_kappa =
      std::getenv("VB_EM_KAPPA_UNTEMPERED") != nullptr;
  for (int j = 0; j < p; ++j) {
    const double nj = row_norm(state.theta.row(j), norm);
    state.gamma(j) = clamped_logistic(
        hp.iota * ((lambda0 - hp.lambda1) * nj + log_odds));
    if (untempered_kappa) {
      state.gamma_kappa(j) =
          clamped_logistic((lambda0 - hp.lambda1) * nj + log_odds);
    } else {
      state.gamma_kappa(j) = state.gamma(j);
    }
  }

  state.m_mat = state.omega.transpose() * state.omega + n * state.v_w;
  state.m_l = cholesky_lower(state.m_mat);
  // d_j = M_L^{-1} sum_i omega_i X_ij; rows of d_vecs.
  Matrix xo = x.values.transpose() * state.omega;  // p x r
  state.d_vecs =
      state.m_l.triangularView<Eigen::Lower>().solve(xo.transpose()).transpose();
}

Vector em_m_step_row(const Matrix& m_mat, const Vector& c_j, double pen_j,
                     double sigma2, EmNorm norm, bool* hit_cap) {
  const double alpha = sigma2 * pen_j;
  if (norm == EmNorm::kL1) return lasso_cd(m_mat, c_j, alpha, hit_cap);
  return group_threshold(m_mat, c_j, alpha, hit_cap);
}

double em_update_kappa(const Vector& gamma, const Hyperparameters& hp,
                       double alpha2) {
  const double p = static_cast<double>(gamma.size());
  const double value = (hp.alpha1 + gamma.lpNorm<1>() - 1.0) /
                       (p + hp.alpha1 + alpha2 - 2.0);
  return std::clamp(value, 1e-12, 1.0 - 1e-12);
}

double em_update_sigma2(const DataMatrix& x, const EmState& state,
                        const Hyperparameters& hp) {
  const int n = x.n();
  const int p = x.p();
  const double tr_xx = x.values.squaredNorm();
  // cross term: sum_j theta_j (M_L d_j) = sum_j theta_j . (sum_i omega_i X_ij)
  Matrix ml_d = state.d_vecs * state.m_l.transpose();  // rows = (M_L d_j)'
  const double cross = (state.theta.cwiseProduct(ml_d)).sum();
  const double quad = (state.theta.cwiseProduct(state.theta * state.m_mat)).sum();
  const double value = (tr_xx - 2.0 * cross + quad + 2.0 * hp.sigma_b) /
                       (static_cast<double>(n) * p + 2.0 * (hp.sigma_a + 1.0));
  if (value <= 0.0) return 1e-10;
  return value;
}

double em_objective(const EmState& state, const Hyperparameters& hp,
                    double lambda0, double alpha2) {
  const int p = state.p();
  const double gsum = state.gamma.lpNorm<1>();
  double value = (gsum + hp.alpha1 - 1.0) * std::log(state.kappa) +
                 (p - gsum + alpha2 - 1.0) * std::log1p(-state.kappa);
  // ||M_L' beta_j' - d_j||^2 = beta_j M beta_j' - 2 beta_j (M_L d_j) + ||d_j||^2
  Matrix ml_d = state.d_vecs * state.m_l.transpose();
  const Vector quad =
      (state.beta_tilde.cwiseProduct(state.beta_tilde * state.m_mat))
          .rowwise()
          .sum() -
      2.0 * (state.beta_tilde.cwiseProduct(ml_d)).rowwise().sum() +
      state.d_vecs.rowwise().squaredNorm();
  for (int j = 0; j < p; ++j) {
    const double pen =
        state.gamma(j) * hp.lambda1 + (1.0 - state.gamma(j)) * lambda0;
    value -= quad(j) / (2.0 * state.sigma2) +
             pen * row_norm(state.beta_tilde.row(j), hp.em_norm);
  }
  return value;
}

void recover_theta_em(EmState& state) {
  const int n = static_cast<int>(state.omega.rows());
  Matrix d_l = state.m_l / std::sqrt(static_cast<double>(n));
  // The E-step conditions on the recovered theta (reduced model), so the
  // expansion is undone by scaling with D_L, as in the CAVI recovery; the
  // D_L^{-1} direction is an unstable map (scale drift compounds).
  Matrix b = state.beta_tilde * d_l;
  Recovery rec = recover_orthogonal(b);
  state.theta = std::move(rec.loadings);
  state.a_mat = std::move(rec.rotation);
  state.u = state.theta;
  for (int k = 0; k < state.u.cols(); ++k) {
    const double nrm = state.u.col(k).norm();
    if (nrm > 1e-12) state.u.col(k) /= nrm;
  }
}

EmState make_em_init(const DataMatrix& x, int r, const Hyperparameters& hp) {
  SampleSpectrum spectrum = sample_spectrum(x.values);
  EmState state;
  state.sigma2 = hp.sigma2_init > 0.0 ? hp.sigma2_init
                                      : min_nonzero_eigenvalue(spectrum);
  state.theta = pca_loadings(spectrum, r, state.sigma2);
  state.beta_tilde = state.theta;
  state.gamma = Vector::Constant(x.p(), 0.5);
  state.gamma_kappa = state.gamma;
  const double alpha2 = hp.alpha2_for(x.p());
  state.kappa = hp.alpha1 / (hp.alpha1 + alpha2);
  state.u = state.theta;
  state.a_mat = Matrix::Identity(r, r);
  return state;
}

namespace {

// One EM stage at fixed lambda0; returns the number of iterations used.
int em_stage(const DataMatrix& x, EmState& state, const Hyperparameters& hp,
             double lambda0, double alpha2, FitResult* result) {
  const int p = x.p();
  double q_prev = std::numeric_limits<double>::quiet_NaN();
  int iters = 0;
  for (int t = 0; t < hp.max_iter; ++t) {
    state.iteration = t;
    em_e_step(x, state, hp, lambda0);

    Matrix xo = state.d_vecs * state.m_l.transpose();  // rows = sum_i omega_i X_ij
    bool hit_cap = false;
    for (int j = 0; j < p; ++j) {
      const double pen =
          state.gamma(j) * hp.lambda1 + (1.0 - state.gamma(j)) * lambda0;
      state.beta_tilde.row(j) =
          em_m_step_row(state.m_mat, xo.row(j).transpose(), pen, state.sigma2,
                        hp.em_norm, &hit_cap)
              .transpose();
    }
    if (hit_cap && result != nullptr) ++result->solver_warnings;

    state.kappa = em_update_kappa(state.gamma_kappa, hp, alpha2);
    recover_theta_em(state);
    if (hp.estimate_sigma2) {
      state.sigma2 = em_update_sigma2(x, state, hp);
    }
    state.objective = em_objective(state, hp, lambda0, alpha2);
    if (result != nullptr) result->trace.push_back(state.objective);
    ++iters;
    if (std::getenv("VB_EM_DEBUG") != nullptr) {
      int nonzero = 0;
      for (int j = 0; j < p; ++j) {
        if (state.beta_tilde.row(j).norm() > 0.0) ++nonzero;
      }
      std::fprintf(stderr,
                   "    em t=%d lambda0=%.3g kappa=%.4g gsum=%.2f nnz=%d "
                   "|theta|=%.3f Q=%.6g\n",
                   t, lambda0, state.kappa, state.gamma.lpNorm<1>(), nonzero,
                   state.theta.norm(), state.objective);
    }

    if (!std::isfinite(state.objective)) {
      throw std::runtime_error("px-em: non-finite objective at iteration " +
                               std::to_string(t));
    }
    if (t > 0 &&
        std::abs(state.objective - q_prev) / (std::abs(q_prev) + 1.0) <=
            hp.delta) {
      return iters;
    }
    q_prev = state.objective;
  }
  return -iters;  // negative: stop rule not reached
}

std::vector<double> lambda0_grid(const DataMatrix& x, int r,
                                 const Hyperparameters& hp) {
  SampleSpectrum spectrum = sample_spectrum(x.values);
  const double rho_min = min_nonzero_eigenvalue(spectrum);
  const double first = hp.lambda1 + 2.0 * std::sqrt(rho_min);
  const double last = std::max(hp.lambda0_for(x.p()), first * (1.0 + 1e-9));
  const int stages = hp.em_path_stages;
  std::vector<double> grid(stages);
  const double ratio = std::pow(last / first, 1.0 / (stages - 1.0));
  for (int i = 0; i < stages; ++i) grid[i] = first * std::pow(ratio, i);
  grid.back() = last;
  return grid;
}

}  // namespace

EmState path_following_init(const DataMatrix& x, int r,
                            const Hyperparameters& hp) {
  hp.validate();
  const double alpha2 = hp.alpha2_for(x.p());
  EmState state = make_em_init(x, r, hp);
  const std::vector<double> grid = lambda0_grid(x, r, hp);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    try {
      em_stage(x, state, hp, grid[i], alpha2, nullptr);
    } catch (const std::exception& e) {
      throw std::runtime_error("path stage " + std::to_string(i + 1) + ": " +
                               e.what());
    }
  }
  return state;
}

FitResult fit_px_em(const DataMatrix& x, int r, const Hyperparameters& hp,
                    std::optional<EmState> init) {
  hp.validate();
  if (r < 1 || r > std::min(x.n(), x.p())) {
    throw std::invalid_argument("fit_px_em: rank out of range");
  }
  const int p = x.p();
  const double alpha2 = hp.alpha2_for(p);
  const double lambda0 = hp.lambda0_for(p);
  if (lambda0 <= hp.lambda1) {
    throw std::invalid_argument("fit_px_em: lambda0 must exceed lambda1");
  }

  EmState state = init ? std::move(*init) : path_following_init(x, r, hp);

  FitResult result;
  const int iters = em_stage(x, state, hp, lambda0, alpha2, &result);
  result.converged = iters > 0;
  result.iterations = std::abs(iters);
  result.loadings = state.theta;
  result.inclusion = state.gamma;
  result.sigma2 = state.sigma2;
  for (int j = 0; j < p; ++j) {
    if (state.gamma(j) > hp.inclusion_threshold) result.support.push_back(j);
  }
  return result;
}

}  // namespace vbspca
