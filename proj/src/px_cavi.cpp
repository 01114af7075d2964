#include "vbspca/px_cavi.hpp"

#include <cassert>
#include <cmath>
#include <limits>

#include "vbspca/pca.hpp"
#include "vbspca/special_functions.hpp"

namespace vbspca {

namespace {

constexpr double kPi = 3.14159265358979323846;

void check_finite(const Matrix& m, const char* what, int iteration) {
  if (!m.allFinite()) {
    throw std::runtime_error(std::string("px-cavi: non-finite ") + what +
                             " at iteration " + std::to_string(iteration));
  }
}

// 1-D root of an increasing gradient by safeguarded Newton: steps that leave
// [lo, hi] fall back to bisection. grad(lo) <= 0 <= grad(hi) required.
template <typename G, typename H>
double newton_bisect(double x0, double lo, double hi, G grad, H hess,
                     double tol, int max_steps, bool* hit_cap) {
  double x = std::clamp(x0, lo, hi);
  for (int it = 0; it < max_steps; ++it) {
    const double g = grad(x);
    if (std::abs(g) < tol) return x;
    if (g > 0.0) {
      hi = x;
    } else {
      lo = x;
    }
    const double h = hess(x);
    double next = (h > 0.0) ? x - g / h : std::numeric_limits<double>::quiet_NaN();
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    if (next == x) return x;
    x = next;
  }
  if (hit_cap != nullptr) *hit_cap = true;
  return x;
}

}  // namespace

EStepStats e_step(const DataMatrix& x, const VariationalState& state) {
  const int n = x.n();
  const int r = state.r();
  const double sigma2 = state.sigma2;

  // sum_j z_j (mu_j' mu_j + sigma2 Xi_j)
  Matrix mu_sum = state.mu.transpose() * state.z.asDiagonal() * state.mu;
  Matrix xi_sum(r, r);
  if (state.slab == Slab::kMultivariateNormal) {
    xi_sum = state.z.sum() * (state.d_l * state.xi_tilde * state.d_l.transpose());
  } else {
    Vector psi_weighted = state.psi_tilde.transpose() * state.z;  // r
    xi_sum = state.d_l * psi_weighted.asDiagonal() * state.d_l.transpose();
  }

  EStepStats stats;
  Matrix precision =
      mu_sum / sigma2 + xi_sum + Matrix::Identity(r, r);
  Eigen::LLT<Matrix> llt(precision);
  if (llt.info() != Eigen::Success) {
    throw std::runtime_error(
        "e_step: score precision not PD (min diagonal " +
        std::to_string(precision.diagonal().minCoeff()) + ")");
  }
  stats.v_w = llt.solve(Matrix::Identity(r, r));
  stats.v_w = 0.5 * (stats.v_w + stats.v_w.transpose()).eval();

  Matrix zmu = state.z.asDiagonal() * state.mu;  // p x r
  stats.omega = (x.values * zmu) * stats.v_w / sigma2;
  stats.h_sum = stats.omega.transpose() * stats.omega + n * stats.v_w;
  stats.xw = x.values.transpose() * stats.omega;
  check_finite(stats.omega, "E-step scores", state.iteration);
  return stats;
}

Matrix normal_slab_xi_tilde(const EStepStats& stats, double lambda1) {
  const int r = static_cast<int>(stats.h_sum.rows());
  Matrix a = stats.h_sum + lambda1 * Matrix::Identity(r, r);
  Matrix xi = Eigen::LLT<Matrix>(a).solve(Matrix::Identity(r, r));
  return 0.5 * (xi + xi.transpose());
}

Vector update_row_normal(int j, const EStepStats& stats, const Matrix& xi_tilde) {
  return xi_tilde * stats.xw.row(j).transpose();
}

LaplaceRowResult update_row_laplace(int j, const EStepStats& stats,
                                    const Hyperparameters& hp, double sigma2,
                                    const Vector& u_warm, const Vector& psi_warm) {
  const int r = static_cast<int>(stats.h_sum.rows());
  const double lambda1 = hp.lambda1;
  const Matrix& hs = stats.h_sum;
  const Vector xwj = stats.xw.row(j).transpose();

  LaplaceRowResult out;
  out.u = u_warm;
  out.psi = psi_warm;

  constexpr double kGradTol = 1e-8;
  constexpr int kMaxSweeps = 200;
  constexpr int kMaxInner = 200;

  bool hit_cap = false;
  for (int sweep = 0; sweep < kMaxSweeps; ++sweep) {
    double worst = 0.0;
    for (int k = 0; k < r; ++k) {
      // u_k: (1/sigma2)(h_kk u + c_k) + lambda1 erf(u / (s sqrt 2)) = 0,
      // with c_k the coupling through the off-diagonal of h_sum.
      const double hkk = hs(k, k);
      const double ck = hs.row(k).dot(out.u) - hkk * out.u(k) - xwj(k);
      const double s2k = sigma2 * out.psi(k);

      auto ugrad = [&](double u) {
        return (hkk * u + ck) / sigma2 +
               lambda1 * folded_normal_mean_grad(u, s2k).du;
      };
      auto uhess = [&](double u) {
        const double s = std::sqrt(s2k);
        return hkk / sigma2 + lambda1 * 2.0 * normal_pdf(u / s) / s;
      };
      const double span = (std::abs(ck) + lambda1 * sigma2) / hkk + 1.0;
      out.u(k) = newton_bisect(out.u(k), -span, span, ugrad, uhess, kGradTol,
                               kMaxInner, &hit_cap);

      // psi_k: h_kk/2 - 1/(2 psi) + lambda1 sigma2 d f/d s2 (u, sigma2 psi) = 0.
      const double uk = out.u(k);
      auto pgrad = [&](double psi) {
        return 0.5 * hkk - 0.5 / psi +
               lambda1 * sigma2 * folded_normal_mean_grad(uk, sigma2 * psi).ds2;
      };
      auto phess = [&](double psi) {
        // d/d psi of the gradient; the penalty part is
        // lambda1 sigma2^2 * d2 f / d s2^2 with
        // d2 f/d s2^2 = phi(u/s) (u^2/s^2 - 1) / (2 s^3), s = sqrt(sigma2 psi).
        const double s2 = sigma2 * psi;
        const double s = std::sqrt(s2);
        const double t = uk / s;
        const double d2f = normal_pdf(t) * (t * t - 1.0) / (2.0 * s2 * s);
        return 0.5 / (psi * psi) + lambda1 * sigma2 * sigma2 * d2f;
      };
      // Root lies in (0, 1/h_kk]; expand the lower end until bracketed.
      double lo = std::min(out.psi(k), 1.0 / hkk);
      while (pgrad(lo) > 0.0 && lo > 1e-290) lo *= 0.5;
      out.psi(k) = newton_bisect(out.psi(k), lo, 1.0 / hkk, pgrad, phess,
                                 kGradTol, kMaxInner, &hit_cap);

      worst = std::max(worst, std::abs(ugrad(out.u(k))));
      worst = std::max(worst, std::abs(pgrad(out.psi(k))));
    }
    if (worst < kGradTol) {
      out.converged = !hit_cap;
      return out;
    }
  }
  out.converged = false;
  return out;
}

// TEMPORARY experiment knobs (removed after calibration).
#include <cstdlib>
static double knob(const char* name, double dflt) {
  const char* v = std::getenv(name);
  return v ? std::atof(v) : dflt;
}

double update_h_normal(int j, const Vector& u_tilde_j, const Matrix& xi_tilde,
                       const EStepStats& stats, const Hyperparameters& hp,
                       double sigma2, double alpha2) {
  const int r = static_cast<int>(u_tilde_j.size());
  const double quad = u_tilde_j.dot(stats.h_sum * u_tilde_j) -
                      2.0 * stats.xw.row(j).dot(u_tilde_j) +
                      sigma2 * (xi_tilde * stats.h_sum).trace();
  const double log_det = std::log(xi_tilde.determinant());
  // Slab N(0, sigma2/lambda1 I): penalty carries the 1/sigma2 scale of the
  // row updates, keeping every coordinate step a descent step of one
  // objective.
  const double pen_scale = knob("VB_PEN_SIGMA", 1.0) > 0.5 ? 1.0 / sigma2 : 1.0;
  const double pen =
      0.5 * hp.lambda1 * pen_scale *
      (u_tilde_j.squaredNorm() + sigma2 * xi_tilde.trace());
  return knob("VB_PRIOR", 1.0) * std::log(hp.alpha1 / alpha2) +
         0.5 * r * std::log(hp.lambda1) - pen +
         knob("VB_DET", 1.0) * 0.5 * (log_det + 1.0) - quad / (2.0 * sigma2);
}

double update_h_normal_odds(int j, const Vector& u_tilde_j,
                            const Matrix& xi_tilde, const EStepStats& stats,
                            const Hyperparameters& hp, double sigma2,
                            double log_odds) {
  const int r = static_cast<int>(u_tilde_j.size());
  const double quad = u_tilde_j.dot(stats.h_sum * u_tilde_j) -
                      2.0 * stats.xw.row(j).dot(u_tilde_j) +
                      sigma2 * (xi_tilde * stats.h_sum).trace();
  const double log_det = std::log(xi_tilde.determinant());
  const double pen = 0.5 * hp.lambda1 / sigma2 *
                     (u_tilde_j.squaredNorm() + sigma2 * xi_tilde.trace());
  return log_odds + 0.5 * r * std::log(hp.lambda1) - pen +
         0.5 * (log_det + 1.0) - quad / (2.0 * sigma2);
}

double update_h_laplace(int j, const Vector& u_tilde_j, const Vector& psi_j,
                        const EStepStats& stats, const Hyperparameters& hp,
                        double sigma2, double alpha2) {
  const int r = static_cast<int>(u_tilde_j.size());
  double fsum = 0.0;
  double log_det = 0.0;
  double trace_term = 0.0;
  for (int k = 0; k < r; ++k) {
    fsum += folded_normal_mean(u_tilde_j(k), sigma2 * psi_j(k));
    log_det += std::log(psi_j(k));
    trace_term += psi_j(k) * stats.h_sum(k, k);
  }
  const double quad = u_tilde_j.dot(stats.h_sum * u_tilde_j) -
                      2.0 * stats.xw.row(j).dot(u_tilde_j) +
                      sigma2 * trace_term;
  return std::log(hp.alpha1 / alpha2) +
         r * std::log(std::sqrt(kPi) * std::sqrt(sigma2) * hp.lambda1 /
                      std::sqrt(2.0)) -
         hp.lambda1 * fsum + 0.5 * (log_det + 1.0) - quad / (2.0 * sigma2);
}

namespace {

// sigma2-dependent part of the Laplace objective (everything else constant).
double laplace_sigma2_objective(double sigma2, const VariationalState& state,
                                const EStepStats& stats,
                                const Hyperparameters& hp, double tr_xx,
                                const Vector& quad_no_tr) {
  const int p = state.p();
  const int r = state.r();
  const int n = static_cast<int>(stats.omega.rows());
  double value = 0.0;
  for (int j = 0; j < p; ++j) {
    if (state.z(j) == 0.0) continue;
    double fsum = 0.0;
    for (int k = 0; k < r; ++k) {
      fsum += folded_normal_mean(state.u_tilde(j, k),
                                 sigma2 * state.psi_tilde(j, k));
    }
    value += state.z(j) * (quad_no_tr(j) / (2.0 * sigma2) -
                           0.5 * r * std::log(sigma2) + hp.lambda1 * fsum);
  }
  value += 0.5 * (static_cast<double>(n) * p + 2.0 * hp.sigma_a + 2.0) *
               std::log(sigma2) +
           (tr_xx + 2.0 * hp.sigma_b) / (2.0 * sigma2);
  return value;
}

}  // namespace

double update_sigma2(const DataMatrix& x, const VariationalState& state,
                     const EStepStats& stats, const Hyperparameters& hp) {
  const int n = x.n();
  const int p = x.p();
  const double tr_xx = x.values.squaredNorm();
  const double denom = static_cast<double>(n) * p + 2.0 * hp.sigma_a + 2.0;

  Vector quad_no_tr =
      (state.u_tilde.cwiseProduct(state.u_tilde * stats.h_sum)).rowwise().sum() -
      2.0 * (state.u_tilde.cwiseProduct(stats.xw)).rowwise().sum();

  if (state.slab == Slab::kMultivariateNormal) {
    const Vector row_norms = state.u_tilde.rowwise().squaredNorm();
    const double acc =
        state.z.dot(quad_no_tr + hp.lambda1 * row_norms);
    return (tr_xx + acc + 2.0 * hp.sigma_b) / denom;
  }

  // Laplace: golden section on log sigma2 over [1e-8, tr(X'X)/n].
  double lo = std::log(1e-8);
  double hi = std::log(std::max(tr_xx / n, 1e-6));
  auto f = [&](double logs2) {
    return laplace_sigma2_objective(std::exp(logs2), state, stats, hp, tr_xx,
                                    quad_no_tr);
  };
  const double gr = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = lo, b = hi;
  double c = b - gr * (b - a);
  double d = a + gr * (b - a);
  double fc = f(c), fd = f(d);
  while ((b - a) > 1e-10 * std::max(1.0, std::abs(a) + std::abs(b))) {
    if (fc < fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - gr * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + gr * (b - a);
      fd = f(d);
    }
  }
  return std::exp(0.5 * (a + b));
}

void recover_original_space(VariationalState& state, const EStepStats& stats) {
  const int n = static_cast<int>(stats.omega.rows());
  state.d_mat = stats.h_sum / n;
  state.d_l = cholesky_lower(state.d_mat);
  Matrix u_hat = state.u_tilde * state.d_l;
  Recovery rec = recover_orthogonal(u_hat);
  state.mu = std::move(rec.loadings);
  state.a_mat = std::move(rec.rotation);
}

double convergence_metric(const Matrix& mu_prev, const Vector& z_prev,
                          const Matrix& mu_curr, const Vector& z_curr) {
  return std::max(projection_diff_frobenius(mu_curr, mu_prev),
                  (z_curr - z_prev).lpNorm<1>());
}

bool converged(const VariationalState& prev, const VariationalState& curr,
               double delta) {
  return convergence_metric(prev.mu, prev.z, curr.mu, curr.z) <= delta;
}

VariationalState make_cavi_init(const DataMatrix& x, int r,
                                const Hyperparameters& hp) {
  const int p = x.p();
  SampleSpectrum spectrum = sample_spectrum(x.values);
  VariationalState state;
  state.slab = hp.slab;
  state.sigma2 = hp.sigma2_init > 0.0 ? hp.sigma2_init
                                      : min_nonzero_eigenvalue(spectrum);
  state.mu = pca_loadings(spectrum, r, state.sigma2);
  state.u_tilde = state.mu;  // D = I, A = I at start
  state.xi_tilde = 1e-3 * Matrix::Identity(r, r);
  state.psi_tilde = Matrix::Constant(p, r, 1e-3);
  state.z = Vector::Ones(p);
  state.h = Vector::Constant(p, 500.0);
  state.d_mat = Matrix::Identity(r, r);
  state.d_l = Matrix::Identity(r, r);
  state.a_mat = Matrix::Identity(r, r);
  state.iteration = 0;
  return state;
}

FitResult fit_px_cavi(const DataMatrix& x, int r, const Hyperparameters& hp,
                      std::optional<VariationalState> init) {
  hp.validate();
  if (r < 1 || r > std::min(x.n(), x.p())) {
    throw std::invalid_argument("fit_px_cavi: rank out of range");
  }
  const int p = x.p();
  const double alpha2 = hp.alpha2_for(p);

  VariationalState state = init ? std::move(*init) : make_cavi_init(x, r, hp);
  FitResult result;

  Matrix mu_prev = state.mu;
  Vector z_prev = state.z;

  for (int t = 0; t < hp.max_iter; ++t) {
    state.iteration = t;
    EStepStats stats = e_step(x, state);

    if (hp.slab == Slab::kMultivariateNormal) {
      state.xi_tilde = normal_slab_xi_tilde(stats, hp.lambda1);
      state.u_tilde = stats.xw * state.xi_tilde;
      const char* odds_knob = std::getenv("VB_DIGAMMA");
      if (odds_knob != nullptr && std::atoi(odds_knob) == 1) {
        // Variational q(kappa): E[logit kappa] via digammas.
        auto digamma = [](double x) {
          double acc = 0.0;
          while (x < 6.0) { acc -= 1.0 / x; x += 1.0; }
          const double inv = 1.0 / x;
          return acc + std::log(x) - 0.5 * inv - inv * inv / 12.0 +
                 inv * inv * inv * inv / 120.0;
        };
        const double zsum = state.z.sum();
        const double odds =
            digamma(hp.alpha1 + zsum) - digamma(alpha2 + p - zsum);
        for (int j = 0; j < p; ++j) {
          state.h(j) =
              update_h_normal_odds(j, state.u_tilde.row(j).transpose(),
                                   state.xi_tilde, stats, hp, state.sigma2, odds);
        }
      } else {
        for (int j = 0; j < p; ++j) {
          state.h(j) = update_h_normal(j, state.u_tilde.row(j).transpose(),
                                       state.xi_tilde, stats, hp, state.sigma2,
                                       alpha2);
        }
      }
    } else {
      for (int j = 0; j < p; ++j) {
        LaplaceRowResult row = update_row_laplace(
            j, stats, hp, state.sigma2, state.u_tilde.row(j).transpose(),
            state.psi_tilde.row(j).transpose());
        if (!row.converged) ++result.solver_warnings;
        state.u_tilde.row(j) = row.u.transpose();
        state.psi_tilde.row(j) = row.psi.transpose();
        state.h(j) = update_h_laplace(j, row.u, row.psi, stats, hp,
                                      state.sigma2, alpha2);
      }
    }
    for (int j = 0; j < p; ++j) state.z(j) = clamped_logistic(state.h(j));

    if (hp.estimate_sigma2) {
      state.sigma2 = update_sigma2(x, state, stats, hp);
    }

    recover_original_space(state, stats);
    check_finite(state.mu, "recovered means", t);
    assert(state.sigma2 > 0.0);
    assert(state.z.minCoeff() >= 0.0 && state.z.maxCoeff() <= 1.0);

    const double metric =
        convergence_metric(mu_prev, z_prev, state.mu, state.z);
    result.trace.push_back(metric);
    result.iterations = t + 1;
    if (metric <= hp.delta) {
      result.converged = true;
      break;
    }
    mu_prev = state.mu;
    z_prev = state.z;
  }

  // Posterior-mean loadings E_q[theta_j] = z_j mu_j.
  result.loadings = state.z.asDiagonal() * state.mu;
  result.inclusion = state.z;
  result.sigma2 = state.sigma2;
  for (int j = 0; j < p; ++j) {
    if (state.z(j) > hp.inclusion_threshold) result.support.push_back(j);
  }
  return result;
}

}  // namespace vbspca
