#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "vbspca/batch_px_cavi.hpp"
#include "vbspca/bench.hpp"
#include "vbspca/metrics.hpp"
#include "vbspca/px_cavi.hpp"
#include "vbspca/px_em.hpp"
#include "vbspca/special_functions.hpp"
#include "vbspca/synthetic.hpp"

namespace py = pybind11;
using namespace vbspca;

namespace {

Hyperparameters hp_from_kwargs(const py::kwargs& kwargs) {
  Hyperparameters hp;
  for (auto item : kwargs) {
    const std::string key = py::cast<std::string>(item.first);
    if (key == "lambda1") {
      hp.lambda1 = py::cast<double>(item.second);
    } else if (key == "lambda0") {
      hp.lambda0 = py::cast<double>(item.second);
    } else if (key == "alpha1") {
      hp.alpha1 = py::cast<double>(item.second);
    } else if (key == "alpha2") {
      hp.alpha2 = py::cast<double>(item.second);
    } else if (key == "sigma_a") {
      hp.sigma_a = py::cast<double>(item.second);
    } else if (key == "sigma_b") {
      hp.sigma_b = py::cast<double>(item.second);
    } else if (key == "slab") {
      const std::string slab = py::cast<std::string>(item.second);
      if (slab == "laplace") {
        hp.slab = Slab::kLaplaceProduct;
      } else if (slab == "normal") {
        hp.slab = Slab::kMultivariateNormal;
      } else {
        throw std::invalid_argument("slab must be 'laplace' or 'normal'");
      }
    } else if (key == "em_norm") {
      const std::string norm = py::cast<std::string>(item.second);
      if (norm == "l1") {
        hp.em_norm = EmNorm::kL1;
      } else if (norm == "l2") {
        hp.em_norm = EmNorm::kL2;
      } else {
        throw std::invalid_argument("em_norm must be 'l1' or 'l2'");
      }
    } else if (key == "max_iter") {
      hp.max_iter = py::cast<int>(item.second);
    } else if (key == "delta") {
      hp.delta = py::cast<double>(item.second);
    } else if (key == "iota") {
      hp.iota = py::cast<double>(item.second);
    } else if (key == "inclusion_threshold") {
      hp.inclusion_threshold = py::cast<double>(item.second);
    } else if (key == "estimate_sigma2") {
      hp.estimate_sigma2 = py::cast<bool>(item.second);
    } else if (key == "sigma2_init") {
      hp.sigma2_init = py::cast<double>(item.second);
    } else if (key == "em_path_stages") {
      hp.em_path_stages = py::cast<int>(item.second);
    } else {
      throw std::invalid_argument("unknown hyperparameter '" + key + "'");
    }
  }
  return hp;
}

py::dict result_to_dict(const FitResult& fit) {
  py::dict d;
  d["loadings"] = fit.loadings;
  d["inclusion"] = fit.inclusion;
  py::list support;
  for (int j : fit.support) support.append(j + 1);  // 1-based, as in result.json
  d["support"] = support;
  d["sigma2"] = fit.sigma2;
  d["iterations"] = fit.iterations;
  d["converged"] = fit.converged;
  d["trace"] = fit.trace;
  return d;
}

}  // namespace

PYBIND11_MODULE(_vbspca, m) {
  m.doc() = "Spike-and-slab Bayesian sparse PCA (PX-CAVI, batch PX-CAVI, PX-EM)";

  m.def(
      "fit_px_cavi",
      [](const Matrix& x, int rank, const py::kwargs& kwargs) {
        return result_to_dict(
            fit_px_cavi(DataMatrix::create(x), rank, hp_from_kwargs(kwargs)));
      },
      py::arg("x"), py::arg("rank"),
      "Jointly row-sparse PX-CAVI. Keyword arguments override the default "
      "hyperparameters (lambda1, alpha1, alpha2, slab='normal'|'laplace', "
      "max_iter, delta, estimate_sigma2, sigma2_init, ...).");

  m.def(
      "fit_batch_px_cavi",
      [](const Matrix& x, int rank, const py::kwargs& kwargs) {
        return result_to_dict(fit_batch_px_cavi(DataMatrix::create(x), rank,
                                                hp_from_kwargs(kwargs)));
      },
      py::arg("x"), py::arg("rank"),
      "Entrywise-sparsity batch PX-CAVI (normal slab).");

  m.def(
      "fit_px_em",
      [](const Matrix& x, int rank, const py::kwargs& kwargs) {
        return result_to_dict(
            fit_px_em(DataMatrix::create(x), rank, hp_from_kwargs(kwargs)));
      },
      py::arg("x"), py::arg("rank"),
      "MAP estimation by tempered PX-EM with path-following initialization "
      "(em_norm='l1'|'l2').");

  m.def(
      "simulate",
      [](int n, int p, int s_star, int r_star, double lambda_max,
         double lambda_min, double sigma2_star, py::object theta_norm2,
         std::int64_t seed) {
        SimSpec spec;
        spec.n = n;
        spec.p = p;
        spec.s_star = s_star;
        spec.r_star = r_star;
        spec.lambda_max = lambda_max;
        spec.lambda_min = lambda_min;
        spec.sigma2_star = sigma2_star;
        if (!theta_norm2.is_none()) {
          spec.theta_norm2_override = py::cast<double>(theta_norm2);
        }
        spec.seed = seed;
        auto [gt, x] = simulate(spec);
        py::dict truth;
        py::list support;
        for (int j : gt.support) support.append(j + 1);
        truth["support"] = support;
        truth["u_star"] = gt.u_star;
        truth["lambda_star"] = gt.lambda_star;
        truth["sigma2_star"] = gt.sigma2_star;
        return py::make_tuple(x.values, truth);
      },
      py::arg("n"), py::arg("p"), py::arg("s_star"), py::arg("r_star"),
      py::arg("lambda_max") = 20.0, py::arg("lambda_min") = 10.0,
      py::arg("sigma2_star") = 0.1, py::arg("theta_norm2") = py::none(),
      py::arg("seed") = 0,
      "Draws (X, truth) from the spiked covariance model.");

  m.def("projection_frobenius", &projection_frobenius, py::arg("u_hat"),
        py::arg("u_star"),
        "Frobenius distance between the spanned projections.");
  m.def("orthonormalize_loadings", &orthonormalize_loadings, py::arg("loadings"));
  m.def("column_overlaps", &column_overlaps, py::arg("u_hat"), py::arg("u_star"));

  m.def("normal_cdf", &normal_cdf, py::arg("x"));
  m.def("folded_normal_mean", &folded_normal_mean, py::arg("u"), py::arg("s2"));
  m.def(
      "folded_normal_mean_grad",
      [](double u, double s2) {
        auto g = folded_normal_mean_grad(u, s2);
        return py::make_tuple(g.du, g.ds2);
      },
      py::arg("u"), py::arg("s2"));

#ifdef VBSPCA_VERSION
  m.attr("__version__") = VBSPCA_VERSION;
#else
  m.attr("__version__") = "dev";
#endif
}
