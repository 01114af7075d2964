#include "vbspca/pca.hpp"

#include <Eigen/SVD>
#include <algorithm>
#include <cmath>

namespace vbspca {

SampleSpectrum sample_spectrum(const Matrix& x) {
  const int n = static_cast<int>(x.rows());
  Eigen::BDCSVD<Matrix> svd(x, Eigen::ComputeThinV);
  SampleSpectrum out;
  out.values = svd.singularValues().array().square() / (n - 1.0);
  out.vectors = svd.matrixV();
  return out;
}

double min_nonzero_eigenvalue(const SampleSpectrum& spectrum) {
  const double cutoff = spectrum.values(0) * 1e-10;
  double smallest = spectrum.values(0);
  for (int i = 0; i < spectrum.values.size(); ++i) {
    if (spectrum.values(i) > cutoff) smallest = spectrum.values(i);
  }
  return std::max(smallest, 1e-12);
}

Matrix pca_loadings(const SampleSpectrum& spectrum, int r, double sigma2) {
  const int k = static_cast<int>(spectrum.values.size());
  if (r > k) throw std::invalid_argument("pca_loadings: r exceeds sample rank");
  Matrix loadings = spectrum.vectors.leftCols(r);
  for (int j = 0; j < r; ++j) {
    loadings.col(j) *= std::sqrt(std::max(spectrum.values(j) - sigma2, 1e-8));
  }
  return loadings;
}

Recovery recover_orthogonal(const Matrix& u_hat) {
  Eigen::BDCSVD<Matrix> svd(u_hat, Eigen::ComputeThinU | Eigen::ComputeThinV);
  Recovery out;
  out.loadings = svd.matrixU() * svd.singularValues().asDiagonal();
  out.rotation = svd.matrixV().transpose();
  // Deterministic sign: largest-|entry| of each column made positive.
  for (int k = 0; k < out.loadings.cols(); ++k) {
    int imax = 0;
    out.loadings.col(k).cwiseAbs().maxCoeff(&imax);
    if (out.loadings(imax, k) < 0.0) {
      out.loadings.col(k) *= -1.0;
      out.rotation.row(k) *= -1.0;
    }
  }
  return out;
}

double projection_diff_frobenius(const Matrix& a, const Matrix& b) {
  const double sq = (a.transpose() * a).squaredNorm() +
                    (b.transpose() * b).squaredNorm() -
                    2.0 * (a.transpose() * b).squaredNorm();
  return std::sqrt(std::max(sq, 0.0));
}

Matrix cholesky_lower(const Matrix& m) {
  Eigen::LLT<Matrix> llt(m);
  if (llt.info() == Eigen::Success) return llt.matrixL();
  Matrix jittered = m + 1e-10 * Matrix::Identity(m.rows(), m.cols());
  Eigen::LLT<Matrix> retry(jittered);
  if (retry.info() != Eigen::Success) {
    throw std::runtime_error("cholesky_lower: matrix not positive definite");
  }
  return retry.matrixL();
}

double clamped_logistic(double h) {
  const double c = std::clamp(h, -500.0, 500.0);
  return 1.0 / (1.0 + std::exp(-c));
}

}  // namespace vbspca
