#include "vbspca/metrics.hpp"

#include <Eigen/QR>
#include <algorithm>
#include <cmath>

namespace vbspca {

double projection_frobenius(const Matrix& u_hat, const Matrix& u_star) {
  auto check_orthonormal = [](const Matrix& u, const char* name) {
    Matrix gram = u.transpose() * u;
    gram -= Matrix::Identity(u.cols(), u.cols());
    if (gram.cwiseAbs().maxCoeff() > 1e-6) {
      throw std::invalid_argument(std::string("projection_frobenius: ") + name +
                                  " does not have orthonormal columns");
    }
  };
  check_orthonormal(u_hat, "u_hat");
  check_orthonormal(u_star, "u_star");
  const double cross = (u_hat.transpose() * u_star).squaredNorm();
  const double sq = u_hat.cols() + u_star.cols() - 2.0 * cross;
  return std::sqrt(std::max(sq, 0.0));
}

Matrix orthonormalize_loadings(const Matrix& loadings) {
  const int p = static_cast<int>(loadings.rows());
  const int r = static_cast<int>(loadings.cols());
  std::vector<int> keep;
  const double scale = loadings.cwiseAbs().maxCoeff();
  for (int k = 0; k < r; ++k) {
    if (loadings.col(k).norm() > std::max(scale, 1.0) * 1e-12) keep.push_back(k);
  }
  if (keep.empty()) return Matrix::Zero(p, 0);
  Matrix sub(p, keep.size());
  for (std::size_t i = 0; i < keep.size(); ++i) sub.col(i) = loadings.col(keep[i]);
  Eigen::HouseholderQR<Matrix> qr(sub);
  Matrix q = qr.householderQ() * Matrix::Identity(p, sub.cols());
  return q;
}

double misclassification(const Vector& z, const std::vector<bool>& gamma_star,
                         double threshold, bool raw) {
  if (static_cast<std::size_t>(z.size()) != gamma_star.size()) {
    throw std::invalid_argument("misclassification: length mismatch");
  }
  double sum = 0.0;
  for (int j = 0; j < z.size(); ++j) {
    const double truth = gamma_star[j] ? 1.0 : 0.0;
    const double est = raw ? z(j) : (z(j) > threshold ? 1.0 : 0.0);
    sum += std::abs(est - truth);
  }
  return 100.0 * sum / z.size();
}

FdrFnr fdr_fnr(const std::vector<int>& support_hat,
               const std::vector<int>& support_star, int p) {
  std::vector<bool> star(p, false);
  for (int j : support_star) star[j] = true;
  std::vector<bool> hat(p, false);
  for (int j : support_hat) hat[j] = true;
  int false_pos = 0;
  int false_neg = 0;
  for (int j : support_hat) {
    if (!star[j]) ++false_pos;
  }
  for (int j : support_star) {
    if (!hat[j]) ++false_neg;
  }
  FdrFnr out;
  out.fdr = false_pos / std::max<double>(support_hat.size(), 1.0);
  out.fnr = false_neg / std::max<double>(support_star.size(), 1.0);
  return out;
}

std::vector<double> column_overlaps(const Matrix& u_hat, const Matrix& u_star) {
  const int k = static_cast<int>(std::min(u_hat.cols(), u_star.cols()));
  std::vector<double> out(k, 0.0);
  for (int i = 0; i < k; ++i) {
    const double na = u_hat.col(i).norm();
    const double nb = u_star.col(i).norm();
    if (na < 1e-300 || nb < 1e-300) continue;
    out[i] = std::abs(u_hat.col(i).dot(u_star.col(i))) / (na * nb);
  }
  return out;
}

EvalReport evaluate_fit(const FitResult& fit, const GroundTruth& gt,
                        double threshold, bool raw_misclassification) {
  EvalReport report;
  Matrix u_hat = orthonormalize_loadings(fit.loadings);
  if (u_hat.cols() == 0) {
    report.frobenius_loss = std::sqrt(static_cast<double>(gt.r_star));
  } else {
    report.frobenius_loss = projection_frobenius(u_hat, gt.u_star);
  }

  std::vector<bool> row_truth(gt.p, false);
  for (int j : gt.support) row_truth[j] = true;

  if (fit.inclusion.cols() == 1) {
    report.misclassification_pct = misclassification(
        fit.inclusion.col(0), row_truth, threshold, raw_misclassification);
  } else {
    // Batch mode: flatten the p x r inclusion entrywise against the
    // row-replicated truth.
    const int r = static_cast<int>(fit.inclusion.cols());
    Vector flat(gt.p * r);
    std::vector<bool> truth_flat(gt.p * r);
    for (int j = 0; j < gt.p; ++j) {
      for (int k = 0; k < r; ++k) {
        flat(j * r + k) = fit.inclusion(j, k);
        truth_flat[j * r + k] = row_truth[j];
      }
    }
    report.misclassification_pct =
        misclassification(flat, truth_flat, threshold, raw_misclassification);
  }

  FdrFnr rates = fdr_fnr(fit.support, gt.support, gt.p);
  report.fdr = rates.fdr;
  report.fnr = rates.fnr;
  report.overlaps = column_overlaps(fit.loadings, gt.u_star);
  return report;
}

}  // namespace vbspca
