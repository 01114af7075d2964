#pragma once

#include <vector>

#include "vbspca/types.hpp"

namespace vbspca {

struct EvalReport {
  double frobenius_loss = 0.0;
  double misclassification_pct = 0.0;
  double fdr = 0.0;
  double fnr = 0.0;
  std::vector<double> overlaps;  // |<U_hat_k, U_star_k>| per column
};

// ||U U' - U* U*'||_F via the Gram identity sqrt(r + r* - 2 ||U' U*||_F^2).
// Inputs must have orthonormal columns within 1e-6.
double projection_frobenius(const Matrix& u_hat, const Matrix& u_star);

// Thin-QR orthonormalization of a loadings matrix; near-zero columns are
// dropped (the projection loses that direction).
Matrix orthonormalize_loadings(const Matrix& loadings);

// 100 * Hamming(thresholded z, gamma*) / length. `raw` skips the
// thresholding of z and uses |z - gamma*| directly.
double misclassification(const Vector& z, const std::vector<bool>& gamma_star,
                         double threshold, bool raw = false);

struct FdrFnr {
  double fdr = 0.0;
  double fnr = 0.0;
};
FdrFnr fdr_fnr(const std::vector<int>& support_hat,
               const std::vector<int>& support_star, int p);

// |<U_hat_k, U_star_k>| for the first min(r, r*) columns; columns are
// normalized internally.
std::vector<double> column_overlaps(const Matrix& u_hat, const Matrix& u_star);

// Full report for a fit against a ground truth. Batch mode flattens the
// entrywise inclusion to p*r coordinates.
EvalReport evaluate_fit(const FitResult& fit, const GroundTruth& gt,
                        double threshold, bool raw_misclassification = false);

}  // namespace vbspca
