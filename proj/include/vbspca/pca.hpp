#pragma once

#include "vbspca/types.hpp"

namespace vbspca {

// Eigensystem of the sample second-moment matrix X'X / (n - 1), leading
// min(n, p) pairs only, eigenvalues descending. Computed through the SVD of X
// so the p > n case never materializes a p x p matrix.
struct SampleSpectrum {
  Vector values;   // min(n, p), descending
  Matrix vectors;  // p x min(n, p)
};
SampleSpectrum sample_spectrum(const Matrix& x);

// Smallest eigenvalue of the sample Gram above the numerical-rank cutoff.
double min_nonzero_eigenvalue(const SampleSpectrum& spectrum);

// Conventional-PCA loadings: top-r eigenvectors scaled by
// sqrt(max(eigenvalue - sigma2, eps)).
Matrix pca_loadings(const SampleSpectrum& spectrum, int r, double sigma2);

// Result of the SVD-based recovery of orthogonal-column loadings.
// Satisfies loadings * rotation == input (up to round-off), with each
// loadings column flipped so its largest-magnitude entry is positive.
struct Recovery {
  Matrix loadings;  // p x r, mutually orthogonal columns (W * S)
  Matrix rotation;  // r x r orthogonal (V')
};
Recovery recover_orthogonal(const Matrix& u_hat);

// || A A' - B B' ||_F without forming p x p matrices, via
// ||AA'-BB'||_F^2 = ||A'A||_F^2 + ||B'B||_F^2 - 2 ||A'B||_F^2.
double projection_diff_frobenius(const Matrix& a, const Matrix& b);

// Lower Cholesky factor; one jitter retry (1e-10 I) before giving up.
Matrix cholesky_lower(const Matrix& m);

// Logistic with logits clamped to [-500, 500].
double clamped_logistic(double h);

}  // namespace vbspca
