#pragma once

namespace vbspca {

// Standard normal CDF. Saturates to 0/1 for |x| beyond ~40.
double normal_cdf(double x);

// Standard normal density.
double normal_pdf(double x);

// Mean of the folded normal distribution: E|X| for X ~ N(u, s2),
//   f(u, s2) = sqrt(2 s2 / pi) exp(-u^2 / (2 s2)) + u (1 - 2 Phi(-u / sqrt(s2))).
// Returns |u| exactly below the s2 underflow floor. Throws for s2 <= 0.
double folded_normal_mean(double u, double s2);

struct FoldedNormalGrad {
  double du;   // d f / d u   = 1 - 2 Phi(-u / s)
  double ds2;  // d f / d s2  = phi(u / s) / s
};

// Partial derivatives of folded_normal_mean. Throws for s2 <= 0.
FoldedNormalGrad folded_normal_mean_grad(double u, double s2);

}  // namespace vbspca
