#include "vbspca/special_functions.hpp"

#include <cmath>
#include <stdexcept>

namespace vbspca {

namespace {
constexpr double kSqrt2 = 1.4142135623730950488;
constexpr double kSqrt2Pi = 2.5066282746310005024;
constexpr double kSqrt2OverPi = 0.79788456080286535588;
// Below this variance the distribution is a point mass at |u| in double
// precision.
constexpr double kS2Floor = 1e-300;
}  // namespace

double normal_cdf(double x) { return 0.5 * std::erfc(-x / kSqrt2); }

double normal_pdf(double x) { return std::exp(-0.5 * x * x) / kSqrt2Pi; }

double folded_normal_mean(double u, double s2) {
  if (!(s2 > 0.0)) {
    throw std::domain_error("folded_normal_mean: s2 must be positive");
  }
  if (s2 < kS2Floor) return std::abs(u);
  const double s = std::sqrt(s2);
  const double t = u / s;
  // erf(t / sqrt(2)) = 1 - 2 Phi(-t)
  return s * kSqrt2OverPi * std::exp(-0.5 * t * t) + u * std::erf(t / kSqrt2);
}

FoldedNormalGrad folded_normal_mean_grad(double u, double s2) {
  if (!(s2 > 0.0)) {
    throw std::domain_error("folded_normal_mean_grad: s2 must be positive");
  }
  if (s2 < kS2Floor) {
    return {u >= 0.0 ? 1.0 : -1.0, 0.0};
  }
  const double s = std::sqrt(s2);
  const double t = u / s;
  return {std::erf(t / kSqrt2), normal_pdf(t) / s};
}

}  // namespace vbspca
