#include "vbspca/synthetic.hpp"

#include <Eigen/QR>
#include <algorithm>
#include <cmath>
#include <numeric>

namespace vbspca {

void SimSpec::validate() const {
  if (n < 2) throw std::invalid_argument("SimSpec: n must be >= 2");
  if (r_star < 1) throw std::invalid_argument("SimSpec: r_star must be >= 1");
  if (r_star > s_star || s_star > p) {
    throw std::invalid_argument("SimSpec: need r_star <= s_star <= p");
  }
  if (lambda_min > lambda_max) {
    throw std::invalid_argument("SimSpec: lambda_min > lambda_max");
  }
  if (lambda_min <= 0.0) throw std::invalid_argument("SimSpec: lambda_min must be positive");
  if (sigma2_star < 0.0) throw std::invalid_argument("SimSpec: sigma2_star must be >= 0");
  if (theta_norm2_override && *theta_norm2_override <= 0.0) {
    throw std::invalid_argument("SimSpec: theta_norm2_override must be positive");
  }
}

Matrix random_orthonormal(int rows, int cols, Rng& rng) {
  if (cols > rows) {
    throw std::invalid_argument("random_orthonormal: cols > rows");
  }
  std::normal_distribution<double> gauss(0.0, 1.0);
  Matrix g(rows, cols);
  for (int i = 0; i < rows; ++i) {
    for (int j = 0; j < cols; ++j) g(i, j) = gauss(rng);
  }
  Eigen::HouseholderQR<Matrix> qr(g);
  Matrix q = qr.householderQ() * Matrix::Identity(rows, cols);
  Matrix r = qr.matrixQR().topRows(cols).triangularView<Eigen::Upper>();
  for (int j = 0; j < cols; ++j) {
    if (r(j, j) < 0.0) q.col(j) *= -1.0;
  }
  return q;
}

GroundTruth make_ground_truth(const SimSpec& spec) {
  spec.validate();
  Rng rng(static_cast<std::uint64_t>(spec.seed));

  GroundTruth gt;
  gt.p = spec.p;
  gt.n = spec.n;
  gt.r_star = spec.r_star;
  gt.s_star = spec.s_star;
  gt.sigma2_star = spec.sigma2_star;
  gt.seed = spec.seed;

  // Support: uniform draw without replacement (partial Fisher-Yates).
  std::vector<int> idx(spec.p);
  std::iota(idx.begin(), idx.end(), 0);
  for (int i = 0; i < spec.s_star; ++i) {
    std::uniform_int_distribution<int> pick(i, spec.p - 1);
    std::swap(idx[i], idx[pick(rng)]);
  }
  gt.support.assign(idx.begin(), idx.begin() + spec.s_star);
  std::sort(gt.support.begin(), gt.support.end());

  Matrix block = random_orthonormal(spec.s_star, spec.r_star, rng);
  gt.u_star = Matrix::Zero(spec.p, spec.r_star);
  for (int i = 0; i < spec.s_star; ++i) {
    gt.u_star.row(gt.support[i]) = block.row(i);
  }

  gt.lambda_star = Vector(spec.r_star);
  if (spec.r_star == 1) {
    gt.lambda_star(0) =
        spec.theta_norm2_override ? *spec.theta_norm2_override : spec.lambda_max;
  } else {
    const double step =
        (spec.lambda_max - spec.lambda_min) / (spec.r_star - 1.0);
    for (int k = 0; k < spec.r_star; ++k) {
      gt.lambda_star(k) = spec.lambda_max - step * k;
    }
  }
  return gt;
}

DataMatrix sample_dataset(const GroundTruth& gt, Rng& rng) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  const double sigma = std::sqrt(gt.sigma2_star);
  Matrix theta = gt.u_star * gt.lambda_star.cwiseSqrt().asDiagonal();
  Matrix x(gt.n, gt.p);
  Vector w(gt.r_star);
  for (int i = 0; i < gt.n; ++i) {
    for (int k = 0; k < gt.r_star; ++k) w(k) = gauss(rng);
    x.row(i) = (theta * w).transpose();
    for (int j = 0; j < gt.p; ++j) x(i, j) += sigma * gauss(rng);
  }
  return DataMatrix{std::move(x)};
}

Rng data_rng(const GroundTruth& gt) {
  // Distinct stream from the truth generator.
  return Rng(static_cast<std::uint64_t>(gt.seed) ^ 0x9e3779b97f4a7c15ULL);
}

std::pair<GroundTruth, DataMatrix> simulate(const SimSpec& spec) {
  GroundTruth gt = make_ground_truth(spec);
  Rng rng = data_rng(gt);
  DataMatrix x = sample_dataset(gt, rng);
  return {std::move(gt), std::move(x)};
}

}  // namespace vbspca
