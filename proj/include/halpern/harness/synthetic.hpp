#pragma once

#include <cmath>
#include <cstdint>

#include <Eigen/Dense>

#include "halpern/error.hpp"
#include "halpern/operator.hpp"
#include "halpern/random.hpp"
#include "halpern/wdro.hpp"

namespace halpern::harness {

struct SyntheticQuadratic {
  Operator G;           // G(z) = A (z - z*)
  Point z_star;
  double L = 1.0;       // ||A||
  Eigen::MatrixXd A;
};

/// A = Q diag(lambda) Q^T with lambda log-spaced over [L/cond, L], L = 1 and
/// Q from the QR factorization of a Gaussian matrix.
inline SyntheticQuadratic synth_quadratic(std::size_t dim, double cond, std::uint64_t seed) {
  if (dim == 0) throw UsageError("synth_quadratic: dim must be positive");
  if (!(cond >= 1.0)) throw UsageError("synth_quadratic: cond must be >= 1");
  const auto n = static_cast<Eigen::Index>(dim);
  Rng rng = make_stream(seed, 0x71756164);
  Eigen::MatrixXd gauss(n, n);
  for (Eigen::Index j = 0; j < n; ++j)
    for (Eigen::Index i = 0; i < n; ++i) gauss(i, j) = standard_normal(rng);
  const Eigen::MatrixXd Q = Eigen::HouseholderQR<Eigen::MatrixXd>(gauss).householderQ();
  const double L = 1.0;
  Eigen::VectorXd lambda(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double t = n == 1 ? 1.0 : static_cast<double>(i) / static_cast<double>(n - 1);
    lambda[i] = L * std::pow(cond, t - 1.0);
  }
  lambda[n - 1] = L;
  Eigen::MatrixXd A = Q * lambda.asDiagonal() * Q.transpose();
  A = 0.5 * (A + A.transpose());
  Point z_star(n);
  for (Eigen::Index i = 0; i < n; ++i) z_star[i] = standard_normal(rng);
  Operator G(dim, [A, z_star](const Point& z, double scale, Point& out) { out.noalias() += scale * (A * (z - z_star)); });
  return {std::move(G), std::move(z_star), L, std::move(A)};
}

/// Gaussian features in R^{d-1} scaled by 1/sqrt(d-1); labels follow the sign
/// of a planted rule and are flipped with probability (1 - separability)/2.
inline SupervisedDataset synth_wdrsl(std::size_t n, std::size_t d, double separability, std::uint64_t seed,
                                     Point* planted_rule = nullptr) {
  if (n == 0 || d < 2) throw UsageError("synth_wdrsl: need n >= 1 and d >= 2");
  if (!(separability >= 0.0 && separability <= 1.0)) throw UsageError("synth_wdrsl: separability must lie in [0, 1]");
  const auto m = static_cast<Eigen::Index>(d - 1);
  Rng rng = make_stream(seed, 0x7764726c);
  Point w_star(m);
  for (Eigen::Index j = 0; j < m; ++j) w_star[j] = standard_normal(rng);
  const double scale = 1.0 / std::sqrt(static_cast<double>(m));
  SupervisedDataset data;
  data.features.resize(static_cast<Eigen::Index>(n), m);
  data.labels.resize(static_cast<Eigen::Index>(n));
  const double flip = 0.5 * (1.0 - separability);
  for (Eigen::Index i = 0; i < static_cast<Eigen::Index>(n); ++i) {
    for (Eigen::Index j = 0; j < m; ++j) data.features(i, j) = scale * standard_normal(rng);
    const double planted = data.features.row(i).dot(w_star) >= 0.0 ? 1.0 : -1.0;
    data.labels[i] = uniform01(rng) < flip ? -planted : planted;
  }
  if (planted_rule) *planted_rule = w_star;
  return data;
}

}  // namespace halpern::harness
