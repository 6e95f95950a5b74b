#pragma once

#include <cmath>
#include <cstdint>
#include <random>

#include "msni/loss_models.hpp"

namespace msni::testing {

inline Matrix random_matrix(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng,
                            double scale = 1.0) {
  std::normal_distribution<double> normal(0.0, scale);
  Matrix m(rows, cols);
  for (Eigen::Index j = 0; j < cols; ++j) {
    for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = normal(rng);
  }
  return m;
}

inline Vector random_vector(Eigen::Index size, std::mt19937_64& rng, double scale = 1.0) {
  return random_matrix(size, 1, rng, scale).col(0);
}

/// Gaussian design; logistic responses are Bernoulli draws at `theta`.
inline SampleBatch random_batch(Eigen::Index n, Eigen::Index p, ModelKind kind,
                                std::mt19937_64& rng, std::size_t index = 1) {
  SampleBatch b;
  b.features = random_matrix(n, p, rng);
  b.index = index;
  const Vector theta = random_vector(p, rng, 0.5);
  const Vector z = b.features * theta;
  b.responses.resize(n);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  std::normal_distribution<double> noise(0.0, 1.0);
  for (Eigen::Index i = 0; i < n; ++i) {
    b.responses[i] = kind == ModelKind::kLinear ? z[i] + noise(rng)
                                                : (unif(rng) < 1.0 / (1.0 + std::exp(-z[i])) ? 1.0 : 0.0);
  }
  return b;
}

inline SampleBatch make_batch(Matrix x, Vector y, std::size_t index = 1) {
  SampleBatch b;
  b.features = std::move(x);
  b.responses = std::move(y);
  b.index = index;
  return b;
}

/// 1-D batch with a single unit covariate: loss (theta - a)^2 / 2.
inline SampleBatch quadratic_batch(double a, std::size_t index) {
  return make_batch(Matrix::Ones(1, 1), Vector::Constant(1, a), index);
}

inline double relative_error(const Matrix& a, const Matrix& b) {
  return (a - b).norm() / std::max(1.0, b.norm());
}

}  // namespace msni::testing
