#pragma once

#include <cstddef>
#include <span>

#include "msni/loss_models.hpp"

namespace msni {

/// Squared Euclidean distance between an estimate and a reference parameter.
double mse_k(const Vector& theta_hat, const Vector& theta_ref);

/// Mean of mse_k against the first `current_task` task parameters (1-based).
double mmse(const Vector& theta_hat, std::span<const Vector> task_params, std::size_t current_task);

/// Task accuracies R(i, j): row 0 holds a randomly initialized model, row i
/// the model after training on task i. Tasks are 1-based, so the matrix is
/// (M + 1) x M and R(i, j) lives at r(i, j - 1).
class AccuracyMatrix {
 public:
  explicit AccuracyMatrix(std::size_t tasks);
  explicit AccuracyMatrix(Matrix values);

  std::size_t tasks() const { return static_cast<std::size_t>(values_.cols()); }
  double operator()(std::size_t i, std::size_t j) const;
  void set(std::size_t i, std::size_t j, double accuracy);
  const Matrix& values() const { return values_; }

 private:
  Matrix values_;
};

/// AA_i = (1/i) sum_{j<=i} R(i, j).
double average_accuracy(const AccuracyMatrix& r, std::size_t i);
/// Mean of AA_1..AA_M.
double aia(const AccuracyMatrix& r);
/// (1/(M-1)) sum_{i=2}^M (R(i-1, i) - R(0, i)). Needs M >= 2.
double fwt(const AccuracyMatrix& r);
/// (1/(M-1)) sum_{i=1}^{M-1} (R(M, i) - R(i, i)). Needs M >= 2.
double bwt(const AccuracyMatrix& r);

/// Fraction of samples whose predicted class (1 when x'theta >= 0) matches
/// the 0/1 response.
double classify_accuracy(const Vector& theta, const SampleBatch& batch);

}  // namespace msni
