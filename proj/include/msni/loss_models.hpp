#pragma once

#include <cstddef>
#include <string_view>

#include "msni/linalg.hpp"

namespace msni {

enum class ModelKind { kLinear, kLogistic };

std::string_view to_string(ModelKind kind);
/// Accepts "linear" or "logistic".
ModelKind parse_model_kind(std::string_view name);

/// One data stream's observations: an n x p design and its responses.
struct SampleBatch {
  Matrix features;
  Vector responses;
  /// 1-based position of the batch in its stream.
  std::size_t index = 1;

  Eigen::Index size() const { return features.rows(); }
  Eigen::Index dimension() const { return features.cols(); }
};

/// Checks the batch invariants (non-empty, finite, matching sizes, and 0/1
/// responses for the logistic model). Throws InvalidInputError.
void validate_batch(const SampleBatch& batch, ModelKind kind);

// Batch-mean loss and its derivatives. The linear loss is (y - x'theta)^2 / 2
// per sample; the logistic loss is log(1 + exp(x'theta)) - y x'theta.
// All three throw InvalidInputError when theta and the batch disagree on p.

double loss_value(const SampleBatch& batch, ModelKind kind, const Vector& theta);
Vector loss_gradient(const SampleBatch& batch, ModelKind kind, const Vector& theta);
/// Exactly symmetric. For the linear model this is X'X / n regardless of theta.
Matrix loss_hessian(const SampleBatch& batch, ModelKind kind, const Vector& theta);

/// Per-sample score multipliers r_i such that the gradient of the i-th
/// sample's loss is r_i * x_i.
Vector score_residuals(const SampleBatch& batch, ModelKind kind, const Vector& theta);

/// Logistic function, evaluated without overflow for any finite input.
double sigmoid(double z);

}  // namespace msni
