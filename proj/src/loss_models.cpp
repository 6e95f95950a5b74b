#include "msni/loss_models.hpp"

#include <cmath>
#include <string>

#include "msni/errors.hpp"

namespace msni {
namespace {

void check_dimensions(const SampleBatch& batch, const Vector& theta) {
  if (batch.size() < 1) {
    throw InvalidInputError("batch " + std::to_string(batch.index) + " is empty");
  }
  if (batch.responses.size() != batch.size()) {
    throw InvalidInputError("batch " + std::to_string(batch.index) +
                            ": response count does not match row count");
  }
  if (theta.size() != batch.dimension()) {
    throw InvalidInputError("parameter dimension " + std::to_string(theta.size()) +
                            " does not match batch dimension " +
                            std::to_string(batch.dimension()));
  }
}

// log(1 + exp(z)) without overflow.
double softplus(double z) { return std::log1p(std::exp(-std::abs(z))) + std::max(z, 0.0); }

}  // namespace

std::string_view to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::kLinear:
      return "linear";
    case ModelKind::kLogistic:
      return "logistic";
  }
  return "unknown";
}

ModelKind parse_model_kind(std::string_view name) {
  if (name == "linear") return ModelKind::kLinear;
  if (name == "logistic") return ModelKind::kLogistic;
  throw InvalidInputError("unknown model kind '" + std::string(name) + "'");
}

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

void validate_batch(const SampleBatch& batch, ModelKind kind) {
  const std::string where = "batch " + std::to_string(batch.index);
  if (batch.size() < 1) throw InvalidInputError(where + " is empty");
  if (batch.responses.size() != batch.size()) {
    throw InvalidInputError(where + ": response count does not match row count");
  }
  if (!batch.features.allFinite()) throw InvalidInputError(where + ": non-finite feature");
  if (!batch.responses.allFinite()) throw InvalidInputError(where + ": non-finite response");
  if (kind == ModelKind::kLogistic) {
    for (Eigen::Index i = 0; i < batch.responses.size(); ++i) {
      const double y = batch.responses[i];
      if (y != 0.0 && y != 1.0) {
        throw InvalidInputError(where + ": logistic response in row " +
                                std::to_string(i + 1) + " is not 0 or 1");
      }
    }
  }
}

double loss_value(const SampleBatch& batch, ModelKind kind, const Vector& theta) {
  check_dimensions(batch, theta);
  const Vector z = batch.features * theta;
  const auto& y = batch.responses;
  double total = 0.0;
  switch (kind) {
    case ModelKind::kLinear:
      total = 0.5 * (y - z).squaredNorm();
      break;
    case ModelKind::kLogistic:
      for (Eigen::Index i = 0; i < z.size(); ++i) total += softplus(z[i]) - y[i] * z[i];
      break;
  }
  return total / static_cast<double>(batch.size());
}

Vector score_residuals(const SampleBatch& batch, ModelKind kind, const Vector& theta) {
  check_dimensions(batch, theta);
  Vector r = batch.features * theta;
  switch (kind) {
    case ModelKind::kLinear:
      r -= batch.responses;
      break;
    case ModelKind::kLogistic:
      for (Eigen::Index i = 0; i < r.size(); ++i) r[i] = sigmoid(r[i]) - batch.responses[i];
      break;
  }
  return r;
}

Vector loss_gradient(const SampleBatch& batch, ModelKind kind, const Vector& theta) {
  const Vector r = score_residuals(batch, kind, theta);
  return batch.features.transpose() * r / static_cast<double>(batch.size());
}

Matrix loss_hessian(const SampleBatch& batch, ModelKind kind, const Vector& theta) {
  check_dimensions(batch, theta);
  const auto p = batch.dimension();
  const auto n = static_cast<double>(batch.size());
  Matrix h = Matrix::Zero(p, p);
  switch (kind) {
    case ModelKind::kLinear:
      h.selfadjointView<Eigen::Lower>().rankUpdate(batch.features.transpose(), 1.0 / n);
      break;
    case ModelKind::kLogistic: {
      const Vector z = batch.features * theta;
      Vector w(z.size());
      for (Eigen::Index i = 0; i < z.size(); ++i) {
        const double s = sigmoid(z[i]);
        w[i] = s * (1.0 - s);
      }
      const Matrix weighted = batch.features.array().colwise() * w.array();
      h.triangularView<Eigen::Lower>() = batch.features.transpose() * weighted / n;
      break;
    }
  }
  symmetrize_from_lower(h);
  return h;
}

}  // namespace msni
