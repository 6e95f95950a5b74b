#include "msni/stream_sim.hpp"

#include <cmath>
#include <string>

#include "msni/errors.hpp"

namespace msni {
namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace

std::uint64_t RngStream::derive(std::uint64_t seed, Purpose purpose, std::uint64_t index) {
  std::uint64_t h = splitmix64(seed);
  h = splitmix64(h ^ static_cast<std::uint64_t>(purpose));
  return splitmix64(h ^ splitmix64(index));
}

RngStream::RngStream(std::uint64_t seed, Purpose purpose, std::uint64_t index)
    : engine_(derive(seed, purpose, index)) {}

std::string_view to_string(HeterogeneitySetting setting) {
  return setting == HeterogeneitySetting::kPerBatch ? "per_batch" : "per_task";
}

HeterogeneitySetting parse_setting(std::string_view name) {
  if (name == "per_batch") return HeterogeneitySetting::kPerBatch;
  if (name == "per_task") return HeterogeneitySetting::kPerTask;
  throw InvalidInputError("unknown heterogeneity setting '" + std::string(name) + "'");
}

void SimConfig::validate() const {
  if (dimension < 2) throw InvalidInputError("simulation needs p >= 2");
  if (batches < 1) throw InvalidInputError("simulation needs K >= 1");
  if (batch_size < 1) throw InvalidInputError("simulation needs n_k >= 1");
  if (!(sigma >= 0.0) || !std::isfinite(sigma)) {
    throw InvalidInputError("sigma must be finite and non-negative");
  }
  if (setting == HeterogeneitySetting::kPerTask) {
    if (num_tasks < 1) throw InvalidInputError("per_task setting needs at least one task");
    if (batches % num_tasks != 0) {
      throw InvalidInputError("per_task setting needs K divisible by the number of tasks");
    }
  }
}

Vector base_parameter(std::size_t dimension) {
  if (dimension < 2) throw InvalidInputError("base_parameter needs p >= 2");
  const double p = static_cast<double>(dimension);
  Vector theta(static_cast<Eigen::Index>(dimension));
  for (std::size_t i = 1; i <= dimension; ++i) {
    theta[static_cast<Eigen::Index>(i - 1)] =
        10.0 / std::sqrt(p) * (p - static_cast<double>(i)) / (p - 1.0);
  }
  return theta;
}

TrueParams draw_heterogeneous_params(const SimConfig& cfg, const Vector& theta0) {
  cfg.validate();
  RngStream rng(cfg.master_seed, RngStream::Purpose::kParameters);
  const std::size_t draws =
      cfg.setting == HeterogeneitySetting::kPerBatch ? cfg.batches : cfg.num_tasks;

  std::vector<Vector> thetas;
  thetas.reserve(draws);
  for (std::size_t d = 0; d < draws; ++d) {
    Vector theta = theta0;
    for (Eigen::Index j = 0; j < theta.size(); ++j) theta[j] += cfg.sigma * rng.normal();
    thetas.push_back(std::move(theta));
  }

  TrueParams params;
  params.theta0 = theta0;
  if (cfg.setting == HeterogeneitySetting::kPerBatch) {
    params.per_batch = std::move(thetas);
  } else {
    params.per_task = std::move(thetas);
  }
  return params;
}

Matrix gen_covariates(std::size_t rows, std::size_t dimension, RngStream& rng) {
  const double innovation = std::sqrt(1.0 - 0.25);
  Matrix x(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(dimension));
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    double previous = 0.0;
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
      const double z = rng.normal();
      previous = j == 0 ? z : 0.5 * previous + innovation * z;
      x(i, j) = previous;
    }
  }
  return x;
}

Vector gen_responses(const Matrix& features, const Vector& theta, ModelKind kind, RngStream& rng) {
  if (features.cols() != theta.size()) {
    throw InvalidInputError("gen_responses: parameter dimension mismatch");
  }
  Vector y = features * theta;
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    if (kind == ModelKind::kLinear) {
      y[i] += rng.normal();
    } else {
      y[i] = rng.uniform() < sigmoid(y[i]) ? 1.0 : 0.0;
    }
  }
  return y;
}

double deviation(const Vector& theta_k, const Vector& theta0) {
  if (theta_k.size() != theta0.size()) throw InvalidInputError("deviation: dimension mismatch");
  return (theta_k - theta0).squaredNorm();
}

StreamSimulator::StreamSimulator(SimConfig cfg)
    : cfg_(cfg), params_(draw_heterogeneous_params(cfg_, base_parameter(cfg_.dimension))) {}

std::size_t StreamSimulator::task_of(std::size_t k) const {
  if (k < 1 || k > cfg_.batches) throw InvalidInputError("batch index out of range");
  if (cfg_.setting == HeterogeneitySetting::kPerBatch) return 0;
  return (k - 1) / cfg_.batches_per_task();
}

const Vector& StreamSimulator::theta_for(std::size_t k) const {
  if (k < 1 || k > cfg_.batches) throw InvalidInputError("batch index out of range");
  if (cfg_.setting == HeterogeneitySetting::kPerBatch) return params_.per_batch[k - 1];
  return params_.per_task[task_of(k)];
}

SampleBatch StreamSimulator::batch(std::size_t k) const {
  const Vector& theta = theta_for(k);
  RngStream rng(cfg_.master_seed, RngStream::Purpose::kBatch, k);
  SampleBatch b;
  b.features = gen_covariates(cfg_.batch_size, cfg_.dimension, rng);
  b.responses = gen_responses(b.features, theta, cfg_.kind, rng);
  b.index = k;
  return b;
}

}  // namespace msni
