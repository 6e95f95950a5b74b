#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <string_view>
#include <vector>

#include "msni/loss_models.hpp"

namespace msni {

/// Independent random stream keyed by (seed, purpose, index).
///
/// Keys are mixed with SplitMix64 into the seed of a 64-bit Mersenne twister,
/// so streams can be created in any order or on any thread and still produce
/// the same values.
class RngStream {
 public:
  enum class Purpose : std::uint64_t {
    kReplication = 1,
    kParameters = 2,
    kBatch = 3,
    kRandomInit = 4,
    kShuffle = 5,
  };

  RngStream(std::uint64_t seed, Purpose purpose, std::uint64_t index = 0);

  /// Seed of the child stream; used to chain replication -> batch streams.
  static std::uint64_t derive(std::uint64_t seed, Purpose purpose, std::uint64_t index);

  double normal() { return normal_(engine_); }
  double uniform() { return std::generate_canonical<double, 64>(engine_); }
  std::mt19937_64& engine() { return engine_; }

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_;
};

enum class HeterogeneitySetting {
  kPerBatch,  // every batch draws its own random effect
  kPerTask,   // consecutive blocks of K / M batches share one random effect
};

std::string_view to_string(HeterogeneitySetting setting);
HeterogeneitySetting parse_setting(std::string_view name);

struct SimConfig {
  std::size_t dimension = 10;
  std::size_t batches = 500;
  std::size_t batch_size = 100;
  double sigma = 0.05;
  HeterogeneitySetting setting = HeterogeneitySetting::kPerBatch;
  std::size_t num_tasks = 5;
  ModelKind kind = ModelKind::kLinear;
  std::uint64_t master_seed = 1;

  /// Throws InvalidInputError when an invariant fails.
  void validate() const;
  std::size_t batches_per_task() const { return batches / num_tasks; }
};

struct TrueParams {
  Vector theta0;
  std::vector<Vector> per_batch;  // populated in the per-batch setting
  std::vector<Vector> per_task;   // populated in the per-task setting
};

/// theta0_i = 10 p^{-1/2} (p - i) / (p - 1), i = 1..p.
Vector base_parameter(std::size_t dimension);

/// Draws theta0 + eta with eta ~ N(0, sigma^2 I), one draw per batch or per
/// task depending on the setting.
TrueParams draw_heterogeneous_params(const SimConfig& cfg, const Vector& theta0);

/// Rows are N(0, S) with S_ij = 0.5^|i-j|, generated by the exact AR(1)
/// recursion x_1 = z_1, x_j = 0.5 x_{j-1} + sqrt(0.75) z_j.
Matrix gen_covariates(std::size_t rows, std::size_t dimension, RngStream& rng);

/// Linear: y = X theta + N(0, 1) noise. Logistic: y ~ Bernoulli(sigmoid(x'theta)).
Vector gen_responses(const Matrix& features, const Vector& theta, ModelKind kind, RngStream& rng);

/// Squared Euclidean distance between a true parameter and theta0.
double deviation(const Vector& theta_k, const Vector& theta0);

/// One simulated stream. Batch k depends only on (seed, k, theta_k), so any
/// batch can be regenerated in isolation.
class StreamSimulator {
 public:
  explicit StreamSimulator(SimConfig cfg);

  const SimConfig& config() const { return cfg_; }
  const TrueParams& params() const { return params_; }

  /// 1-based batch index to 0-based task index.
  std::size_t task_of(std::size_t k) const;
  /// True parameter governing batch k (1-based).
  const Vector& theta_for(std::size_t k) const;
  /// Generates batch k (1-based).
  SampleBatch batch(std::size_t k) const;

 private:
  SimConfig cfg_;
  TrueParams params_;
};

}  // namespace msni
