#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "msni/estimators.hpp"
#include "msni/stream_sim.hpp"

namespace msni {

enum class VarianceMode {
  /// Batches carry their own random parameter; the score covariance is that
  /// of batch-mean gradients and the variance scales with 1/K.
  kHeterogeneous,
  /// All batches share one parameter; per-sample score covariance, 1/(K n).
  kHomogeneous,
};

std::string_view to_string(VarianceMode mode);
VarianceMode parse_variance_mode(std::string_view name);

/// Plug-in pieces of the sandwich variance Sigma^{-1} G Sigma^{-1} / scale.
struct SandwichEstimate {
  Matrix sigma_hat;
  Matrix score_cov;
  VarianceMode mode = VarianceMode::kHeterogeneous;
  double effective_scale = 1.0;

  /// v' Sigma^{-1} G Sigma^{-1} v (before dividing by the scale). Never negative.
  double direction_variance(const Vector& v, double ridge_condition = kDefaultRidgeCondition) const;
};

/// Replays `batch_count` batches at `theta_hat`:
///   Sigma = (1/K) sum_k Hessian_k
///   heterogeneous G = (1/K) sum_k g_k g_k' with g_k the batch-mean gradient
///   homogeneous   G = (1/N) sum over all samples of per-sample score outer products
/// The effective scale is K or N = total sample count respectively.
SandwichEstimate sandwich_estimate(const BatchSource& batches, std::size_t batch_count,
                                   const Vector& theta_hat, ModelKind kind, VarianceMode mode);

/// Inverse of the standard normal CDF. Absolute error well below 1e-8.
double normal_quantile(double probability);

struct ConfidenceInterval {
  double center = 0.0;
  double half_width = 0.0;
  double level = 0.95;
  Vector direction;

  double lower() const { return center - half_width; }
  double upper() const { return center + half_width; }
};

/// Interval for v'theta: center v'theta_hat, half width
/// z_{(1+level)/2} sqrt(v' Sigma^{-1} G Sigma^{-1} v / scale).
ConfidenceInterval project_ci(const SandwichEstimate& est, const Vector& theta_hat,
                              const Vector& v, double level,
                              double ridge_condition = kDefaultRidgeCondition);

struct CoverageRow {
  std::size_t rep = 0;
  bool covered = false;
  double center = 0.0;
  double half_width = 0.0;
  double standardized_stat = 0.0;
};

struct CoverageFailure {
  std::size_t rep = 0;
  std::string message;
};

struct CoverageReport {
  double level = 0.95;
  std::vector<CoverageRow> rows;
  std::vector<CoverageFailure> failures;
  double coverage = 0.0;
  double mean_half_width = 0.0;
  double stat_mean = 0.0;
  double stat_variance = 0.0;
};

struct CoverageOptions {
  VarianceMode mode = VarianceMode::kHeterogeneous;
  NewtonOptions newton;
  std::size_t threads = 1;
};

/// Runs `reps` independent simulated streams through MSNI and checks how
/// often the interval for v'theta0 covers the truth. Replication r uses
/// the seed RngStream::derive(cfg.master_seed, kReplication, r). Failed
/// replications are listed and left out of the summary.
CoverageReport coverage_experiment(const SimConfig& cfg, const StageSchedule& schedule,
                                   const Vector& v, double level, std::size_t reps,
                                   const CoverageOptions& options = {});

/// Simulation config for replication `rep` of an experiment.
SimConfig replication_config(const SimConfig& cfg, std::size_t rep);

}  // namespace msni
