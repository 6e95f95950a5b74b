#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "msni/estimators.hpp"
#include "msni/inference.hpp"
#include "msni/stream_sim.hpp"

namespace msni::harness {

/// Either an explicit exponent list or T evenly spaced stages.
struct ScheduleSpec {
  double alpha0 = 0.5;
  std::vector<double> alphas;  // takes precedence over `stages` when set
  std::size_t stages = 4;

  StageSchedule build(std::size_t total_batches) const;
};

enum class FeatureFormat { kCsv, kF32le };

FeatureFormat parse_feature_format(const std::string& name);
std::string to_string(FeatureFormat format);

/// class id -> (task index, binary label), both 0-based.
using TaskAssignment = std::map<int, std::pair<std::size_t, int>>;

/// Default domain-incremental split: class c -> task c / 2, label c % 2.
TaskAssignment default_assignment(int classes = 10);

struct ExperimentConfig {
  SimConfig sim;
  ScheduleSpec schedule;
  std::vector<std::string> estimators{"msni"};
  std::size_t reps = 1;
  /// Batch indices at which estimates are recorded; empty means every batch.
  std::vector<std::size_t> eval_grid;
  std::string output_dir = "results";
  std::vector<double> rbcl_steps{1.0, 0.1, 0.01};
  NewtonOptions newton;
  std::size_t threads = 1;

  // coverage
  std::vector<double> direction;  // empty means e_1
  double level = 0.95;
  VarianceMode mode = VarianceMode::kHeterogeneous;

  // real data
  std::string features_path;
  FeatureFormat format = FeatureFormat::kCsv;
  std::size_t batch_size = 100;
  double test_fraction = 1.0 / 6.0;
  TaskAssignment assignment = default_assignment();

  /// Throws ConfigError.
  void validate() const;
  /// Resolved evaluation grid (every batch when none was configured).
  std::vector<std::size_t> resolved_grid() const;
  Vector resolved_direction() const;
};

/// Reads an INI-style document:
///
///   [sim]       p, K, n, sigma, setting, tasks, kind, seed
///   [schedule]  alpha0, alphas | T
///   [run]       estimators, reps, eval_grid, output_dir, rbcl_steps, threads
///   [newton]    tol, max_iter, ridge_condition
///   [coverage]  v, level, mode
///   [real_data] features, format, batch_size, test_fraction, assignment
///
/// Reals may be written as fractions ("1/20"). Unknown sections or keys are
/// rejected. Throws ConfigError.
ExperimentConfig load_config(const std::string& path);
ExperimentConfig parse_config(const std::string& text);

/// Config echo used in run manifests; excludes the thread count so manifests
/// do not depend on parallelism.
std::string describe_config(const ExperimentConfig& cfg);

}  // namespace msni::harness
