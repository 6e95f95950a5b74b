#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "msni/harness/config.hpp"
#include "msni/harness/features.hpp"
#include "msni/inference.hpp"
#include "msni/metrics.hpp"

namespace msni::harness {

/// One configured estimator. `family` is the config name ("rbcl"); `name`
/// distinguishes step variants ("rbcl_0.1").
struct EstimatorVariant {
  std::string family;
  std::string name;
  double step = 1.0;
};

/// Expands the configured estimator list, one RBCL variant per step.
std::vector<EstimatorVariant> expand_estimators(const ExperimentConfig& cfg);

std::unique_ptr<StreamingEstimator> make_estimator(const EstimatorVariant& variant,
                                                   const ExperimentConfig& cfg,
                                                   Eigen::Index dimension,
                                                   std::size_t total_batches, ModelKind kind);

struct CurveRow {
  std::size_t rep = 0;
  std::string algorithm;
  std::size_t k = 0;
  double mse = 0.0;
  double deviation = 0.0;
};

struct FailureRow {
  std::size_t rep = 0;
  std::string algorithm;
  std::size_t k = 0;
  std::string message;
};

struct SimulationResult {
  std::vector<std::string> algorithms;
  std::vector<CurveRow> rows;  // ordered by rep, algorithm, k
  std::vector<FailureRow> failures;
};

/// Replicated simulation. Records MSE_k (per-batch setting) or MMSE_k^i
/// (per-task setting, i the task of batch k) at every grid point, together
/// with the deviation of batch k's true parameter. Results depend only on
/// the config and seed, never on the thread count.
SimulationResult simulate(const ExperimentConfig& cfg);

/// Writes curves.csv, summary.csv, failures.csv and manifest.txt.
void write_simulation(const SimulationResult& result, const ExperimentConfig& cfg,
                      const std::filesystem::path& dir);
SimulationResult run_simulation(const ExperimentConfig& cfg);

/// Coverage of MSNI intervals for v'theta0; writes coverage.csv,
/// coverage_summary.csv, failures.csv and manifest.txt.
CoverageReport run_coverage(const ExperimentConfig& cfg);

struct AccuracyRecord {
  EstimatorVariant variant;
  AccuracyMatrix r;
};

struct ContinualMetrics {
  double aia = 0.0;
  std::optional<double> fwt;  // absent with a single task
  std::optional<double> bwt;
};

ContinualMetrics continual_metrics(const AccuracyMatrix& r);

struct RealDataResult {
  std::vector<AccuracyRecord> records;
  std::vector<FailureRow> failures;

  /// Per estimator family, the variant with the highest AIA.
  std::vector<const AccuracyRecord*> best() const;
};

/// Streams every task's training batches through each estimator variant and
/// fills R(i, j) with the test accuracy on task j after task i. Row 0 uses a
/// parameter drawn from N(0, I / d).
RealDataResult real_data_experiment(const FeatureDataset& dataset, const ExperimentConfig& cfg);

/// Writes accuracy.csv, metrics.csv, best_metrics.csv, failures.csv and
/// manifest.txt.
void write_real_data(const RealDataResult& result, const ExperimentConfig& cfg,
                     const std::filesystem::path& dir);
RealDataResult run_real_data(const FeatureDataset& dataset, const ExperimentConfig& cfg);

/// Reads an accuracy.csv and writes metrics.csv next to `out_dir`.
std::vector<std::pair<EstimatorVariant, ContinualMetrics>> recompute_metrics(
    const std::filesystem::path& accuracy_csv, const std::filesystem::path& out_dir);

void write_manifest(const std::filesystem::path& dir, const ExperimentConfig& cfg,
                    const std::string& command);

std::string version_string();

}  // namespace msni::harness
