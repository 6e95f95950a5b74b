#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "msni/harness/config.hpp"
#include "msni/loss_models.hpp"
#include "msni/stream_sim.hpp"

namespace msni::harness {

/// Raw contents of a feature file: one label and d features per row.
struct FeatureTable {
  Vector labels;
  Matrix features;
};

/// csv:   header `label,f1,...,fd`, then one row per sample.
/// f32le: uint64 LE row count N, uint32 LE dimension d, then N rows of
///        (d + 1) little-endian float32 values, label first.
/// Throws ParseError naming the offending row.
FeatureTable read_feature_table(const std::filesystem::path& path, FeatureFormat format);
void write_feature_table(const std::filesystem::path& path, const FeatureTable& table,
                         FeatureFormat format);

/// Concatenation of a simulated stream. Linear streams use the response as
/// the label; logistic streams use the class id 2 * task + y, which the
/// default assignment maps back to (task, y).
FeatureTable simulate_feature_table(const SimConfig& cfg);

struct FeatureDataset {
  Matrix features;
  std::vector<int> labels;
  TaskAssignment assignment;

  std::size_t tasks() const;
};

/// Validates labels against the assignment: every label must be an integer
/// class with an entry, and every task must see both binary labels.
/// Throws ConfigError naming the first bad row (1-based, header excluded).
FeatureDataset make_dataset(const FeatureTable& table, const TaskAssignment& assignment);
FeatureDataset ingest_features(const std::filesystem::path& path, FeatureFormat format,
                               const TaskAssignment& assignment);

struct TaskSplit {
  std::vector<SampleBatch> train;
  SampleBatch test;
};

/// Per task: shuffles the task's rows with a seeded stream, holds out
/// round(test_fraction * rows) (at least one) for testing and cuts the rest
/// into batches of `batch_size` (the last one may be shorter). Training batch
/// indices run 1..K across all tasks in task order.
std::vector<TaskSplit> split_tasks(const FeatureDataset& dataset, std::size_t batch_size,
                                   double test_fraction, std::uint64_t seed);

}  // namespace msni::harness
