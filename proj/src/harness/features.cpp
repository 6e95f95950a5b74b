#include "msni/harness/features.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <set>

#include "msni/errors.hpp"
#include "msni/harness/csv.hpp"

namespace msni::harness {
namespace {

static_assert(std::endian::native == std::endian::little || std::endian::native == std::endian::big);

template <typename T>
T from_little_endian(const unsigned char* bytes) {
  T value;
  unsigned char buffer[sizeof(T)];
  std::memcpy(buffer, bytes, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(buffer, buffer + sizeof(T));
  std::memcpy(&value, buffer, sizeof(T));
  return value;
}

template <typename T>
void write_little_endian(std::ostream& out, T value) {
  unsigned char buffer[sizeof(T)];
  std::memcpy(buffer, &value, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(buffer, buffer + sizeof(T));
  out.write(reinterpret_cast<const char*>(buffer), sizeof(T));
}

double parse_field(const std::string& text, std::size_t row) {
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size() || !std::isfinite(value)) {
    throw ParseError("row " + std::to_string(row) + ": bad numeric field '" + text + "'");
  }
  return value;
}

FeatureTable read_csv_table(const std::filesystem::path& path) {
  const auto rows = read_csv(path);
  if (rows.empty()) throw ParseError("'" + path.string() + "' is empty");
  const auto& header = rows.front();
  if (header.size() < 2 || header[0] != "label") {
    throw ParseError("header must be label,f1,...,fd");
  }
  for (std::size_t j = 1; j < header.size(); ++j) {
    if (header[j] != "f" + std::to_string(j)) {
      throw ParseError("header column " + std::to_string(j + 1) + " must be f" + std::to_string(j));
    }
  }
  const auto d = static_cast<Eigen::Index>(header.size() - 1);
  const auto n = static_cast<Eigen::Index>(rows.size() - 1);
  FeatureTable table{Vector(n), Matrix(n, d)};
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto row_number = static_cast<std::size_t>(i + 1);
    const auto& row = rows[static_cast<std::size_t>(i + 1)];
    if (static_cast<Eigen::Index>(row.size()) != d + 1) {
      throw ParseError("row " + std::to_string(row_number) + ": expected " +
                       std::to_string(d + 1) + " fields, got " + std::to_string(row.size()));
    }
    table.labels[i] = parse_field(row[0], row_number);
    for (Eigen::Index j = 0; j < d; ++j) {
      table.features(i, j) = parse_field(row[static_cast<std::size_t>(j + 1)], row_number);
    }
  }
  return table;
}

FeatureTable read_f32le_table(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open '" + path.string() + "'");
  unsigned char header[12];
  if (!in.read(reinterpret_cast<char*>(header), sizeof(header))) {
    throw ParseError("truncated f32le header");
  }
  const auto n = from_little_endian<std::uint64_t>(header);
  const auto d = from_little_endian<std::uint32_t>(header + 8);
  if (d == 0) throw ParseError("f32le header declares zero features");

  const std::size_t row_bytes = (static_cast<std::size_t>(d) + 1) * sizeof(float);
  const auto file_size = std::filesystem::file_size(path);
  if (file_size < 12 || (file_size - 12) / row_bytes < n) {
    throw ParseError("f32le header declares " + std::to_string(n) + " rows but row " +
                     std::to_string((file_size - 12) / row_bytes + 1) + " is truncated");
  }
  if (file_size != 12 + n * row_bytes) {
    throw ParseError("f32le file has trailing bytes after row " + std::to_string(n));
  }

  FeatureTable table{Vector(static_cast<Eigen::Index>(n)),
                     Matrix(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(d))};
  std::vector<unsigned char> row(row_bytes);
  for (std::uint64_t i = 0; i < n; ++i) {
    if (!in.read(reinterpret_cast<char*>(row.data()), static_cast<std::streamsize>(row_bytes))) {
      throw ParseError("row " + std::to_string(i + 1) + ": truncated");
    }
    const auto r = static_cast<Eigen::Index>(i);
    for (std::uint32_t j = 0; j <= d; ++j) {
      const float value = from_little_endian<float>(row.data() + j * sizeof(float));
      if (!std::isfinite(value)) {
        throw ParseError("row " + std::to_string(i + 1) + ": non-finite value");
      }
      if (j == 0) {
        table.labels[r] = value;
      } else {
        table.features(r, static_cast<Eigen::Index>(j - 1)) = value;
      }
    }
  }
  return table;
}

}  // namespace

FeatureTable read_feature_table(const std::filesystem::path& path, FeatureFormat format) {
  return format == FeatureFormat::kCsv ? read_csv_table(path) : read_f32le_table(path);
}

void write_feature_table(const std::filesystem::path& path, const FeatureTable& table,
                         FeatureFormat format) {
  if (table.labels.size() != table.features.rows()) {
    throw InvalidInputError("feature table: label count does not match row count");
  }
  const auto n = table.features.rows();
  const auto d = table.features.cols();
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot open '" + path.string() + "' for writing");

  if (format == FeatureFormat::kF32le) {
    write_little_endian<std::uint64_t>(out, static_cast<std::uint64_t>(n));
    write_little_endian<std::uint32_t>(out, static_cast<std::uint32_t>(d));
    for (Eigen::Index i = 0; i < n; ++i) {
      write_little_endian<float>(out, static_cast<float>(table.labels[i]));
      for (Eigen::Index j = 0; j < d; ++j) {
        write_little_endian<float>(out, static_cast<float>(table.features(i, j)));
      }
    }
    return;
  }

  out << "label";
  for (Eigen::Index j = 1; j <= d; ++j) out << ",f" << j;
  out << '\n';
  for (Eigen::Index i = 0; i < n; ++i) {
    out << format_number(table.labels[i]);
    for (Eigen::Index j = 0; j < d; ++j) out << ',' << format_number(table.features(i, j));
    out << '\n';
  }
}

FeatureTable simulate_feature_table(const SimConfig& cfg) {
  const StreamSimulator sim(cfg);
  const auto n = static_cast<Eigen::Index>(cfg.batch_size);
  const auto rows = static_cast<Eigen::Index>(cfg.batches) * n;
  FeatureTable table{Vector(rows), Matrix(rows, static_cast<Eigen::Index>(cfg.dimension))};
  for (std::size_t k = 1; k <= cfg.batches; ++k) {
    const SampleBatch batch = sim.batch(k);
    const auto offset = static_cast<Eigen::Index>(k - 1) * n;
    table.features.middleRows(offset, n) = batch.features;
    if (cfg.kind == ModelKind::kLogistic) {
      const double task = static_cast<double>(sim.task_of(k));
      table.labels.segment(offset, n) = (batch.responses.array() + 2.0 * task).matrix();
    } else {
      table.labels.segment(offset, n) = batch.responses;
    }
  }
  return table;
}

std::size_t FeatureDataset::tasks() const {
  std::size_t count = 0;
  for (const auto& [cls, target] : assignment) count = std::max(count, target.first + 1);
  return count;
}

FeatureDataset make_dataset(const FeatureTable& table, const TaskAssignment& assignment) {
  if (assignment.empty()) throw ConfigError("task assignment is empty");
  for (const auto& [cls, target] : assignment) {
    if (target.second != 0 && target.second != 1) {
      throw ConfigError("class " + std::to_string(cls) + " maps to a non-binary label");
    }
  }
  FeatureDataset dataset;
  dataset.features = table.features;
  dataset.assignment = assignment;
  dataset.labels.resize(static_cast<std::size_t>(table.labels.size()));

  const std::size_t tasks = dataset.tasks();
  std::vector<std::set<int>> seen(tasks);
  for (Eigen::Index i = 0; i < table.labels.size(); ++i) {
    const double label = table.labels[i];
    const auto row = std::to_string(i + 1);
    if (label != std::floor(label) || std::abs(label) > 1e9) {
      throw ConfigError("row " + row + ": label " + format_number(label) + " is not a class id");
    }
    const int cls = static_cast<int>(label);
    const auto it = assignment.find(cls);
    if (it == assignment.end()) {
      throw ConfigError("row " + row + ": class " + std::to_string(cls) +
                        " has no task assignment");
    }
    dataset.labels[static_cast<std::size_t>(i)] = cls;
    seen[it->second.first].insert(it->second.second);
  }
  for (std::size_t t = 0; t < tasks; ++t) {
    if (seen[t].size() != 2) {
      throw ConfigError("task " + std::to_string(t + 1) + " does not contain both binary labels");
    }
  }
  return dataset;
}

FeatureDataset ingest_features(const std::filesystem::path& path, FeatureFormat format,
                               const TaskAssignment& assignment) {
  return make_dataset(read_feature_table(path, format), assignment);
}

std::vector<TaskSplit> split_tasks(const FeatureDataset& dataset, std::size_t batch_size,
                                   double test_fraction, std::uint64_t seed) {
  if (batch_size < 1) throw ConfigError("batch size must be positive");
  const std::size_t tasks = dataset.tasks();
  std::vector<std::vector<Eigen::Index>> rows(tasks);
  for (std::size_t i = 0; i < dataset.labels.size(); ++i) {
    rows[dataset.assignment.at(dataset.labels[i]).first].push_back(static_cast<Eigen::Index>(i));
  }

  const auto gather = [&dataset](std::span<const Eigen::Index> idx, std::size_t index) {
    SampleBatch b;
    b.features.resize(static_cast<Eigen::Index>(idx.size()), dataset.features.cols());
    b.responses.resize(static_cast<Eigen::Index>(idx.size()));
    for (std::size_t r = 0; r < idx.size(); ++r) {
      const auto row = static_cast<Eigen::Index>(r);
      b.features.row(row) = dataset.features.row(idx[r]);
      b.responses[row] = dataset.assignment.at(dataset.labels[static_cast<std::size_t>(idx[r])]).second;
    }
    b.index = index;
    return b;
  };

  std::vector<TaskSplit> out(tasks);
  std::size_t next_index = 1;
  for (std::size_t t = 0; t < tasks; ++t) {
    auto& idx = rows[t];
    if (idx.size() < 2) throw ConfigError("task " + std::to_string(t + 1) + " has fewer than two rows");
    RngStream rng(seed, RngStream::Purpose::kShuffle, t);
    for (std::size_t i = idx.size() - 1; i > 0; --i) {
      const std::size_t j = static_cast<std::size_t>(rng.engine()() % (i + 1));
      std::swap(idx[i], idx[j]);
    }
    const auto held_out = std::clamp<std::size_t>(
        static_cast<std::size_t>(std::llround(test_fraction * static_cast<double>(idx.size()))), 1,
        idx.size() - 1);
    const std::span<const Eigen::Index> all(idx);
    out[t].test = gather(all.first(held_out), 0);
    const auto train = all.subspan(held_out);
    for (std::size_t start = 0; start < train.size(); start += batch_size) {
      const auto len = std::min(batch_size, train.size() - start);
      out[t].train.push_back(gather(train.subspan(start, len), next_index++));
    }
  }
  return out;
}

}  // namespace msni::harness
