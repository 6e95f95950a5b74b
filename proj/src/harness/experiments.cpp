#include "msni/harness/experiments.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>

#include "msni/errors.hpp"
#include "msni/harness/csv.hpp"
#include "msni/parallel.hpp"

namespace msni::harness {
namespace {

std::filesystem::path prepare_dir(const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  return dir;
}

void write_failures(const std::filesystem::path& path, const std::vector<FailureRow>& failures) {
  CsvWriter csv(path, {"rep", "algorithm", "k", "message"});
  for (const auto& f : failures) {
    std::string message = f.message;
    for (char& c : message) {
      if (c == ',' || c == '\n' || c == '\r') c = ';';
    }
    csv.field(f.rep).field(f.algorithm).field(f.k).field(message).end_row();
  }
}

}  // namespace

std::string version_string() { return std::string("msni ") + MSNI_VERSION; }

void write_manifest(const std::filesystem::path& dir, const ExperimentConfig& cfg,
                    const std::string& command) {
  std::ofstream out(prepare_dir(dir) / "manifest.txt", std::ios::binary | std::ios::trunc);
  if (!out) throw Error("cannot write manifest in '" + dir.string() + "'");
  out << "version = " << version_string() << "\n"
      << "command = " << command << "\n"
      << "seed = " << cfg.sim.master_seed << "\n\n"
      << describe_config(cfg);
}

std::vector<EstimatorVariant> expand_estimators(const ExperimentConfig& cfg) {
  std::vector<EstimatorVariant> out;
  for (const auto& family : cfg.estimators) {
    if (family == "rbcl") {
      for (double step : cfg.rbcl_steps) out.push_back({family, "rbcl_" + format_number(step), step});
    } else {
      out.push_back({family, family, 1.0});
    }
  }
  return out;
}

std::unique_ptr<StreamingEstimator> make_estimator(const EstimatorVariant& variant,
                                                   const ExperimentConfig& cfg,
                                                   Eigen::Index dimension,
                                                   std::size_t total_batches, ModelKind kind) {
  const auto& f = variant.family;
  if (f == "msni") {
    return std::make_unique<MsniEstimator>(cfg.schedule.build(total_batches), kind, cfg.newton);
  }
  if (f == "osni") {
    return std::make_unique<MsniEstimator>(
        build_schedule(total_batches, cfg.schedule.alpha0, {1.0}), kind, cfg.newton, "osni");
  }
  if (f == "wlse") return std::make_unique<WlseEstimator>(dimension, kind, cfg.newton);
  if (f == "rbcl") return std::make_unique<RbclEstimator>(dimension, kind, variant.step, cfg.newton);
  if (f == "mle_sequential") return std::make_unique<SequentialMleEstimator>(dimension, kind, cfg.newton);
  if (f == "oracle") return std::make_unique<PooledOracleEstimator>(dimension, kind, cfg.newton);
  throw ConfigError("unknown estimator '" + f + "'");
}

// ---------------------------------------------------------------------------
// Simulation

SimulationResult simulate(const ExperimentConfig& cfg) {
  cfg.validate();
  const auto variants = expand_estimators(cfg);
  const auto grid = cfg.resolved_grid();

  struct RepOutput {
    std::vector<std::vector<CurveRow>> rows;  // per variant
    std::vector<FailureRow> failures;
  };
  std::vector<RepOutput> outputs(cfg.reps);

  parallel_for(cfg.reps, cfg.threads, [&](std::size_t rep) {
    RepOutput& out = outputs[rep];
    out.rows.resize(variants.size());
    const SimConfig rc = replication_config(cfg.sim, rep);
    const StreamSimulator sim(rc);
    const auto p = static_cast<Eigen::Index>(rc.dimension);

    std::vector<std::unique_ptr<StreamingEstimator>> estimators;
    std::vector<bool> failed(variants.size(), false);
    for (std::size_t e = 0; e < variants.size(); ++e) {
      try {
        estimators.push_back(make_estimator(variants[e], cfg, p, rc.batches, rc.kind));
      } catch (const Error& ex) {
        estimators.push_back(nullptr);
        failed[e] = true;
        out.failures.push_back({rep, variants[e].name, 0, ex.what()});
      }
    }

    std::size_t next = 0;
    for (std::size_t k = 1; k <= rc.batches; ++k) {
      const SampleBatch batch = sim.batch(k);
      for (std::size_t e = 0; e < estimators.size(); ++e) {
        if (failed[e]) continue;
        try {
          estimators[e]->ingest(batch);
        } catch (const Error& ex) {
          failed[e] = true;
          out.failures.push_back({rep, variants[e].name, k, ex.what()});
        }
      }
      if (next >= grid.size() || grid[next] != k) continue;
      ++next;

      const double dev = deviation(sim.theta_for(k), sim.params().theta0);
      for (std::size_t e = 0; e < estimators.size(); ++e) {
        if (failed[e]) continue;
        double mse = std::nan("");
        try {
          const Vector theta = estimators[e]->estimate();
          mse = rc.setting == HeterogeneitySetting::kPerBatch
                    ? mse_k(theta, sim.params().theta0)
                    : mmse(theta, sim.params().per_task, sim.task_of(k) + 1);
        } catch (const Error& ex) {
          out.failures.push_back({rep, variants[e].name, k, ex.what()});
        }
        out.rows[e].push_back({rep, variants[e].name, k, mse, dev});
      }
    }
  });

  SimulationResult result;
  for (const auto& v : variants) result.algorithms.push_back(v.name);
  for (auto& out : outputs) {
    for (auto& rows : out.rows) {
      for (auto& row : rows) result.rows.push_back(std::move(row));
    }
    for (auto& f : out.failures) result.failures.push_back(std::move(f));
  }
  return result;
}

void write_simulation(const SimulationResult& result, const ExperimentConfig& cfg,
                      const std::filesystem::path& dir) {
  prepare_dir(dir);
  {
    CsvWriter csv(dir / "curves.csv", {"rep", "algorithm", "k", "mse", "deviation"});
    for (const auto& r : result.rows) {
      csv.field(r.rep).field(r.algorithm).field(r.k).field(r.mse).field(r.deviation).end_row();
    }
  }
  {
    // Running sums keyed by (algorithm position, k) keep the output order stable.
    std::map<std::pair<std::size_t, std::size_t>, std::vector<double>> by_point;
    std::map<std::string, std::size_t> position;
    for (std::size_t i = 0; i < result.algorithms.size(); ++i) position[result.algorithms[i]] = i;
    for (const auto& r : result.rows) {
      auto& values = by_point[{position.at(r.algorithm), r.k}];
      if (std::isfinite(r.mse)) values.push_back(r.mse);
    }
    CsvWriter csv(dir / "summary.csv", {"algorithm", "k", "mean_mse", "sd_mse"});
    for (const auto& [key, values] : by_point) {
      double mean = std::nan(""), sd = std::nan("");
      if (!values.empty()) {
        double sum = 0.0;
        for (double v : values) sum += v;
        mean = sum / static_cast<double>(values.size());
        double ss = 0.0;
        for (double v : values) ss += (v - mean) * (v - mean);
        sd = values.size() > 1 ? std::sqrt(ss / static_cast<double>(values.size() - 1)) : 0.0;
      }
      csv.field(result.algorithms[key.first]).field(key.second).field(mean).field(sd).end_row();
    }
  }
  write_failures(dir / "failures.csv", result.failures);
  write_manifest(dir, cfg, "simulate");
}

SimulationResult run_simulation(const ExperimentConfig& cfg) {
  auto result = simulate(cfg);
  write_simulation(result, cfg, cfg.output_dir);
  return result;
}

// ---------------------------------------------------------------------------
// Coverage

CoverageReport run_coverage(const ExperimentConfig& cfg) {
  cfg.validate();
  CoverageOptions options;
  options.mode = cfg.mode;
  options.newton = cfg.newton;
  options.threads = cfg.threads;
  const auto report = coverage_experiment(cfg.sim, cfg.schedule.build(cfg.sim.batches),
                                          cfg.resolved_direction(), cfg.level, cfg.reps, options);

  const std::filesystem::path dir = prepare_dir(cfg.output_dir);
  {
    CsvWriter csv(dir / "coverage.csv", {"rep", "covered", "center", "half_width", "standardized_stat"});
    for (const auto& r : report.rows) {
      csv.field(r.rep)
          .field(std::string_view(r.covered ? "1" : "0"))
          .field(r.center)
          .field(r.half_width)
          .field(r.standardized_stat)
          .end_row();
    }
  }
  {
    CsvWriter csv(dir / "coverage_summary.csv",
                  {"level", "mode", "reps", "failures", "coverage", "mean_half_width", "stat_mean",
                   "stat_variance"});
    csv.field(report.level)
        .field(to_string(cfg.mode))
        .field(report.rows.size())
        .field(report.failures.size())
        .field(report.coverage)
        .field(report.mean_half_width)
        .field(report.stat_mean)
        .field(report.stat_variance)
        .end_row();
  }
  std::vector<FailureRow> failures;
  for (const auto& f : report.failures) failures.push_back({f.rep, "msni", 0, f.message});
  write_failures(dir / "failures.csv", failures);
  write_manifest(dir, cfg, "coverage");
  return report;
}

// ---------------------------------------------------------------------------
// Continual learning on feature data

ContinualMetrics continual_metrics(const AccuracyMatrix& r) {
  ContinualMetrics m;
  m.aia = aia(r);
  if (r.tasks() >= 2) {
    m.fwt = fwt(r);
    m.bwt = bwt(r);
  }
  return m;
}

std::vector<const AccuracyRecord*> RealDataResult::best() const {
  std::vector<const AccuracyRecord*> out;
  std::map<std::string, std::size_t> slot;
  for (const auto& rec : records) {
    const auto [it, inserted] = slot.emplace(rec.variant.family, out.size());
    if (inserted) {
      out.push_back(&rec);
    } else if (aia(rec.r) > aia(out[it->second]->r)) {
      out[it->second] = &rec;
    }
  }
  return out;
}

RealDataResult real_data_experiment(const FeatureDataset& dataset, const ExperimentConfig& cfg) {
  const auto splits = split_tasks(dataset, cfg.batch_size, cfg.test_fraction, cfg.sim.master_seed);
  const std::size_t tasks = splits.size();
  std::size_t total_batches = 0;
  for (const auto& s : splits) total_batches += s.train.size();
  const auto d = dataset.features.cols();

  AccuracyMatrix baseline(tasks);
  {
    RngStream rng(cfg.sim.master_seed, RngStream::Purpose::kRandomInit);
    Vector theta(d);
    const double scale = 1.0 / std::sqrt(static_cast<double>(d));
    for (Eigen::Index j = 0; j < d; ++j) theta[j] = scale * rng.normal();
    for (std::size_t j = 0; j < tasks; ++j) {
      baseline.set(0, j + 1, classify_accuracy(theta, splits[j].test));
    }
  }

  const auto variants = expand_estimators(cfg);
  std::vector<std::optional<AccuracyMatrix>> matrices(variants.size());
  std::vector<std::optional<FailureRow>> failures(variants.size());

  parallel_for(variants.size(), cfg.threads, [&](std::size_t e) {
    std::size_t k = 0;
    try {
      auto estimator = make_estimator(variants[e], cfg, d, total_batches, ModelKind::kLogistic);
      AccuracyMatrix r = baseline;
      for (std::size_t i = 0; i < tasks; ++i) {
        for (const auto& batch : splits[i].train) {
          k = batch.index;
          estimator->ingest(batch);
        }
        const Vector theta = estimator->estimate();
        for (std::size_t j = 0; j < tasks; ++j) {
          r.set(i + 1, j + 1, classify_accuracy(theta, splits[j].test));
        }
      }
      matrices[e] = std::move(r);
    } catch (const Error& ex) {
      failures[e] = FailureRow{0, variants[e].name, k, ex.what()};
    }
  });

  RealDataResult result;
  for (std::size_t e = 0; e < variants.size(); ++e) {
    if (matrices[e]) result.records.push_back({variants[e], std::move(*matrices[e])});
    if (failures[e]) result.failures.push_back(std::move(*failures[e]));
  }
  return result;
}

namespace {

void write_metrics_row(CsvWriter& csv, const EstimatorVariant& v, const ContinualMetrics& m) {
  csv.field(v.family).field(v.step).field(m.aia);
  if (m.fwt) csv.field(*m.fwt); else csv.empty();
  if (m.bwt) csv.field(*m.bwt); else csv.empty();
  csv.end_row();
}

}  // namespace

void write_real_data(const RealDataResult& result, const ExperimentConfig& cfg,
                     const std::filesystem::path& dir) {
  prepare_dir(dir);
  {
    CsvWriter csv(dir / "accuracy.csv", {"estimator", "step", "i", "j", "R"});
    for (const auto& rec : result.records) {
      for (std::size_t i = 0; i <= rec.r.tasks(); ++i) {
        for (std::size_t j = 1; j <= rec.r.tasks(); ++j) {
          csv.field(rec.variant.family).field(rec.variant.step).field(i).field(j).field(rec.r(i, j)).end_row();
        }
      }
    }
  }
  {
    CsvWriter csv(dir / "metrics.csv", {"estimator", "step", "aia", "fwt", "bwt"});
    for (const auto& rec : result.records) write_metrics_row(csv, rec.variant, continual_metrics(rec.r));
  }
  {
    CsvWriter csv(dir / "best_metrics.csv", {"estimator", "step", "aia", "fwt", "bwt"});
    for (const auto* rec : result.best()) write_metrics_row(csv, rec->variant, continual_metrics(rec->r));
  }
  write_failures(dir / "failures.csv", result.failures);
  write_manifest(dir, cfg, "real-data");
}

RealDataResult run_real_data(const FeatureDataset& dataset, const ExperimentConfig& cfg) {
  auto result = real_data_experiment(dataset, cfg);
  write_real_data(result, cfg, cfg.output_dir);
  return result;
}

std::vector<std::pair<EstimatorVariant, ContinualMetrics>> recompute_metrics(
    const std::filesystem::path& accuracy_csv, const std::filesystem::path& out_dir) {
  const auto rows = read_csv(accuracy_csv);
  if (rows.empty() || rows.front() != std::vector<std::string>{"estimator", "step", "i", "j", "R"}) {
    throw ParseError("accuracy file must start with the header estimator,step,i,j,R");
  }
  struct Entry {
    EstimatorVariant variant;
    std::map<std::pair<std::size_t, std::size_t>, double> values;
    std::size_t tasks = 0;
  };
  std::vector<Entry> entries;
  std::map<std::pair<std::string, std::string>, std::size_t> index;

  for (std::size_t line = 1; line < rows.size(); ++line) {
    const auto& row = rows[line];
    const auto where = "accuracy row " + std::to_string(line);
    if (row.size() != 5) throw ParseError(where + ": expected 5 fields");
    std::size_t i = 0, j = 0;
    double step = 0.0, value = 0.0;
    const auto parse = [&where](const std::string& s, auto& out) {
      const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
      if (ec != std::errc() || ptr != s.data() + s.size()) throw ParseError(where + ": bad field '" + s + "'");
    };
    parse(row[1], step);
    parse(row[2], i);
    parse(row[3], j);
    parse(row[4], value);
    const auto [it, inserted] = index.emplace(std::make_pair(row[0], row[1]), entries.size());
    if (inserted) {
      const std::string name = row[0] == "rbcl" ? "rbcl_" + format_number(step) : row[0];
      entries.push_back({{row[0], name, step}, {}, 0});
    }
    auto& entry = entries[it->second];
    entry.values[{i, j}] = value;
    entry.tasks = std::max(entry.tasks, j);
  }

  std::vector<std::pair<EstimatorVariant, ContinualMetrics>> out;
  prepare_dir(out_dir);
  CsvWriter csv(out_dir / "metrics.csv", {"estimator", "step", "aia", "fwt", "bwt"});
  for (const auto& entry : entries) {
    Matrix values(static_cast<Eigen::Index>(entry.tasks + 1), static_cast<Eigen::Index>(entry.tasks));
    for (std::size_t i = 0; i <= entry.tasks; ++i) {
      for (std::size_t j = 1; j <= entry.tasks; ++j) {
        const auto it = entry.values.find({i, j});
        if (it == entry.values.end()) {
          throw ParseError("accuracy for " + entry.variant.name + " lacks R(" + std::to_string(i) +
                           "," + std::to_string(j) + ")");
        }
        values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j - 1)) = it->second;
      }
    }
    const auto metrics = continual_metrics(AccuracyMatrix(std::move(values)));
    write_metrics_row(csv, entry.variant, metrics);
    out.emplace_back(entry.variant, metrics);
  }
  return out;
}

}  // namespace msni::harness
