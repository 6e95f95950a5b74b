// Experiment driver: simulation curves, interval coverage, feature-file
// continual learning, stream dumps and metric recomputation.

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "msni/errors.hpp"
#include "msni/harness/config.hpp"
#include "msni/harness/csv.hpp"
#include "msni/harness/experiments.hpp"
#include "msni/harness/features.hpp"

namespace {

using namespace msni;
using namespace msni::harness;

struct CommonFlags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<std::size_t> threads;
  std::optional<std::string> format;
};

void add_common(CLI::App* cmd, CommonFlags& flags) {
  cmd->add_option("--config", flags.config, "experiment config (INI)");
  cmd->add_option("--seed", flags.seed, "master seed override");
  cmd->add_option("--out", flags.out, "output directory (or file for dump-stream)");
  cmd->add_option("--threads", flags.threads, "worker threads")->check(CLI::PositiveNumber);
  cmd->add_option("--format", flags.format, "feature file format: csv or f32le");
}

ExperimentConfig resolve(const CommonFlags& flags) {
  ExperimentConfig cfg = flags.config.empty() ? ExperimentConfig{} : load_config(flags.config);
  if (flags.seed) cfg.sim.master_seed = *flags.seed;
  if (flags.out) cfg.output_dir = *flags.out;
  if (flags.threads) cfg.threads = *flags.threads;
  if (flags.format) cfg.format = parse_feature_format(*flags.format);
  cfg.validate();
  return cfg;
}

int run_simulate(const CommonFlags& flags) {
  const auto cfg = resolve(flags);
  const auto result = run_simulation(cfg);
  std::cout << "wrote " << result.rows.size() << " curve rows to " << cfg.output_dir << "\n";
  if (!result.failures.empty()) {
    std::cerr << result.failures.size() << " estimator failure(s), see failures.csv\n";
  }
  return 0;
}

int run_coverage_cmd(const CommonFlags& flags) {
  const auto cfg = resolve(flags);
  const auto report = run_coverage(cfg);
  std::cout << "coverage " << format_number(report.coverage) << " over " << report.rows.size()
            << " reps (" << report.failures.size() << " failed), stat mean "
            << format_number(report.stat_mean) << ", variance " << format_number(report.stat_variance)
            << "\n";
  return 0;
}

int run_real_data_cmd(const CommonFlags& flags) {
  const auto cfg = resolve(flags);
  if (cfg.features_path.empty()) throw ConfigError("real-data needs [real_data] features = <path>");
  const auto dataset = ingest_features(cfg.features_path, cfg.format, cfg.assignment);
  const auto result = run_real_data(dataset, cfg);
  for (const auto* rec : result.best()) {
    const auto m = continual_metrics(rec->r);
    std::cout << rec->variant.name << ": AIA " << format_number(m.aia);
    if (m.fwt) std::cout << ", FWT " << format_number(*m.fwt) << ", BWT " << format_number(*m.bwt);
    std::cout << "\n";
  }
  if (!result.failures.empty()) {
    std::cerr << result.failures.size() << " estimator failure(s), see failures.csv\n";
  }
  return 0;
}

int run_dump(const CommonFlags& flags) {
  const auto cfg = resolve(flags);
  const std::string path =
      flags.out ? *flags.out : "stream." + std::string(cfg.format == FeatureFormat::kCsv ? "csv" : "f32le");
  write_feature_table(path, simulate_feature_table(cfg.sim), cfg.format);
  std::cout << "wrote " << cfg.sim.batches * cfg.sim.batch_size << " rows to " << path << "\n";
  return 0;
}

int run_metrics(const std::string& input, const CommonFlags& flags) {
  const std::string out = flags.out ? *flags.out : std::filesystem::path(input).parent_path().string();
  for (const auto& [variant, m] : recompute_metrics(input, out.empty() ? "." : out)) {
    std::cout << variant.name << ": AIA " << format_number(m.aia);
    if (m.fwt) std::cout << ", FWT " << format_number(*m.fwt) << ", BWT " << format_number(*m.bwt);
    std::cout << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-stage Newton iteration experiments"};
  app.set_version_flag("--version", version_string());
  app.require_subcommand(1);

  CommonFlags flags;
  std::string input;
  auto* simulate = app.add_subcommand("simulate", "replicated simulation curves");
  auto* coverage = app.add_subcommand("coverage", "confidence interval coverage study");
  auto* real_data = app.add_subcommand("real-data", "continual learning on a feature file");
  auto* dump = app.add_subcommand("dump-stream", "write a simulated stream as a feature file");
  auto* metrics = app.add_subcommand("metrics", "recompute AIA/FWT/BWT from accuracy.csv");
  for (auto* cmd : {simulate, coverage, real_data, dump}) add_common(cmd, flags);
  metrics->add_option("--input", input, "accuracy.csv from a real-data run")->required();
  metrics->add_option("--out", flags.out, "directory for metrics.csv");

  CLI11_PARSE(app, argc, argv);

  try {
    if (simulate->parsed()) return run_simulate(flags);
    if (coverage->parsed()) return run_coverage_cmd(flags);
    if (real_data->parsed()) return run_real_data_cmd(flags);
    if (dump->parsed()) return run_dump(flags);
    return run_metrics(input, flags);
  } catch (const msni::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
