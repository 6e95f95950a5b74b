#include "msni/harness/config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "msni/errors.hpp"
#include "msni/harness/csv.hpp"

namespace msni::harness {
namespace {

namespace pt = boost::property_tree;

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(first, last - first + 1));
}

std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(sep, start);
    const std::string piece = trim(s.substr(start, pos == std::string_view::npos ? pos : pos - start));
    if (!piece.empty()) out.push_back(piece);
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

double parse_real(const std::string& key, const std::string& text) {
  const auto slash = text.find('/');
  if (slash != std::string::npos) {
    const double num = parse_real(key, trim(text.substr(0, slash)));
    const double den = parse_real(key, trim(text.substr(slash + 1)));
    if (den == 0.0) throw ConfigError(key + ": division by zero in '" + text + "'");
    return num / den;
  }
  double value = 0.0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size()) {
    throw ConfigError(key + ": expected a number, got '" + text + "'");
  }
  return value;
}

std::size_t parse_count(const std::string& key, const std::string& text) {
  std::size_t value = 0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size()) {
    throw ConfigError(key + ": expected a non-negative integer, got '" + text + "'");
  }
  return value;
}

std::vector<double> parse_reals(const std::string& key, const std::string& text) {
  std::vector<double> out;
  for (const auto& piece : split(text, ',')) out.push_back(parse_real(key, piece));
  return out;
}

std::vector<std::size_t> parse_grid(const std::string& text, std::size_t total_batches) {
  if (text == "all") return {};
  if (text.rfind("every:", 0) == 0) {
    const std::size_t every = parse_count("run.eval_grid", trim(text.substr(6)));
    if (every == 0) throw ConfigError("run.eval_grid: 'every' needs a positive stride");
    std::vector<std::size_t> grid;
    for (std::size_t k = every; k <= total_batches; k += every) grid.push_back(k);
    if (grid.empty() || grid.back() != total_batches) grid.push_back(total_batches);
    return grid;
  }
  std::vector<std::size_t> grid;
  for (const auto& piece : split(text, ',')) grid.push_back(parse_count("run.eval_grid", piece));
  return grid;
}

TaskAssignment parse_assignment(const std::string& text) {
  TaskAssignment out;
  for (const auto& entry : split(text, ',')) {
    const auto parts = split(entry, ':');
    if (parts.size() != 3) {
      throw ConfigError("real_data.assignment: expected class:task:label, got '" + entry + "'");
    }
    const int cls = static_cast<int>(parse_count("real_data.assignment", parts[0]));
    const std::size_t task = parse_count("real_data.assignment", parts[1]);
    const int label = static_cast<int>(parse_count("real_data.assignment", parts[2]));
    if (!out.emplace(cls, std::make_pair(task, label)).second) {
      throw ConfigError("real_data.assignment: class " + parts[0] + " mapped twice");
    }
  }
  return out;
}

const std::map<std::string, std::set<std::string>>& known_keys() {
  static const std::map<std::string, std::set<std::string>> keys = {
      {"sim", {"p", "K", "n", "sigma", "setting", "tasks", "kind", "seed"}},
      {"schedule", {"alpha0", "alphas", "T"}},
      {"run", {"estimators", "reps", "eval_grid", "output_dir", "rbcl_steps", "threads"}},
      {"newton", {"tol", "max_iter", "ridge_condition"}},
      {"coverage", {"v", "level", "mode"}},
      {"real_data", {"features", "format", "batch_size", "test_fraction", "assignment"}},
  };
  return keys;
}

ExperimentConfig from_tree(const pt::ptree& tree) {
  for (const auto& [section, body] : tree) {
    const auto it = known_keys().find(section);
    if (it == known_keys().end()) throw ConfigError("unknown config section [" + section + "]");
    for (const auto& [key, value] : body) {
      if (!it->second.contains(key)) {
        throw ConfigError("unknown config key '" + key + "' in [" + section + "]");
      }
    }
  }
  const auto get = [&tree](const std::string& path) -> std::optional<std::string> {
    if (auto v = tree.get_optional<std::string>(pt::ptree::path_type(path, '.'))) return trim(*v);
    return std::nullopt;
  };

  ExperimentConfig cfg;
  try {
    if (auto v = get("sim.p")) cfg.sim.dimension = parse_count("sim.p", *v);
    if (auto v = get("sim.K")) cfg.sim.batches = parse_count("sim.K", *v);
    if (auto v = get("sim.n")) cfg.sim.batch_size = parse_count("sim.n", *v);
    if (auto v = get("sim.sigma")) cfg.sim.sigma = parse_real("sim.sigma", *v);
    if (auto v = get("sim.setting")) cfg.sim.setting = parse_setting(*v);
    if (auto v = get("sim.tasks")) cfg.sim.num_tasks = parse_count("sim.tasks", *v);
    if (auto v = get("sim.kind")) cfg.sim.kind = parse_model_kind(*v);
    if (auto v = get("sim.seed")) cfg.sim.master_seed = parse_count("sim.seed", *v);

    if (auto v = get("schedule.alpha0")) cfg.schedule.alpha0 = parse_real("schedule.alpha0", *v);
    if (auto v = get("schedule.alphas")) cfg.schedule.alphas = parse_reals("schedule.alphas", *v);
    if (auto v = get("schedule.T")) cfg.schedule.stages = parse_count("schedule.T", *v);

    if (auto v = get("run.estimators")) cfg.estimators = split(*v, ',');
    if (auto v = get("run.reps")) cfg.reps = parse_count("run.reps", *v);
    if (auto v = get("run.eval_grid")) cfg.eval_grid = parse_grid(*v, cfg.sim.batches);
    if (auto v = get("run.output_dir")) cfg.output_dir = *v;
    if (auto v = get("run.rbcl_steps")) cfg.rbcl_steps = parse_reals("run.rbcl_steps", *v);
    if (auto v = get("run.threads")) cfg.threads = parse_count("run.threads", *v);

    if (auto v = get("newton.tol")) cfg.newton.tol = parse_real("newton.tol", *v);
    if (auto v = get("newton.max_iter")) cfg.newton.max_iter = parse_count("newton.max_iter", *v);
    if (auto v = get("newton.ridge_condition")) {
      cfg.newton.ridge_condition = parse_real("newton.ridge_condition", *v);
    }

    if (auto v = get("coverage.v")) cfg.direction = parse_reals("coverage.v", *v);
    if (auto v = get("coverage.level")) cfg.level = parse_real("coverage.level", *v);
    if (auto v = get("coverage.mode")) cfg.mode = parse_variance_mode(*v);

    if (auto v = get("real_data.features")) cfg.features_path = *v;
    if (auto v = get("real_data.format")) cfg.format = parse_feature_format(*v);
    if (auto v = get("real_data.batch_size")) cfg.batch_size = parse_count("real_data.batch_size", *v);
    if (auto v = get("real_data.test_fraction")) {
      cfg.test_fraction = parse_real("real_data.test_fraction", *v);
    }
    if (auto v = get("real_data.assignment")) cfg.assignment = parse_assignment(*v);
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
  cfg.validate();
  return cfg;
}

const std::set<std::string>& known_estimators() {
  static const std::set<std::string> names = {"msni", "osni", "wlse", "rbcl", "mle_sequential", "oracle"};
  return names;
}

}  // namespace

StageSchedule ScheduleSpec::build(std::size_t total_batches) const {
  if (!alphas.empty()) return build_schedule(total_batches, alpha0, alphas);
  return default_schedule(total_batches, stages, alpha0);
}

FeatureFormat parse_feature_format(const std::string& name) {
  if (name == "csv") return FeatureFormat::kCsv;
  if (name == "f32le") return FeatureFormat::kF32le;
  throw ConfigError("unknown feature format '" + name + "' (expected csv or f32le)");
}

std::string to_string(FeatureFormat format) {
  return format == FeatureFormat::kCsv ? "csv" : "f32le";
}

TaskAssignment default_assignment(int classes) {
  TaskAssignment out;
  for (int c = 0; c < classes; ++c) out.emplace(c, std::make_pair(static_cast<std::size_t>(c / 2), c % 2));
  return out;
}

void ExperimentConfig::validate() const {
  try {
    sim.validate();
  } catch (const Error& e) {
    throw ConfigError(e.what());
  }
  if (reps < 1) throw ConfigError("run.reps must be at least 1");
  if (estimators.empty()) throw ConfigError("run.estimators must name at least one estimator");
  for (const auto& name : estimators) {
    if (!known_estimators().contains(name)) throw ConfigError("unknown estimator '" + name + "'");
  }
  for (std::size_t i = 0; i < eval_grid.size(); ++i) {
    if (eval_grid[i] < 1 || eval_grid[i] > sim.batches) {
      throw ConfigError("run.eval_grid entry " + std::to_string(eval_grid[i]) + " outside 1..K");
    }
    if (i > 0 && eval_grid[i] <= eval_grid[i - 1]) {
      throw ConfigError("run.eval_grid must be strictly increasing");
    }
  }
  if (rbcl_steps.empty()) throw ConfigError("run.rbcl_steps must not be empty");
  for (double s : rbcl_steps) {
    if (!(s > 0.0)) throw ConfigError("run.rbcl_steps entries must be positive");
  }
  if (!(newton.tol > 0.0)) throw ConfigError("newton.tol must be positive");
  if (newton.max_iter < 1) throw ConfigError("newton.max_iter must be at least 1");
  if (!(newton.ridge_condition > 1.0)) throw ConfigError("newton.ridge_condition must exceed 1");
  if (!direction.empty() && direction.size() != sim.dimension) {
    throw ConfigError("coverage.v must have p entries");
  }
  if (!(level > 0.0 && level < 1.0)) throw ConfigError("coverage.level must lie in (0, 1)");
  if (batch_size < 1) throw ConfigError("real_data.batch_size must be at least 1");
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
    throw ConfigError("real_data.test_fraction must lie in (0, 1)");
  }
  try {
    (void)schedule.build(std::max<std::size_t>(sim.batches, 1));
  } catch (const Error& e) {
    throw ConfigError(std::string("schedule: ") + e.what());
  }
}

std::vector<std::size_t> ExperimentConfig::resolved_grid() const {
  if (!eval_grid.empty()) return eval_grid;
  std::vector<std::size_t> grid(sim.batches);
  for (std::size_t k = 0; k < sim.batches; ++k) grid[k] = k + 1;
  return grid;
}

Vector ExperimentConfig::resolved_direction() const {
  Vector v = Vector::Zero(static_cast<Eigen::Index>(sim.dimension));
  if (direction.empty()) {
    v[0] = 1.0;
  } else {
    for (std::size_t j = 0; j < direction.size(); ++j) v[static_cast<Eigen::Index>(j)] = direction[j];
  }
  return v;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_config(buffer.str());
}

ExperimentConfig parse_config(const std::string& text) {
  pt::ptree tree;
  std::istringstream in(text);
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(std::string("config parse error: ") + e.what());
  }
  return from_tree(tree);
}

std::string describe_config(const ExperimentConfig& cfg) {
  const auto join_reals = [](const std::vector<double>& xs) {
    std::string out;
    for (std::size_t i = 0; i < xs.size(); ++i) out += (i ? "," : "") + format_number(xs[i]);
    return out;
  };
  const Vector direction = cfg.resolved_direction();
  std::ostringstream os;
  os << "[sim]\n"
     << "p = " << cfg.sim.dimension << "\n"
     << "K = " << cfg.sim.batches << "\n"
     << "n = " << cfg.sim.batch_size << "\n"
     << "sigma = " << format_number(cfg.sim.sigma) << "\n"
     << "setting = " << to_string(cfg.sim.setting) << "\n"
     << "tasks = " << cfg.sim.num_tasks << "\n"
     << "kind = " << to_string(cfg.sim.kind) << "\n"
     << "seed = " << cfg.sim.master_seed << "\n\n"
     << "[schedule]\n"
     << "alpha0 = " << format_number(cfg.schedule.alpha0) << "\n";
  if (cfg.schedule.alphas.empty()) {
    os << "T = " << cfg.schedule.stages << "\n\n";
  } else {
    os << "alphas = " << join_reals(cfg.schedule.alphas) << "\n\n";
  }
  os << "[run]\nestimators = ";
  for (std::size_t i = 0; i < cfg.estimators.size(); ++i) os << (i ? "," : "") << cfg.estimators[i];
  os << "\nreps = " << cfg.reps << "\neval_grid = ";
  if (cfg.eval_grid.empty()) {
    os << "all";
  } else {
    for (std::size_t i = 0; i < cfg.eval_grid.size(); ++i) os << (i ? "," : "") << cfg.eval_grid[i];
  }
  os << "\noutput_dir = " << cfg.output_dir << "\n"
     << "rbcl_steps = " << join_reals(cfg.rbcl_steps) << "\n\n"
     << "[newton]\n"
     << "tol = " << format_number(cfg.newton.tol) << "\n"
     << "max_iter = " << cfg.newton.max_iter << "\n"
     << "ridge_condition = " << format_number(cfg.newton.ridge_condition) << "\n\n"
     << "[coverage]\n"
     << "v = " << join_reals(std::vector<double>(direction.data(), direction.data() + direction.size()))
     << "\n"
     << "level = " << format_number(cfg.level) << "\n"
     << "mode = " << to_string(cfg.mode) << "\n\n"
     << "[real_data]\n"
     << "features = " << cfg.features_path << "\n"
     << "format = " << to_string(cfg.format) << "\n"
     << "batch_size = " << cfg.batch_size << "\n"
     << "test_fraction = " << format_number(cfg.test_fraction) << "\n"
     << "assignment = ";
  bool first = true;
  for (const auto& [cls, target] : cfg.assignment) {
    os << (first ? "" : ",") << cls << ":" << target.first << ":" << target.second;
    first = false;
  }
  os << "\n";
  return os.str();
}

}  // namespace msni::harness
