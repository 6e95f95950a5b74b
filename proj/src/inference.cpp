#include "msni/inference.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "msni/errors.hpp"
#include "msni/parallel.hpp"

namespace msni {

std::string_view to_string(VarianceMode mode) {
  return mode == VarianceMode::kHeterogeneous ? "heterogeneous" : "homogeneous";
}

VarianceMode parse_variance_mode(std::string_view name) {
  if (name == "heterogeneous") return VarianceMode::kHeterogeneous;
  if (name == "homogeneous") return VarianceMode::kHomogeneous;
  throw InvalidInputError("unknown variance mode '" + std::string(name) + "'");
}

double SandwichEstimate::direction_variance(const Vector& v, double ridge_condition) const {
  const Vector w = solve_spd(sigma_hat, v, ridge_condition);
  return std::max(0.0, w.dot(score_cov * w));
}

SandwichEstimate sandwich_estimate(const BatchSource& batches, std::size_t batch_count,
                                   const Vector& theta_hat, ModelKind kind, VarianceMode mode) {
  if (batch_count == 0) throw InvalidInputError("sandwich_estimate: no batches");
  if (!theta_hat.allFinite()) throw InvalidInputError("sandwich_estimate: non-finite estimate");
  const auto p = theta_hat.size();
  Matrix hessian_sum = Matrix::Zero(p, p);
  Matrix score_sum = Matrix::Zero(p, p);
  double samples = 0.0;

  for (std::size_t k = 1; k <= batch_count; ++k) {
    const SampleBatch batch = batches(k);
    hessian_sum += loss_hessian(batch, kind, theta_hat);
    const Vector r = score_residuals(batch, kind, theta_hat);
    if (mode == VarianceMode::kHeterogeneous) {
      const Vector g = batch.features.transpose() * r / static_cast<double>(batch.size());
      score_sum.selfadjointView<Eigen::Lower>().rankUpdate(g);
    } else {
      const Matrix scaled = batch.features.array().colwise() * r.array();
      score_sum.selfadjointView<Eigen::Lower>().rankUpdate(scaled.transpose());
      samples += static_cast<double>(batch.size());
    }
  }

  SandwichEstimate est;
  est.mode = mode;
  const double k = static_cast<double>(batch_count);
  est.sigma_hat = hessian_sum / k;
  symmetrize_from_lower(score_sum);
  est.effective_scale = mode == VarianceMode::kHeterogeneous ? k : samples;
  est.score_cov = score_sum / est.effective_scale;
  return est;
}

double normal_quantile(double probability) {
  if (!(probability > 0.0 && probability < 1.0)) {
    throw InvalidInputError("normal_quantile: probability must lie in (0, 1)");
  }
  // Acklam's rational approximation followed by one Halley correction.
  static constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                                 -2.759285104469687e+02, 1.383577518672690e+02,
                                 -3.066479806614716e+01, 2.506628277459239e+00};
  static constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                                 -1.556989798598866e+02, 6.680131188771972e+01,
                                 -1.328068155288572e+01};
  static constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                                 -2.400758277161838e+00, -2.549732539343734e+00,
                                 4.374664141464968e+00,  2.938163982698783e+00};
  static constexpr double d[] = {7.784695709041462e-03, 3.224671290700398e-01,
                                 2.445134137142996e+00, 3.754408661907416e+00};
  constexpr double low = 0.02425;

  double x;
  if (probability < low) {
    const double q = std::sqrt(-2.0 * std::log(probability));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  } else if (probability <= 1.0 - low) {
    const double q = probability - 0.5;
    const double r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  } else {
    const double q = std::sqrt(-2.0 * std::log1p(-probability));
    x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
  }

  const double e = 0.5 * std::erfc(-x / std::numbers::sqrt2) - probability;
  const double u = e * std::sqrt(2.0 * std::numbers::pi) * std::exp(0.5 * x * x);
  return x - u / (1.0 + 0.5 * x * u);
}

ConfidenceInterval project_ci(const SandwichEstimate& est, const Vector& theta_hat,
                              const Vector& v, double level, double ridge_condition) {
  if (!(level > 0.0 && level < 1.0)) throw InvalidInputError("project_ci: level must lie in (0, 1)");
  if (v.size() != theta_hat.size()) throw InvalidInputError("project_ci: direction dimension mismatch");
  if (v.isZero(0.0)) throw InvalidInputError("project_ci: direction must be nonzero");
  const double z = normal_quantile(0.5 * (1.0 + level));
  ConfidenceInterval ci;
  ci.center = v.dot(theta_hat);
  ci.half_width = z * std::sqrt(est.direction_variance(v, ridge_condition) / est.effective_scale);
  ci.level = level;
  ci.direction = v;
  return ci;
}

SimConfig replication_config(const SimConfig& cfg, std::size_t rep) {
  SimConfig out = cfg;
  out.master_seed = RngStream::derive(cfg.master_seed, RngStream::Purpose::kReplication, rep);
  return out;
}

CoverageReport coverage_experiment(const SimConfig& cfg, const StageSchedule& schedule,
                                   const Vector& v, double level, std::size_t reps,
                                   const CoverageOptions& options) {
  cfg.validate();
  if (reps < 1) throw InvalidInputError("coverage_experiment: reps must be positive");
  if (schedule.total_batches != cfg.batches) {
    throw InvalidInputError("coverage_experiment: schedule and config disagree on K");
  }
  if (v.size() != static_cast<Eigen::Index>(cfg.dimension)) {
    throw InvalidInputError("coverage_experiment: direction dimension mismatch");
  }
  const double z = normal_quantile(0.5 * (1.0 + level));

  struct Outcome {
    bool ok = false;
    CoverageRow row;
    std::string message;
  };
  std::vector<Outcome> outcomes(reps);

  parallel_for(reps, options.threads, [&](std::size_t rep) {
    Outcome& out = outcomes[rep];
    out.row.rep = rep;
    try {
      const StreamSimulator sim(replication_config(cfg, rep));
      const BatchSource source = [&sim](std::size_t k) { return sim.batch(k); };
      const MsniResult fit = msni_run(source, schedule, cfg.kind, options.newton);
      const SandwichEstimate est =
          sandwich_estimate(source, cfg.batches, fit.estimate, cfg.kind, options.mode);
      const ConfidenceInterval ci =
          project_ci(est, fit.estimate, v, level, options.newton.ridge_condition);
      const double truth = v.dot(sim.params().theta0);
      out.row.center = ci.center;
      out.row.half_width = ci.half_width;
      out.row.covered = std::abs(ci.center - truth) <= ci.half_width;
      out.row.standardized_stat = (ci.center - truth) / (ci.half_width / z);
      out.ok = std::isfinite(out.row.standardized_stat);
      if (!out.ok) out.message = "degenerate interval";
    } catch (const std::exception& e) {
      out.message = e.what();
    }
  });

  CoverageReport report;
  report.level = level;
  for (auto& out : outcomes) {
    if (out.ok) {
      report.rows.push_back(out.row);
    } else {
      report.failures.push_back({out.row.rep, out.message});
    }
  }
  const double n = static_cast<double>(report.rows.size());
  if (n > 0) {
    double covered = 0.0, width = 0.0, stat = 0.0;
    for (const auto& r : report.rows) {
      covered += r.covered ? 1.0 : 0.0;
      width += r.half_width;
      stat += r.standardized_stat;
    }
    report.coverage = covered / n;
    report.mean_half_width = width / n;
    report.stat_mean = stat / n;
    double ss = 0.0;
    for (const auto& r : report.rows) {
      ss += (r.standardized_stat - report.stat_mean) * (r.standardized_stat - report.stat_mean);
    }
    report.stat_variance = n > 1 ? ss / (n - 1.0) : 0.0;
  }
  return report;
}

}  // namespace msni
