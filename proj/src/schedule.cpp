#include "msni/schedule.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "msni/errors.hpp"

namespace msni {

std::size_t stage_boundary(std::size_t total_batches, double alpha) {
  const long double value =
      std::exp(static_cast<long double>(alpha) * std::log(static_cast<long double>(total_batches)));
  return static_cast<std::size_t>(std::floor(value + 1e-9L));
}

StageSchedule build_schedule(std::size_t total_batches, double alpha0,
                             const std::vector<double>& alphas) {
  if (total_batches < 1) throw InvalidScheduleError("schedule needs at least one batch");
  if (alphas.empty()) throw InvalidScheduleError("schedule needs at least one stage exponent");
  if (!(alpha0 > 0.0 && alpha0 < 1.0)) {
    throw InvalidScheduleError("alpha0 must lie in (0, 1), got " + std::to_string(alpha0));
  }
  double previous = alpha0;
  for (std::size_t t = 0; t < alphas.size(); ++t) {
    if (!(alphas[t] > previous)) {
      throw InvalidScheduleError("stage exponent " + std::to_string(t + 1) + " (" +
                                 std::to_string(alphas[t]) +
                                 ") must exceed the previous exponent (" +
                                 std::to_string(previous) + ")");
    }
    previous = alphas[t];
  }
  if (alphas.back() != 1.0) {
    throw InvalidScheduleError("the last stage exponent must be 1 so every batch is used");
  }

  StageSchedule s;
  s.total_batches = total_batches;
  s.alpha0 = alpha0;
  s.alphas = alphas;
  s.initial_window = std::max<std::size_t>(1, stage_boundary(total_batches, alpha0));
  s.boundaries.reserve(alphas.size());
  for (std::size_t t = 0; t < alphas.size(); ++t) {
    const std::size_t b = stage_boundary(total_batches, alphas[t]);
    if (t > 0 && b <= s.boundaries.back()) {
      throw InvalidScheduleError("stage " + std::to_string(t + 1) + " boundary " +
                                 std::to_string(b) + " collides with stage " +
                                 std::to_string(t) + " boundary");
    }
    s.boundaries.push_back(b);
  }
  s.boundaries.back() = total_batches;
  return s;
}

StageSchedule default_schedule(std::size_t total_batches, std::size_t stages, double alpha0) {
  if (stages < 1) throw InvalidScheduleError("default schedule needs T >= 1");
  std::vector<double> alphas(stages);
  for (std::size_t t = 1; t <= stages; ++t) {
    alphas[t - 1] = alpha0 + static_cast<double>(t) * (1.0 - alpha0) / static_cast<double>(stages);
  }
  alphas.back() = 1.0;
  return build_schedule(total_batches, alpha0, alphas);
}

bool ConditionReport::all_pass() const {
  return initial.status == ConditionStatus::kPass && gap.status == ConditionStatus::kPass &&
         normality.status == ConditionStatus::kPass;
}

ConditionReport validate_rate_conditions(const StageSchedule& schedule, std::size_t dimension,
                                         double threshold) {
  const auto flag = [threshold](double v) {
    return v <= threshold ? ConditionStatus::kPass : ConditionStatus::kWarn;
  };
  const double p = static_cast<double>(dimension);
  const double k = static_cast<double>(schedule.total_batches);

  // previous[t] is the boundary in force before stage t: b_0 for the first stage.
  std::vector<double> previous;
  previous.push_back(static_cast<double>(schedule.initial_window));
  for (std::size_t t = 0; t + 1 < schedule.boundaries.size(); ++t) {
    previous.push_back(static_cast<double>(schedule.boundaries[t]));
  }

  double gap = 0.0;
  for (std::size_t t = 0; t < schedule.boundaries.size(); ++t) {
    gap = std::max(gap, p * static_cast<double>(schedule.boundaries[t]) /
                            (previous[t] * previous[t]));
  }
  const double initial = p / previous.front();
  const double last = previous.back();
  const double normality = p * p * k / (last * last);

  ConditionReport report;
  report.threshold = threshold;
  report.initial = {"initial", initial, flag(initial)};
  report.gap = {"gap", gap, flag(gap)};
  report.normality = {"normality", normality, flag(normality)};
  return report;
}

}  // namespace msni
