#pragma once

#include <cstddef>
#include <vector>

namespace msni {

/// Stage layout for the multi-stage Newton estimator.
///
/// The first `initial_window` = floor(K^alpha0) batches are stored and fitted
/// directly; a Newton correction is then applied whenever the number of
/// batches seen reaches `boundaries[t]` = floor(K^alphas[t]). The last
/// exponent is always 1, so the last boundary is K.
struct StageSchedule {
  std::size_t total_batches = 0;
  double alpha0 = 0.0;
  std::vector<double> alphas;
  std::size_t initial_window = 0;
  std::vector<std::size_t> boundaries;

  std::size_t stages() const { return alphas.size(); }
};

/// floor(K^alpha), evaluated in extended precision with a 1e-9 upward nudge
/// so that values a hair below an integer round to that integer.
std::size_t stage_boundary(std::size_t total_batches, double alpha);

/// Builds and validates a schedule. Exponents must satisfy
/// 0 < alpha0 < alphas[0] < ... < alphas[T-1] = 1. Boundaries after the
/// first must be strictly increasing; the first may coincide with the
/// initial window. Throws InvalidScheduleError.
StageSchedule build_schedule(std::size_t total_batches, double alpha0,
                             const std::vector<double>& alphas);

/// Exponents spaced evenly from alpha0 to 1: alpha_t = alpha0 + t (1 - alpha0) / T.
StageSchedule default_schedule(std::size_t total_batches, std::size_t stages, double alpha0);

enum class ConditionStatus { kPass, kWarn };

struct RateCondition {
  const char* name;
  double value;
  ConditionStatus status;
};

/// Finite-sample proxies for the rate conditions of the stage schedule,
/// computed from the integer boundaries:
///   initial   p / b_0
///   gap       max_t p b_t / b_{t-1}^2
///   normality p^2 K / b_{T-1}^2
/// Each is flagged kWarn when it exceeds `threshold`. These are asymptotic
/// requirements, so nothing here throws.
struct ConditionReport {
  double threshold = 0.5;
  RateCondition initial;
  RateCondition gap;
  RateCondition normality;

  bool all_pass() const;
};

ConditionReport validate_rate_conditions(const StageSchedule& schedule, std::size_t dimension,
                                         double threshold = 0.5);

}  // namespace msni
