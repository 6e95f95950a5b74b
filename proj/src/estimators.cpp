#include "msni/estimators.hpp"

#include <cmath>
#include <sstream>
#include <string>

#include "msni/errors.hpp"

namespace msni {
namespace {

constexpr int kMaxHalvings = 30;

struct PooledDerivatives {
  Vector gradient;
  Matrix hessian;
};

double pooled_value(std::span<const SampleBatch> batches, ModelKind kind, const Vector& theta) {
  double total = 0.0;
  for (const auto& b : batches) total += loss_value(b, kind, theta);
  return total / static_cast<double>(batches.size());
}

PooledDerivatives pooled_derivatives(std::span<const SampleBatch> batches, ModelKind kind,
                                     const Vector& theta) {
  NewtonAccumulator acc(theta.size());
  for (const auto& b : batches) acc.add_batch(b, kind, theta);
  const double scale = 1.0 / static_cast<double>(batches.size());
  return {acc.grad_sum * scale, acc.hess_sum * scale};
}

std::string format_step(double value) {
  std::ostringstream os;
  os << value;
  return os.str();
}

}  // namespace

Vector solve_newton(std::span<const SampleBatch> batches, ModelKind kind, const Vector& init,
                    const NewtonOptions& options) {
  if (batches.empty()) throw InvalidInputError("solve_newton: no batches");
  if (!(options.tol > 0.0)) throw InvalidInputError("solve_newton: tol must be positive");

  Vector theta = init;
  double value = pooled_value(batches, kind, theta);
  double gradient_norm = 0.0;

  for (std::size_t iter = 0; iter < options.max_iter; ++iter) {
    const auto [g, h] = pooled_derivatives(batches, kind, theta);
    gradient_norm = g.norm();
    if (!std::isfinite(gradient_norm)) {
      throw NonConvergenceError("solve_newton: non-finite gradient", theta, gradient_norm);
    }
    Vector step;
    try {
      step = solve_spd(h, g, options.ridge_condition);
    } catch (const SingularSystemError&) {
      // Curvature that vanished along the way means the iterate ran off to infinity.
      if (iter == 0) throw;
      throw NonConvergenceError("solve_newton: curvature vanished", theta, gradient_norm);
    }
    if (gradient_norm <= options.tol && step.norm() <= 1e-6 * (1.0 + theta.norm())) {
      return theta;
    }

    double scale = 1.0;
    bool accepted = false;
    for (int halving = 0; halving <= kMaxHalvings; ++halving, scale *= 0.5) {
      Vector candidate = theta - scale * step;
      const double candidate_value = pooled_value(batches, kind, candidate);
      if (std::isfinite(candidate_value) &&
          candidate_value <= value + 1e-12 * (1.0 + std::abs(value))) {
        theta = std::move(candidate);
        value = candidate_value;
        accepted = true;
        break;
      }
    }
    if (!accepted) {
      throw NonConvergenceError("solve_newton: step halving failed to decrease the loss", theta,
                                gradient_norm);
    }
  }
  throw NonConvergenceError("solve_newton: no convergence after " +
                                std::to_string(options.max_iter) + " iterations",
                            theta, gradient_norm);
}

Vector initial_m_estimate(std::span<const SampleBatch> batches, ModelKind kind,
                          const NewtonOptions& options) {
  if (batches.empty()) throw InvalidInputError("initial_m_estimate: empty window");
  return solve_newton(batches, kind, Vector::Zero(batches.front().dimension()), options);
}

Vector pooled_oracle(std::span<const SampleBatch> batches, ModelKind kind,
                     const NewtonOptions& options) {
  if (batches.empty()) throw InvalidInputError("pooled_oracle: no batches");
  return solve_newton(batches, kind, Vector::Zero(batches.front().dimension()), options);
}

// ---------------------------------------------------------------------------
// NewtonAccumulator

NewtonAccumulator::NewtonAccumulator(Eigen::Index dimension)
    : grad_sum(Vector::Zero(dimension)), hess_sum(Matrix::Zero(dimension, dimension)) {}

void NewtonAccumulator::add(const Vector& gradient, const Matrix& hessian) {
  if (grad_sum.size() == 0) *this = NewtonAccumulator(gradient.size());
  if (gradient.size() != grad_sum.size() || hessian.rows() != grad_sum.size() ||
      hessian.cols() != grad_sum.size()) {
    throw InvalidInputError("NewtonAccumulator: dimension mismatch");
  }
  grad_sum += gradient;
  hess_sum += hessian;
  ++count;
}

void NewtonAccumulator::add_batch(const SampleBatch& batch, ModelKind kind, const Vector& theta) {
  add(loss_gradient(batch, kind, theta), loss_hessian(batch, kind, theta));
}

void NewtonAccumulator::merge(const NewtonAccumulator& other) {
  if (other.count == 0) return;
  if (count == 0) {
    *this = other;
    return;
  }
  if (other.grad_sum.size() != grad_sum.size()) {
    throw InvalidInputError("NewtonAccumulator: dimension mismatch in merge");
  }
  grad_sum += other.grad_sum;
  hess_sum += other.hess_sum;
  count += other.count;
}

// ---------------------------------------------------------------------------
// MSNI

MsniState MsniState::start(StageSchedule schedule, Vector initial_estimate,
                           double ridge_condition) {
  MsniState s;
  s.acc = NewtonAccumulator(initial_estimate.size());
  s.schedule = std::move(schedule);
  s.estimate_history.push_back({0, s.schedule.initial_window, initial_estimate});
  s.current_estimate = std::move(initial_estimate);
  s.ridge_condition = ridge_condition;
  return s;
}

void msni_ingest(MsniState& state, const SampleBatch& batch, ModelKind kind) {
  if (state.batches_seen >= state.schedule.total_batches || state.finished()) {
    throw InvalidInputError("msni_ingest: stream already holds all " +
                            std::to_string(state.schedule.total_batches) + " batches");
  }
  if (batch.index != state.batches_seen + 1) {
    throw InvalidInputError("msni_ingest: expected batch " +
                            std::to_string(state.batches_seen + 1) + ", got " +
                            std::to_string(batch.index));
  }
  state.acc.add_batch(batch, kind, state.current_estimate);
  ++state.batches_seen;
  if (state.batches_seen == state.schedule.boundaries[state.stage]) msni_stage_update(state);
}

void msni_stage_update(MsniState& state) {
  if (state.finished()) throw InvalidInputError("msni_stage_update: all stages done");
  const std::size_t boundary = state.schedule.boundaries[state.stage];
  if (state.batches_seen != boundary || state.acc.count != boundary) {
    throw InvalidInputError("msni_stage_update: called at batch " +
                            std::to_string(state.batches_seen) + ", boundary is " +
                            std::to_string(boundary));
  }
  const double scale = 1.0 / static_cast<double>(boundary);
  const Matrix mean_hessian = state.acc.hess_sum * scale;
  const Vector mean_gradient = state.acc.grad_sum * scale;
  state.current_estimate -= solve_spd(mean_hessian, mean_gradient, state.ridge_condition);
  ++state.stage;
  state.estimate_history.push_back({state.stage, boundary, state.current_estimate});
}

MsniEstimator::MsniEstimator(StageSchedule schedule, ModelKind kind, NewtonOptions options,
                             std::string name)
    : schedule_(std::move(schedule)), kind_(kind), options_(options), name_(std::move(name)) {}

std::size_t MsniEstimator::batches_seen() const {
  return state_ ? state_->batches_seen : window_.size();
}

void MsniEstimator::ingest(const SampleBatch& batch) {
  if (state_) {
    msni_ingest(*state_, batch, kind_);
    return;
  }
  if (batch.index != window_.size() + 1) {
    throw InvalidInputError("MsniEstimator: expected batch " + std::to_string(window_.size() + 1) +
                            ", got " + std::to_string(batch.index));
  }
  window_.push_back(batch);
  if (window_.size() < schedule_.initial_window) return;

  Vector initial = initial_m_estimate(window_, kind_, options_);
  state_ = MsniState::start(schedule_, std::move(initial), options_.ridge_condition);
  for (const auto& stored : window_) msni_ingest(*state_, stored, kind_);
  window_.clear();
  window_.shrink_to_fit();
}

Vector MsniEstimator::estimate() {
  if (state_) return state_->current_estimate;
  if (window_.empty()) throw InvalidInputError("MsniEstimator: no batches ingested");
  return initial_m_estimate(window_, kind_, options_);
}

MsniResult msni_run(const BatchSource& stream, const StageSchedule& schedule, ModelKind kind,
                    const NewtonOptions& options) {
  MsniEstimator estimator(schedule, kind, options);
  for (std::size_t k = 1; k <= schedule.total_batches; ++k) estimator.ingest(stream(k));
  MsniState state = *estimator.state();
  Vector estimate = state.current_estimate;
  return {std::move(estimate), std::move(state)};
}

MsniResult osni_run(const BatchSource& stream, std::size_t total_batches, double alpha0,
                    ModelKind kind, const NewtonOptions& options) {
  return msni_run(stream, build_schedule(total_batches, alpha0, {1.0}), kind, options);
}

// ---------------------------------------------------------------------------
// WLSE

WlseState::WlseState(Eigen::Index dimension)
    : hess_total(Matrix::Zero(dimension, dimension)), weighted_sum(Vector::Zero(dimension)) {}

void WlseState::merge(const WlseState& other) {
  if (other.count == 0 && other.skipped == 0) return;
  if (count == 0 && hess_total.size() == 0) {
    const auto skipped_here = skipped;
    *this = other;
    skipped += skipped_here;
    return;
  }
  hess_total += other.hess_total;
  weighted_sum += other.weighted_sum;
  count += other.count;
  skipped += other.skipped;
}

void wlse_ingest(WlseState& state, const SampleBatch& batch, ModelKind kind,
                 const NewtonOptions& options) {
  if (state.hess_total.size() == 0) {
    const auto skipped = state.skipped;
    state = WlseState(batch.dimension());
    state.skipped = skipped;
  }
  Vector theta_k;
  Matrix weight;
  try {
    const SampleBatch* single = &batch;
    theta_k = solve_newton(std::span<const SampleBatch>(single, 1), kind,
                           Vector::Zero(batch.dimension()), options);
    weight = loss_hessian(batch, kind, theta_k);
  } catch (const NonConvergenceError&) {
    ++state.skipped;
    return;
  } catch (const SingularSystemError&) {
    ++state.skipped;
    return;
  }
  state.hess_total += weight;
  state.weighted_sum += weight * theta_k;
  ++state.count;
}

Vector wlse_finalize(const WlseState& state, double ridge_condition) {
  if (state.count == 0) throw InvalidInputError("wlse_finalize: no batch was fitted");
  return solve_spd(state.hess_total, state.weighted_sum, ridge_condition);
}

WlseEstimator::WlseEstimator(Eigen::Index dimension, ModelKind kind, NewtonOptions options)
    : kind_(kind), options_(options), state_(dimension) {}

void WlseEstimator::ingest(const SampleBatch& batch) { wlse_ingest(state_, batch, kind_, options_); }

Vector WlseEstimator::estimate() { return wlse_finalize(state_, options_.ridge_condition); }

// ---------------------------------------------------------------------------
// RBCL and sequential MLE

Vector rbcl_update(const Vector& theta_prev, const Matrix& hess_accum, std::size_t count,
                   const SampleBatch& batch, ModelKind kind, double step,
                   double ridge_condition) {
  if (count == 0) throw InvalidInputError("rbcl_update: no accumulated Hessian");
  const Matrix mean_hessian = hess_accum / static_cast<double>(count);
  const Vector gradient = loss_gradient(batch, kind, theta_prev);
  return theta_prev - step * solve_spd(mean_hessian, gradient, ridge_condition);
}

Vector fit_single_batch(const SampleBatch& batch, ModelKind kind, const Vector& init,
                        const NewtonOptions& options) {
  const std::span<const SampleBatch> one(&batch, 1);
  if (!init.isZero(0.0)) {
    // A warm start far out on a separated direction sees a flat logistic
    // loss; fall back to the origin, which always has curvature.
    try {
      return solve_newton(one, kind, init, options);
    } catch (const NonConvergenceError&) {
    } catch (const SingularSystemError&) {
    }
  }
  try {
    return solve_newton(one, kind, Vector::Zero(init.size()), options);
  } catch (const NonConvergenceError& e) {
    if (!e.last_iterate().allFinite()) throw;
    return e.last_iterate();
  }
}

RbclEstimator::RbclEstimator(Eigen::Index dimension, ModelKind kind, double step,
                             NewtonOptions options)
    : kind_(kind),
      step_(step),
      options_(options),
      theta_(Vector::Zero(dimension)),
      hess_accum_(Matrix::Zero(dimension, dimension)) {
  if (!(step > 0.0)) throw InvalidInputError("RBCL step must be positive");
}

std::string RbclEstimator::name() const { return "rbcl_" + format_step(step_); }

void RbclEstimator::ingest(const SampleBatch& batch) {
  if (count_ == 0) {
    theta_ = fit_single_batch(batch, kind_, theta_, options_);
  } else {
    theta_ = rbcl_update(theta_, hess_accum_, count_, batch, kind_, step_, options_.ridge_condition);
  }
  hess_accum_ += loss_hessian(batch, kind_, theta_);
  ++count_;
}

SequentialMleEstimator::SequentialMleEstimator(Eigen::Index dimension, ModelKind kind,
                                               NewtonOptions options)
    : kind_(kind), options_(options), theta_(Vector::Zero(dimension)) {}

void SequentialMleEstimator::ingest(const SampleBatch& batch) {
  theta_ = fit_single_batch(batch, kind_, theta_, options_);
}

PooledOracleEstimator::PooledOracleEstimator(Eigen::Index dimension, ModelKind kind,
                                             NewtonOptions options)
    : kind_(kind), options_(options), last_(Vector::Zero(dimension)) {}

Vector PooledOracleEstimator::estimate() {
  if (batches_.empty()) throw InvalidInputError("oracle: no batches ingested");
  last_ = solve_newton(batches_, kind_, last_, options_);
  return last_;
}

}  // namespace msni
