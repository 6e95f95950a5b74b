#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "msni/loss_models.hpp"
#include "msni/schedule.hpp"

namespace msni {

struct NewtonOptions {
  double tol = 1e-8;
  std::size_t max_iter = 100;
  double ridge_condition = kDefaultRidgeCondition;
};

/// Damped Newton minimization of the pooled loss (1/B) sum_k L_k(theta).
///
/// Each full step is halved (at most 30 times) until the pooled loss does not
/// increase. Converged when the gradient norm is at most `tol` and the last
/// Newton step is negligible; the second test keeps a diverging iterate with
/// a vanishing gradient (complete separation in logistic data) from being
/// reported as a minimizer.
///
/// Throws SingularSystemError, or NonConvergenceError carrying the last
/// iterate and its gradient norm.
Vector solve_newton(std::span<const SampleBatch> batches, ModelKind kind, const Vector& init,
                    const NewtonOptions& options = {});

/// M-estimate on the stored initial window, started from zero.
Vector initial_m_estimate(std::span<const SampleBatch> batches, ModelKind kind,
                          const NewtonOptions& options = {});

/// Minimizer of the pooled empirical risk over every batch. Needs the whole
/// stream in memory; used as the reference the streaming estimators are
/// compared against.
Vector pooled_oracle(std::span<const SampleBatch> batches, ModelKind kind,
                     const NewtonOptions& options = {});

/// Running sums of batch-mean gradients and Hessians.
struct NewtonAccumulator {
  Vector grad_sum;
  Matrix hess_sum;
  std::size_t count = 0;

  NewtonAccumulator() = default;
  explicit NewtonAccumulator(Eigen::Index dimension);

  void add(const Vector& gradient, const Matrix& hessian);
  /// Adds the batch's mean gradient and Hessian evaluated at `theta`.
  void add_batch(const SampleBatch& batch, ModelKind kind, const Vector& theta);
  void merge(const NewtonAccumulator& other);
};

struct StageEstimate {
  std::size_t stage = 0;
  std::size_t batch_index = 0;
  Vector theta;
};

/// Streaming state after the initial window has been fitted.
struct MsniState {
  StageSchedule schedule;
  NewtonAccumulator acc;
  Vector current_estimate;
  /// Number of completed stage updates; the next one fires at boundaries[stage].
  std::size_t stage = 0;
  std::size_t batches_seen = 0;
  std::vector<StageEstimate> estimate_history;
  double ridge_condition = kDefaultRidgeCondition;

  /// State holding the initial estimate, before any batch has been ingested.
  static MsniState start(StageSchedule schedule, Vector initial_estimate,
                         double ridge_condition = kDefaultRidgeCondition);
  bool finished() const { return stage == schedule.stages(); }
};

/// Accumulates the batch's gradient and Hessian at the current estimate and
/// applies msni_stage_update when a stage boundary is reached. The batch is
/// not retained.
void msni_ingest(MsniState& state, const SampleBatch& batch, ModelKind kind);

/// theta_t = theta_{t-1} - (hess_sum / b_t)^{-1} (grad_sum / b_t). The
/// accumulator keeps growing across stages.
void msni_stage_update(MsniState& state);

/// Common interface for estimators that consume a stream one batch at a time.
class StreamingEstimator {
 public:
  virtual ~StreamingEstimator() = default;
  virtual std::string name() const = 0;
  virtual void ingest(const SampleBatch& batch) = 0;
  /// Current estimate. May be costly (and may throw) for estimators that
  /// must solve a system to produce it.
  virtual Vector estimate() = 0;
};

/// Multi-stage Newton estimator.
///
/// Stores the first b_0 batches, fits the initial M-estimate on them, replays
/// them through msni_ingest at that estimate, and from then on reads every
/// batch exactly once. Before the initial window is complete, estimate()
/// returns the M-estimate on the batches stored so far.
class MsniEstimator final : public StreamingEstimator {
 public:
  MsniEstimator(StageSchedule schedule, ModelKind kind, NewtonOptions options = {},
                std::string name = "msni");

  std::string name() const override { return name_; }
  void ingest(const SampleBatch& batch) override;
  Vector estimate() override;

  /// Engaged once the initial window has been fitted.
  const std::optional<MsniState>& state() const { return state_; }
  std::size_t batches_seen() const;

 private:
  StageSchedule schedule_;
  ModelKind kind_;
  NewtonOptions options_;
  std::string name_;
  std::vector<SampleBatch> window_;
  std::optional<MsniState> state_;
};

/// Batch source for the run helpers: called with k = 1..K.
using BatchSource = std::function<SampleBatch(std::size_t)>;

struct MsniResult {
  Vector estimate;
  MsniState state;
};

MsniResult msni_run(const BatchSource& stream, const StageSchedule& schedule, ModelKind kind,
                    const NewtonOptions& options = {});

/// Single-stage special case: one Newton correction after all K batches.
MsniResult osni_run(const BatchSource& stream, std::size_t total_batches, double alpha0,
                    ModelKind kind, const NewtonOptions& options = {});

/// Hessian-weighted combination of per-batch M-estimates.
struct WlseState {
  Matrix hess_total;
  Vector weighted_sum;
  std::size_t count = 0;
  std::size_t skipped = 0;

  WlseState() = default;
  explicit WlseState(Eigen::Index dimension);
  void merge(const WlseState& other);
};

/// Fits the batch alone and adds its Hessian-weighted estimate. Batches whose
/// fit fails (for example separable logistic batches) are counted in
/// `skipped` and otherwise ignored.
void wlse_ingest(WlseState& state, const SampleBatch& batch, ModelKind kind,
                 const NewtonOptions& options = {});
Vector wlse_finalize(const WlseState& state, double ridge_condition = kDefaultRidgeCondition);

/// theta_prev - step (hess_accum / count)^{-1} grad L_batch(theta_prev).
Vector rbcl_update(const Vector& theta_prev, const Matrix& hess_accum, std::size_t count,
                   const SampleBatch& batch, ModelKind kind, double step,
                   double ridge_condition = kDefaultRidgeCondition);

class WlseEstimator final : public StreamingEstimator {
 public:
  WlseEstimator(Eigen::Index dimension, ModelKind kind, NewtonOptions options = {});
  std::string name() const override { return "wlse"; }
  void ingest(const SampleBatch& batch) override;
  Vector estimate() override;
  const WlseState& state() const { return state_; }

 private:
  ModelKind kind_;
  NewtonOptions options_;
  WlseState state_;
};

/// Hessian-preconditioned per-batch update. The first batch is fitted
/// directly; each later batch moves the estimate along its own gradient,
/// preconditioned by the mean Hessian of the batches before it.
class RbclEstimator final : public StreamingEstimator {
 public:
  RbclEstimator(Eigen::Index dimension, ModelKind kind, double step, NewtonOptions options = {});
  std::string name() const override;
  void ingest(const SampleBatch& batch) override;
  Vector estimate() override { return theta_; }
  double step() const { return step_; }

 private:
  ModelKind kind_;
  double step_;
  NewtonOptions options_;
  Vector theta_;
  Matrix hess_accum_;
  std::size_t count_ = 0;
};

/// Refits on each incoming batch alone, warm-started at the previous
/// estimate. Forgets everything but the latest batch.
class SequentialMleEstimator final : public StreamingEstimator {
 public:
  SequentialMleEstimator(Eigen::Index dimension, ModelKind kind, NewtonOptions options = {});
  std::string name() const override { return "mle_sequential"; }
  void ingest(const SampleBatch& batch) override;
  Vector estimate() override { return theta_; }

 private:
  ModelKind kind_;
  NewtonOptions options_;
  Vector theta_;
};

/// Keeps every batch and solves the pooled problem on demand.
class PooledOracleEstimator final : public StreamingEstimator {
 public:
  PooledOracleEstimator(Eigen::Index dimension, ModelKind kind, NewtonOptions options = {});
  std::string name() const override { return "oracle"; }
  void ingest(const SampleBatch& batch) override { batches_.push_back(batch); }
  Vector estimate() override;

 private:
  ModelKind kind_;
  NewtonOptions options_;
  Vector last_;
  std::vector<SampleBatch> batches_;
};

/// Fit of the batch alone for baselines that must produce an estimate for
/// every batch. A failed warm start is retried from the origin; a fit that
/// still does not converge falls back to its last finite iterate.
Vector fit_single_batch(const SampleBatch& batch, ModelKind kind, const Vector& init,
                        const NewtonOptions& options);

}  // namespace msni
