#include <doctest.h>

#include <Eigen/Cholesky>

#include <cmath>
#include <vector>

#include "helpers.hpp"
#include "msni/errors.hpp"
#include "msni/estimators.hpp"
#include "msni/inference.hpp"
#include "msni/stream_sim.hpp"

using namespace msni;
using namespace msni::testing;

namespace {

// Normal equations over the pooled mean loss, each batch weighted by 1/n_k.
Vector pooled_ols(const std::vector<SampleBatch>& batches) {
  const auto p = batches.front().dimension();
  Matrix a = Matrix::Zero(p, p);
  Vector c = Vector::Zero(p);
  for (const auto& b : batches) {
    const double w = 1.0 / static_cast<double>(b.size());
    a += w * b.features.transpose() * b.features;
    c += w * b.features.transpose() * b.responses;
  }
  return a.ldlt().solve(c);
}

std::vector<SampleBatch> quadratic_stream(const std::vector<double>& a) {
  std::vector<SampleBatch> out;
  for (std::size_t k = 0; k < a.size(); ++k) out.push_back(quadratic_batch(a[k], k + 1));
  return out;
}

BatchSource source(const std::vector<SampleBatch>& batches) {
  return [&batches](std::size_t k) { return batches.at(k - 1); };
}

std::vector<SampleBatch> sim_stream(const SimConfig& cfg) {
  const StreamSimulator sim(cfg);
  std::vector<SampleBatch> out;
  for (std::size_t k = 1; k <= cfg.batches; ++k) out.push_back(sim.batch(k));
  return out;
}

}  // namespace

TEST_SUITE("estimators") {

TEST_CASE("Newton solves least squares exactly") {
  std::mt19937_64 rng(1);
  std::vector<SampleBatch> batches;
  for (std::size_t k = 1; k <= 3; ++k) batches.push_back(random_batch(15 + 5 * k, 4, ModelKind::kLinear, rng, k));
  const Vector oracle = pooled_ols(batches);
  for (int trial = 0; trial < 3; ++trial) {
    const Vector init = random_vector(4, rng, 10.0);
    CHECK((solve_newton(batches, ModelKind::kLinear, init) - oracle).norm() < 1e-10);
  }
  NewtonOptions one_step;
  one_step.max_iter = 2;  // one step plus the convergence check
  CHECK((solve_newton(batches, ModelKind::kLinear, Vector::Zero(4), one_step) - oracle).norm() < 1e-10);
}

TEST_CASE("separable logistic data is flagged") {
  const auto single = make_batch(Matrix::Ones(1, 1), Vector::Ones(1));
  CHECK_THROWS_AS(solve_newton(std::span(&single, 1), ModelKind::kLogistic, Vector::Zero(1)),
                  NonConvergenceError);
  const auto pair = make_batch(Matrix{{1.0}, {-1.0}}, Vector{{1.0, 0.0}});
  try {
    solve_newton(std::span(&pair, 1), ModelKind::kLogistic, Vector::Zero(1));
    FAIL("separable data converged");
  } catch (const NonConvergenceError& e) {
    CHECK(e.last_iterate()[0] > 5.0);
    CHECK(e.gradient_norm() >= 0.0);
  }
  const auto balanced = make_batch(Matrix{{1.0}, {-1.0}, {1.0}, {-1.0}}, Vector{{1.0, 0.0, 0.0, 1.0}});
  CHECK(std::abs(solve_newton(std::span(&balanced, 1), ModelKind::kLogistic, Vector::Constant(1, 3.0))[0]) < 1e-10);
}

TEST_CASE("Newton rejects bad options and empty input") {
  std::vector<SampleBatch> none;
  CHECK_THROWS_AS(solve_newton(none, ModelKind::kLinear, Vector::Zero(2)), InvalidInputError);
  const auto b = quadratic_batch(1.0, 1);
  NewtonOptions bad;
  bad.tol = 0.0;
  CHECK_THROWS_AS(solve_newton(std::span(&b, 1), ModelKind::kLinear, Vector::Zero(1), bad), InvalidInputError);
}

TEST_CASE("initial estimate equals pooled OLS without heterogeneity") {
  SimConfig cfg;
  cfg.dimension = 4;
  cfg.batches = 9;
  cfg.batch_size = 20;
  cfg.sigma = 0.0;
  const auto batches = sim_stream(cfg);
  const std::span<const SampleBatch> window(batches.data(), 3);
  CHECK((initial_m_estimate(window, ModelKind::kLinear) -
         pooled_ols({batches.begin(), batches.begin() + 3})).norm() < 1e-10);
  const std::span<const SampleBatch> one(batches.data(), 1);
  CHECK((initial_m_estimate(one, ModelKind::kLinear) - pooled_ols({batches.front()})).norm() < 1e-10);
}

TEST_CASE("initial estimate improves as the window grows") {
  SimConfig cfg;
  cfg.dimension = 5;
  cfg.batches = 500;
  cfg.sigma = 1.0 / 20.0;
  std::vector<double> errors;
  for (double a0 : {0.3, 0.5, 0.7}) {
    const std::size_t b0 = stage_boundary(500, a0);
    double total = 0.0;
    for (std::size_t rep = 0; rep < 100; ++rep) {
      SimConfig rc = replication_config(cfg, rep);
      rc.batches = b0;
      const auto window = sim_stream(rc);
      total += (initial_m_estimate(window, ModelKind::kLinear) - base_parameter(5)).squaredNorm();
    }
    errors.push_back(total / 100.0);
  }
  CHECK(errors[0] > errors[1]);
  CHECK(errors[1] > errors[2]);
}

TEST_CASE("hand-computed multi-stage run on quadratic losses") {
  // Losses (theta - a_k)^2 / 2 with a = 1, 2, 3, 4; b_0 = 2, boundaries (2, 4).
  const auto batches = quadratic_stream({1.0, 2.0, 3.0, 4.0});
  const auto schedule = build_schedule(4, 0.5, {0.6, 1.0});
  REQUIRE(schedule.initial_window == 2);
  REQUIRE(schedule.boundaries == std::vector<std::size_t>{2, 4});
  const auto result = msni_run(source(batches), schedule, ModelKind::kLinear);
  const auto& h = result.state.estimate_history;
  REQUIRE(h.size() == 3);
  CHECK(h[0].theta[0] == doctest::Approx(1.5).epsilon(1e-14));
  CHECK(h[1].theta[0] == doctest::Approx(1.5).epsilon(1e-14));
  CHECK(h[2].theta[0] == doctest::Approx(2.5).epsilon(1e-14));
  CHECK(h[2].batch_index == 4);
  CHECK(result.estimate[0] == doctest::Approx(2.5).epsilon(1e-14));
  CHECK(result.state.acc.count == 4);
}

TEST_CASE("stage update arithmetic") {
  const auto schedule = build_schedule(4, 0.5, {0.6, 1.0});
  auto state = MsniState::start(schedule, Vector{{1.0, -2.0}});
  state.acc = NewtonAccumulator(2);
  state.acc.add(Vector::Zero(2), Matrix::Identity(2, 2));
  state.acc.add(Vector::Zero(2), Matrix::Identity(2, 2));
  state.batches_seen = 2;
  msni_stage_update(state);
  CHECK((state.current_estimate - Vector{{1.0, -2.0}}).norm() == 0.0);

  auto next = MsniState::start(schedule, Vector::Zero(2));
  const Vector g{{0.25, -0.75}};
  next.acc = NewtonAccumulator(2);
  next.acc.add(g, Matrix::Identity(2, 2));
  next.acc.add(g, Matrix::Identity(2, 2));
  next.batches_seen = 2;
  msni_stage_update(next);
  CHECK((next.current_estimate + g).norm() < 1e-15);
  CHECK(next.stage == 1);
  CHECK_FALSE(next.finished());

  auto early = MsniState::start(schedule, Vector::Zero(2));
  CHECK_THROWS_AS(msni_stage_update(early), InvalidInputError);
}

TEST_CASE("after the window the accumulator holds gradients at the initial estimate") {
  std::mt19937_64 rng(21);
  std::vector<SampleBatch> batches;
  for (std::size_t k = 1; k <= 16; ++k) batches.push_back(random_batch(30, 3, ModelKind::kLogistic, rng, k));
  const auto schedule = build_schedule(16, 0.5, {0.75, 1.0});  // b_0 = 4, boundaries (8, 16)
  MsniEstimator est(schedule, ModelKind::kLogistic);
  for (std::size_t k = 0; k < 4; ++k) est.ingest(batches[k]);
  REQUIRE(est.state().has_value());
  const auto& state = *est.state();
  CHECK(state.acc.count == 4);
  const Vector theta0 = state.estimate_history.front().theta;
  Vector oracle = Vector::Zero(3);
  for (std::size_t k = 0; k < 4; ++k) oracle += loss_gradient(batches[k], ModelKind::kLogistic, theta0);
  CHECK((state.acc.grad_sum - oracle).norm() < 1e-12);
  CHECK(est.batches_seen() == 4);
}

TEST_CASE("provisional estimate during the window") {
  std::mt19937_64 rng(22);
  std::vector<SampleBatch> batches;
  for (std::size_t k = 1; k <= 25; ++k) batches.push_back(random_batch(20, 3, ModelKind::kLinear, rng, k));
  MsniEstimator est(build_schedule(25, 0.5, {1.0}), ModelKind::kLinear);
  CHECK_THROWS_AS(est.estimate(), InvalidInputError);
  est.ingest(batches[0]);
  est.ingest(batches[1]);
  CHECK((est.estimate() - pooled_ols({batches[0], batches[1]})).norm() < 1e-10);
  CHECK_THROWS_AS(est.ingest(batches[3]), InvalidInputError);
}

TEST_CASE("single-sample batches behave like any other batch") {
  std::vector<SampleBatch> batches;
  std::mt19937_64 rng(23);
  for (std::size_t k = 1; k <= 9; ++k) batches.push_back(random_batch(1, 1, ModelKind::kLinear, rng, k));
  const auto result = msni_run(source(batches), build_schedule(9, 0.5, {0.75, 1.0}), ModelKind::kLinear);
  CHECK(result.estimate.allFinite());
  CHECK(result.state.acc.count == 9);
}

TEST_CASE("accumulator sums commute and merge associatively") {
  std::mt19937_64 rng(24);
  std::vector<SampleBatch> batches;
  for (std::size_t k = 1; k <= 12; ++k) batches.push_back(random_batch(25, 4, ModelKind::kLogistic, rng, k));
  const Vector theta = random_vector(4, rng);

  NewtonAccumulator forward, backward, left, right;
  for (const auto& b : batches) forward.add_batch(b, ModelKind::kLogistic, theta);
  for (auto it = batches.rbegin(); it != batches.rend(); ++it) backward.add_batch(*it, ModelKind::kLogistic, theta);
  for (std::size_t k = 0; k < 12; ++k) (k % 3 == 0 ? left : right).add_batch(batches[k], ModelKind::kLogistic, theta);
  NewtonAccumulator merged = left;
  merged.merge(right);

  CHECK(relative_error(forward.grad_sum, backward.grad_sum) < 1e-12);
  CHECK(relative_error(forward.hess_sum, backward.hess_sum) < 1e-12);
  CHECK(relative_error(forward.grad_sum, merged.grad_sum) < 1e-12);
  CHECK(relative_error(forward.hess_sum, merged.hess_sum) < 1e-12);
  CHECK(merged.count == 12);

  NewtonAccumulator empty;
  empty.merge(forward);
  CHECK(empty.count == 12);
  CHECK_THROWS_AS(forward.add(Vector::Zero(3), Matrix::Zero(3, 3)), InvalidInputError);
}

TEST_CASE("linear Hessian sum ignores the estimate history") {
  SimConfig cfg;
  cfg.dimension = 3;
  cfg.batches = 40;
  cfg.batch_size = 10;
  const auto batches = sim_stream(cfg);
  const auto result = msni_run(source(batches), default_schedule(40, 3, 0.5), ModelKind::kLinear);
  Matrix oracle = Matrix::Zero(3, 3);
  for (const auto& b : batches) oracle += b.features.transpose() * b.features / 10.0;
  CHECK(relative_error(result.state.acc.hess_sum, oracle) < 1e-12);
}

TEST_CASE("one-stage run equals OSNI") {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    SimConfig cfg;
    cfg.dimension = 4;
    cfg.batches = 60;
    cfg.batch_size = 40;
    cfg.kind = ModelKind::kLogistic;
    cfg.master_seed = seed;
    const auto batches = sim_stream(cfg);
    const auto m = msni_run(source(batches), build_schedule(60, 0.5, {1.0}), ModelKind::kLogistic);
    const auto o = osni_run(source(batches), 60, 0.5, ModelKind::kLogistic);
    CHECK((m.estimate - o.estimate).norm() <= 1e-12 * o.estimate.norm());
  }
}

TEST_CASE("a single batch gives that batch's M-estimate") {
  const auto b = make_batch(Matrix{{1.0, 0.5}, {0.2, 1.0}, {-1.0, 0.3}}, Vector{{1.0, 2.0, 0.5}});
  const std::vector<SampleBatch> one{b};
  const auto result = msni_run(source(one), build_schedule(1, 0.5, {1.0}), ModelKind::kLinear);
  CHECK((result.estimate - pooled_ols(one)).norm() < 1e-10);
  CHECK((pooled_oracle(one, ModelKind::kLinear) - pooled_ols(one)).norm() < 1e-10);
}

TEST_CASE("duplicating every row leaves all iterates unchanged") {
  // Batch means, and hence every Newton iterate, are invariant under duplication.
  std::mt19937_64 rng(25);
  std::vector<SampleBatch> plain, doubled;
  for (std::size_t k = 1; k <= 16; ++k) {
    auto b = random_batch(10, 3, ModelKind::kLogistic, rng, k);
    SampleBatch d = b;
    d.features.resize(20, 3);
    d.features << b.features, b.features;
    d.responses.resize(20);
    d.responses << b.responses, b.responses;
    plain.push_back(b);
    doubled.push_back(d);
  }
  const auto schedule = build_schedule(16, 0.5, {0.75, 1.0});
  const auto a = msni_run(source(plain), schedule, ModelKind::kLogistic);
  const auto c = msni_run(source(doubled), schedule, ModelKind::kLogistic);
  for (std::size_t t = 0; t < a.state.estimate_history.size(); ++t) {
    CHECK(relative_error(a.state.estimate_history[t].theta, c.state.estimate_history[t].theta) < 1e-10);
  }
}

TEST_CASE("multi-stage estimate tracks the pooled oracle without heterogeneity") {
  SimConfig cfg;
  cfg.dimension = 5;
  cfg.batches = 200;
  cfg.batch_size = 50;
  cfg.sigma = 0.0;
  const auto schedule = build_schedule(200, 0.5, {0.6, 1.0});
  double gap = 0.0, error = 0.0;
  for (std::size_t rep = 0; rep < 100; ++rep) {
    const auto batches = sim_stream(replication_config(cfg, rep));
    const Vector oracle = pooled_oracle(batches, ModelKind::kLinear);
    gap += (msni_run(source(batches), schedule, ModelKind::kLinear).estimate - oracle).norm();
    error += (oracle - base_parameter(5)).norm();
  }
  CHECK(gap <= 0.5 * error);
}

TEST_CASE("WLSE hand examples") {
  WlseState equal;
  wlse_ingest(equal, quadratic_batch(1.0, 1), ModelKind::kLinear);
  wlse_ingest(equal, quadratic_batch(3.0, 2), ModelKind::kLinear);
  CHECK(wlse_finalize(equal)[0] == doctest::Approx(2.0));

  // Hessian x^2 = 3 and per-batch estimate y / x = 4.
  const double root3 = std::sqrt(3.0);
  WlseState weighted;
  wlse_ingest(weighted, quadratic_batch(0.0, 1), ModelKind::kLinear);
  wlse_ingest(weighted, make_batch(Matrix::Constant(1, 1, root3), Vector::Constant(1, 4.0 * root3), 2),
              ModelKind::kLinear);
  CHECK(weighted.hess_total(0, 0) == doctest::Approx(4.0));
  CHECK(wlse_finalize(weighted)[0] == doctest::Approx(3.0));

  std::mt19937_64 rng(26);
  const auto b = random_batch(30, 3, ModelKind::kLogistic, rng);
  WlseState single;
  wlse_ingest(single, b, ModelKind::kLogistic);
  CHECK((wlse_finalize(single) - solve_newton(std::span(&b, 1), ModelKind::kLogistic, Vector::Zero(3))).norm() < 1e-8);
}

TEST_CASE("WLSE skips separable batches and merges") {
  WlseState state;
  wlse_ingest(state, quadratic_batch(2.0, 1), ModelKind::kLinear);
  const auto separable = make_batch(Matrix{{1.0}, {-1.0}}, Vector{{1.0, 0.0}}, 2);
  wlse_ingest(state, separable, ModelKind::kLogistic);
  CHECK(state.count == 1);
  CHECK(state.skipped == 1);

  WlseState other;
  wlse_ingest(other, quadratic_batch(4.0, 3), ModelKind::kLinear);
  state.merge(other);
  CHECK(state.count == 2);
  CHECK(state.skipped == 1);
  CHECK(wlse_finalize(state)[0] == doctest::Approx(3.0));
  CHECK_THROWS_AS(wlse_finalize(WlseState(1)), InvalidInputError);
}

TEST_CASE("RBCL update arithmetic") {
  // Gradient of (theta - 1)^2 / 2 at 0 is -1.
  const auto b = quadratic_batch(1.0, 2);
  const Matrix h = Matrix::Constant(1, 1, 2.0);
  CHECK(rbcl_update(Vector::Zero(1), h, 1, b, ModelKind::kLinear, 1.0)[0] == doctest::Approx(0.5));
  CHECK(rbcl_update(Vector::Zero(1), h, 1, b, ModelKind::kLinear, 0.1)[0] == doctest::Approx(0.05));
  CHECK(rbcl_update(Vector::Zero(1), 2.0 * h, 2, b, ModelKind::kLinear, 1.0)[0] == doctest::Approx(0.5));
  CHECK(rbcl_update(Vector::Ones(1), h, 1, b, ModelKind::kLinear, 1.0)[0] == 1.0);
  CHECK_THROWS_AS(rbcl_update(Vector::Zero(1), h, 0, b, ModelKind::kLinear, 1.0), InvalidInputError);
}

TEST_CASE("RBCL estimator fits the first batch and then takes preconditioned steps") {
  RbclEstimator est(1, ModelKind::kLinear, 1.0);
  CHECK(est.name() == "rbcl_1");
  est.ingest(quadratic_batch(2.0, 1));
  CHECK(est.estimate()[0] == doctest::Approx(2.0));
  est.ingest(quadratic_batch(4.0, 2));
  CHECK(est.estimate()[0] == doctest::Approx(4.0));
  CHECK(RbclEstimator(1, ModelKind::kLinear, 0.1).name() == "rbcl_0.1");
  CHECK_THROWS_AS(RbclEstimator(1, ModelKind::kLinear, 0.0), InvalidInputError);
}

TEST_CASE("pooled oracle") {
  std::mt19937_64 rng(27);
  std::vector<SampleBatch> batches;
  for (std::size_t k = 1; k <= 5; ++k) batches.push_back(random_batch(10 * k, 3, ModelKind::kLinear, rng, k));
  CHECK((pooled_oracle(batches, ModelKind::kLinear) - pooled_ols(batches)).norm() < 1e-10);

  PooledOracleEstimator est(3, ModelKind::kLinear);
  CHECK_THROWS_AS(est.estimate(), InvalidInputError);
  for (const auto& b : batches) est.ingest(b);
  CHECK((est.estimate() - pooled_ols(batches)).norm() < 1e-10);

  SimConfig cfg;
  cfg.dimension = 3;
  cfg.sigma = 0.0;
  cfg.batches = 4;
  double previous = INFINITY;
  for (std::size_t n : {10u, 100u, 1000u}) {
    double total = 0.0;
    for (std::size_t rep = 0; rep < 30; ++rep) {
      SimConfig rc = replication_config(cfg, rep);
      rc.batch_size = n;
      total += (pooled_oracle(sim_stream(rc), ModelKind::kLinear) - base_parameter(3)).squaredNorm();
    }
    CHECK(total < previous);
    previous = total;
  }
}

TEST_CASE("sequential MLE survives separable batches") {
  SequentialMleEstimator est(1, ModelKind::kLogistic);
  est.ingest(make_batch(Matrix{{1.0}, {-1.0}}, Vector{{1.0, 0.0}}, 1));
  CHECK(est.estimate().allFinite());
  est.ingest(make_batch(Matrix{{1.0}, {-1.0}, {1.0}, {-1.0}}, Vector{{1.0, 0.0, 0.0, 1.0}}, 2));
  CHECK(std::abs(est.estimate()[0]) < 1e-8);
}

}
