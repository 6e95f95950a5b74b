#include <doctest.h>

#include <cmath>
#include <set>

#include "msni/errors.hpp"
#include "msni/stream_sim.hpp"

using namespace msni;

TEST_SUITE("stream_sim") {

TEST_CASE("base parameter values") {
  const Vector two = base_parameter(2);
  CHECK(two[0] == doctest::Approx(7.0711).epsilon(1e-5));
  CHECK(two[1] == 0.0);
  const Vector three = base_parameter(3);
  CHECK(three[0] == doctest::Approx(10.0 / std::sqrt(3.0)));
  CHECK(three[1] == doctest::Approx(5.0 / std::sqrt(3.0)));
  CHECK(three[2] == 0.0);
  const Vector ten = base_parameter(10);
  CHECK(ten[9] == 0.0);
  CHECK(ten[0] == doctest::Approx(10.0 / std::sqrt(10.0)));
  CHECK_THROWS_AS(base_parameter(1), InvalidInputError);
}

TEST_CASE("sigma zero gives a homogeneous stream") {
  SimConfig cfg;
  cfg.sigma = 0.0;
  cfg.batches = 20;
  const StreamSimulator sim(cfg);
  for (std::size_t k = 1; k <= 20; ++k) CHECK((sim.theta_for(k) - sim.params().theta0).norm() == 0.0);
}

TEST_CASE("per-batch deviations have mean p sigma^2") {
  SimConfig cfg;
  cfg.dimension = 10;
  cfg.batches = 500;
  cfg.sigma = 1.0 / 20.0;
  cfg.master_seed = 99;
  const StreamSimulator sim(cfg);
  double total = 0.0;
  for (std::size_t k = 1; k <= 500; ++k) total += deviation(sim.theta_for(k), sim.params().theta0);
  CHECK(total / 500.0 == doctest::Approx(0.025).epsilon(0.2));
}

TEST_CASE("per-task setting assigns consecutive blocks") {
  SimConfig cfg;
  cfg.setting = HeterogeneitySetting::kPerTask;
  cfg.num_tasks = 5;
  cfg.batches = 500;
  const StreamSimulator sim(cfg);
  CHECK(sim.params().per_task.size() == 5);
  CHECK(sim.params().per_batch.empty());
  CHECK(sim.task_of(1) == 0);
  CHECK(sim.task_of(100) == 0);
  CHECK(sim.task_of(101) == 1);
  CHECK(sim.task_of(500) == 4);
  CHECK(&sim.theta_for(150) == &sim.params().per_task[1]);
  CHECK((sim.theta_for(101) - sim.theta_for(200)).norm() == 0.0);
  CHECK((sim.theta_for(100) - sim.theta_for(101)).norm() > 0.0);
}

TEST_CASE("per-task with sigma zero reduces to a homogeneous stream") {
  SimConfig a;
  a.setting = HeterogeneitySetting::kPerTask;
  a.sigma = 0.0;
  a.batches = 10;
  SimConfig b = a;
  b.setting = HeterogeneitySetting::kPerBatch;
  const StreamSimulator sa(a), sb(b);
  for (std::size_t k = 1; k <= 10; ++k) {
    CHECK((sa.batch(k).features - sb.batch(k).features).norm() == 0.0);
    CHECK((sa.batch(k).responses - sb.batch(k).responses).norm() == 0.0);
  }
}

TEST_CASE("AR(1) covariates have the stated covariance") {
  RngStream rng(5, RngStream::Purpose::kBatch, 1);
  const Matrix x = gen_covariates(100000, 4, rng);
  const double n = static_cast<double>(x.rows());
  const Vector mean = x.colwise().mean();
  const Matrix centered = x.rowwise() - mean.transpose();
  const Matrix cov = centered.transpose() * centered / (n - 1.0);
  CHECK(cov(0, 1) == doctest::Approx(0.5).epsilon(0.04));
  CHECK(cov(1, 2) == doctest::Approx(0.5).epsilon(0.04));
  CHECK(cov(0, 2) == doctest::Approx(0.25).epsilon(0.08));
  for (int j = 0; j < 4; ++j) CHECK(std::abs(cov(j, j) - 1.0) < 0.02);
  CHECK(mean.cwiseAbs().maxCoeff() < 0.02);

  RngStream one(6, RngStream::Purpose::kBatch, 1);
  const Matrix col = gen_covariates(100000, 1, one);
  CHECK(std::abs(col.squaredNorm() / 100000.0 - 1.0) < 0.02);
}

TEST_CASE("responses") {
  RngStream rng(7, RngStream::Purpose::kBatch, 2);
  const Matrix x = gen_covariates(100000, 3, rng);
  const Vector zero = Vector::Zero(3);
  const Vector lin = gen_responses(x, zero, ModelKind::kLinear, rng);
  CHECK(std::abs(lin.mean()) < 0.02);
  const Vector logit = gen_responses(x, zero, ModelKind::kLogistic, rng);
  CHECK(std::abs(logit.mean() - 0.5) < 0.01);
  for (Eigen::Index i = 0; i < logit.size(); ++i) CHECK((logit[i] == 0.0 || logit[i] == 1.0));

  // Every row with margin ln 3 has success probability 3/4.
  const Matrix ones = Matrix::Ones(100000, 1);
  const Vector theta = Vector::Constant(1, std::log(3.0));
  CHECK(std::abs(gen_responses(ones, theta, ModelKind::kLogistic, rng).mean() - 0.75) < 0.01);
}

TEST_CASE("deviation") {
  CHECK(deviation(Vector{{1.0, 2.0}}, Vector{{1.0, 2.0}}) == 0.0);
  CHECK(deviation(Vector{{3.0, 4.0}}, Vector::Zero(2)) == 25.0);
  const Vector a{{0.3, -1.2, 4.5}}, b{{-0.7, 0.1, 2.0}};
  double oracle = 0.0;
  for (int i = 0; i < 3; ++i) oracle += (a[i] - b[i]) * (a[i] - b[i]);
  CHECK(deviation(a, b) == doctest::Approx(oracle).epsilon(1e-15));
}

TEST_CASE("a batch regenerated in isolation is bit-identical") {
  SimConfig cfg;
  cfg.batches = 30;
  cfg.kind = ModelKind::kLogistic;
  cfg.master_seed = 1234;
  const StreamSimulator first(cfg);
  const SampleBatch late = first.batch(29);
  std::vector<SampleBatch> forward;
  for (std::size_t k = 1; k <= 30; ++k) forward.push_back(first.batch(k));
  const StreamSimulator second(cfg);
  const SampleBatch again = second.batch(29);
  CHECK((late.features - again.features).norm() == 0.0);
  CHECK((late.responses - forward[28].responses).norm() == 0.0);
  CHECK(again.index == 29);
}

TEST_CASE("substreams are distinct across purpose, index and seed") {
  std::set<std::uint64_t> seeds;
  for (std::uint64_t s = 0; s < 4; ++s) {
    for (auto p : {RngStream::Purpose::kReplication, RngStream::Purpose::kParameters,
                   RngStream::Purpose::kBatch, RngStream::Purpose::kRandomInit,
                   RngStream::Purpose::kShuffle}) {
      for (std::uint64_t i = 0; i < 50; ++i) seeds.insert(RngStream::derive(s, p, i));
    }
  }
  CHECK(seeds.size() == 4 * 5 * 50);
}

TEST_CASE("config validation") {
  SimConfig cfg;
  cfg.dimension = 1;
  CHECK_THROWS_AS(cfg.validate(), InvalidInputError);
  cfg = SimConfig{};
  cfg.sigma = -1.0;
  CHECK_THROWS_AS(cfg.validate(), InvalidInputError);
  cfg = SimConfig{};
  cfg.setting = HeterogeneitySetting::kPerTask;
  cfg.batches = 11;
  CHECK_THROWS_AS(cfg.validate(), InvalidInputError);
  CHECK_THROWS_AS(parse_setting("per_rep"), InvalidInputError);
  CHECK(parse_setting(to_string(HeterogeneitySetting::kPerTask)) == HeterogeneitySetting::kPerTask);
  const StreamSimulator sim(SimConfig{});
  CHECK_THROWS_AS(sim.batch(0), InvalidInputError);
  CHECK_THROWS_AS(sim.batch(501), InvalidInputError);
}

}
