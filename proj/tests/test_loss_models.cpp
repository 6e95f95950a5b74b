#include <doctest.h>

#include <Eigen/Eigenvalues>

#include <cmath>

#include "helpers.hpp"
#include "msni/errors.hpp"
#include "msni/loss_models.hpp"

using namespace msni;
using namespace msni::testing;

namespace {

// Central differences with step 1e-5 (1 + |theta_j|).
Vector fd_gradient(const SampleBatch& b, ModelKind kind, const Vector& theta) {
  Vector g(theta.size());
  for (Eigen::Index j = 0; j < theta.size(); ++j) {
    const double h = 1e-5 * (1.0 + std::abs(theta[j]));
    Vector up = theta, down = theta;
    up[j] += h;
    down[j] -= h;
    g[j] = (loss_value(b, kind, up) - loss_value(b, kind, down)) / (2.0 * h);
  }
  return g;
}

Matrix fd_hessian(const SampleBatch& b, ModelKind kind, const Vector& theta) {
  Matrix h(theta.size(), theta.size());
  for (Eigen::Index j = 0; j < theta.size(); ++j) {
    const double step = 1e-5 * (1.0 + std::abs(theta[j]));
    Vector up = theta, down = theta;
    up[j] += step;
    down[j] -= step;
    h.col(j) = (loss_gradient(b, kind, up) - loss_gradient(b, kind, down)) / (2.0 * step);
  }
  return h;
}

// Per-sample oracle written straight from the loss definitions.
double naive_loss(const SampleBatch& b, ModelKind kind, const Vector& theta) {
  double total = 0.0;
  for (Eigen::Index i = 0; i < b.size(); ++i) {
    const double z = b.features.row(i).dot(theta);
    const double y = b.responses[i];
    total += kind == ModelKind::kLinear ? 0.5 * (y - z) * (y - z) : std::log(1.0 + std::exp(z)) - y * z;
  }
  return total / static_cast<double>(b.size());
}

}  // namespace

TEST_SUITE("loss_models") {

TEST_CASE("hand values of the loss") {
  const auto perfect = make_batch(Matrix::Identity(2, 2), Vector{{1.0, 0.0}});
  CHECK(loss_value(perfect, ModelKind::kLinear, Vector{{1.0, 0.0}}) == 0.0);

  const auto one = make_batch(Matrix::Constant(1, 1, 1.0), Vector::Constant(1, 3.0));
  CHECK(loss_value(one, ModelKind::kLinear, Vector::Constant(1, 1.0)) == doctest::Approx(2.0));

  const auto single = make_batch(Matrix{{0.3, -2.0, 7.0}}, Vector::Constant(1, 1.0));
  CHECK(loss_value(single, ModelKind::kLogistic, Vector::Zero(3)) ==
        doctest::Approx(std::log(2.0)).epsilon(1e-15));
}

TEST_CASE("hand values of the gradient") {
  const auto b = make_batch(Matrix::Identity(2, 2), Vector{{1.0, 0.0}});
  const Vector g = loss_gradient(b, ModelKind::kLinear, Vector::Zero(2));
  CHECK(g[0] == doctest::Approx(-0.5));
  CHECK(g[1] == 0.0);

  const auto l = make_batch(Matrix::Ones(1, 1), Vector::Ones(1));
  CHECK(loss_gradient(l, ModelKind::kLogistic, Vector::Zero(1))[0] == doctest::Approx(-0.5));
}

TEST_CASE("hand values of the Hessian") {
  const auto b = make_batch(Matrix::Identity(2, 2), Vector{{1.0, 0.0}});
  const Matrix h = loss_hessian(b, ModelKind::kLinear, Vector{{4.0, -9.0}});
  CHECK((h - 0.5 * Matrix::Identity(2, 2)).norm() == 0.0);

  const auto l = make_batch(Matrix::Ones(1, 1), Vector::Ones(1));
  CHECK(loss_hessian(l, ModelKind::kLogistic, Vector::Zero(1))(0, 0) == doctest::Approx(0.25));
}

TEST_CASE("value agrees with the per-sample definition") {
  std::mt19937_64 rng(17);
  for (auto kind : {ModelKind::kLinear, ModelKind::kLogistic}) {
    for (int trial = 0; trial < 20; ++trial) {
      const auto b = random_batch(25, 4, kind, rng);
      const Vector theta = random_vector(4, rng);
      CHECK(loss_value(b, kind, theta) == doctest::Approx(naive_loss(b, kind, theta)).epsilon(1e-12));
    }
  }
}

TEST_CASE("derivatives match central finite differences") {
  std::mt19937_64 rng(3);
  for (auto kind : {ModelKind::kLinear, ModelKind::kLogistic}) {
    for (int trial = 0; trial < 30; ++trial) {
      const auto b = random_batch(40, 5, kind, rng);
      const Vector theta = random_vector(5, rng);
      CHECK(relative_error(loss_gradient(b, kind, theta), fd_gradient(b, kind, theta)) < 1e-6);
      CHECK(relative_error(loss_hessian(b, kind, theta), fd_hessian(b, kind, theta)) < 1e-5);
    }
  }
}

TEST_CASE("Hessian is exactly symmetric and the logistic one is PSD") {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 30; ++trial) {
    const auto b = random_batch(30, 6, ModelKind::kLogistic, rng);
    const Vector theta = random_vector(6, rng, 3.0);
    const Matrix h = loss_hessian(b, ModelKind::kLogistic, theta);
    CHECK((h - h.transpose()).cwiseAbs().maxCoeff() == 0.0);
    Eigen::SelfAdjointEigenSolver<Matrix> eig(h);
    CHECK(eig.eigenvalues().minCoeff() >= -1e-10);
  }
}

TEST_CASE("linear Hessian does not depend on theta bitwise") {
  std::mt19937_64 rng(9);
  const auto b = random_batch(50, 4, ModelKind::kLinear, rng);
  const Matrix a = loss_hessian(b, ModelKind::kLinear, random_vector(4, rng));
  const Matrix c = loss_hessian(b, ModelKind::kLinear, random_vector(4, rng, 100.0));
  CHECK((a - c).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("gradient is the score residuals times the covariates") {
  std::mt19937_64 rng(10);
  for (auto kind : {ModelKind::kLinear, ModelKind::kLogistic}) {
    const auto b = random_batch(20, 3, kind, rng);
    const Vector theta = random_vector(3, rng);
    const Vector r = score_residuals(b, kind, theta);
    const Vector g = b.features.transpose() * r / 20.0;
    CHECK(relative_error(g, loss_gradient(b, kind, theta)) < 1e-14);
  }
}

TEST_CASE("logistic loss stays finite for huge margins") {
  const auto b = make_batch(Matrix{{1.0}, {-1.0}}, Vector{{1.0, 0.0}});
  const Vector theta = Vector::Constant(1, 800.0);
  const double v = loss_value(b, ModelKind::kLogistic, theta);
  CHECK(std::isfinite(v));
  CHECK(v == doctest::Approx(0.0));
  const double w = loss_value(b, ModelKind::kLogistic, -theta);
  CHECK(w == doctest::Approx(800.0));
  CHECK(loss_gradient(b, ModelKind::kLogistic, theta).allFinite());
  CHECK(sigmoid(-800.0) >= 0.0);
  CHECK(sigmoid(800.0) == 1.0);
}

TEST_CASE("invalid batches are rejected") {
  const auto b = make_batch(Matrix::Ones(2, 2), Vector::Ones(2));
  CHECK_THROWS_AS(loss_value(b, ModelKind::kLinear, Vector::Zero(3)), InvalidInputError);
  const auto bad = make_batch(Matrix::Ones(2, 2), Vector{{0.5, 1.0}});
  CHECK_THROWS_AS(validate_batch(bad, ModelKind::kLogistic), InvalidInputError);
  const auto empty = make_batch(Matrix(0, 2), Vector(0));
  CHECK_THROWS_AS(validate_batch(empty, ModelKind::kLinear), InvalidInputError);
  Matrix x = Matrix::Ones(2, 2);
  x(1, 1) = std::nan("");
  CHECK_THROWS_AS(validate_batch(make_batch(x, Vector::Ones(2)), ModelKind::kLinear), InvalidInputError);
  CHECK_THROWS_AS(parse_model_kind("probit"), Error);
  CHECK(parse_model_kind(to_string(ModelKind::kLogistic)) == ModelKind::kLogistic);
}

}
