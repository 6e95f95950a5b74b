#include "msni/metrics.hpp"

#include <cmath>
#include <string>

#include "msni/errors.hpp"

namespace msni {

double mse_k(const Vector& theta_hat, const Vector& theta_ref) {
  if (theta_hat.size() != theta_ref.size()) throw InvalidInputError("mse_k: dimension mismatch");
  return (theta_hat - theta_ref).squaredNorm();
}

double mmse(const Vector& theta_hat, std::span<const Vector> task_params, std::size_t current_task) {
  if (current_task < 1 || current_task > task_params.size()) {
    throw InvalidInputError("mmse: task index out of range");
  }
  double total = 0.0;
  for (std::size_t j = 0; j < current_task; ++j) total += mse_k(theta_hat, task_params[j]);
  return total / static_cast<double>(current_task);
}

AccuracyMatrix::AccuracyMatrix(std::size_t tasks) {
  if (tasks < 1) throw InvalidInputError("AccuracyMatrix needs at least one task");
  const auto m = static_cast<Eigen::Index>(tasks);
  values_ = Matrix::Zero(m + 1, m);
}

AccuracyMatrix::AccuracyMatrix(Matrix values) : values_(std::move(values)) {
  if (values_.cols() < 1 || values_.rows() != values_.cols() + 1) {
    throw InvalidInputError("AccuracyMatrix must be (M + 1) x M");
  }
  for (Eigen::Index i = 0; i < values_.rows(); ++i) {
    for (Eigen::Index j = 0; j < values_.cols(); ++j) {
      const double a = values_(i, j);
      if (!(a >= 0.0 && a <= 1.0)) {
        throw InvalidInputError("accuracy R(" + std::to_string(i) + "," + std::to_string(j + 1) +
                                ") outside [0, 1]");
      }
    }
  }
}

double AccuracyMatrix::operator()(std::size_t i, std::size_t j) const {
  if (i > tasks() || j < 1 || j > tasks()) throw InvalidInputError("accuracy index out of range");
  return values_(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j - 1));
}

void AccuracyMatrix::set(std::size_t i, std::size_t j, double accuracy) {
  if (i > tasks() || j < 1 || j > tasks()) throw InvalidInputError("accuracy index out of range");
  if (!(accuracy >= 0.0 && accuracy <= 1.0)) throw InvalidInputError("accuracy outside [0, 1]");
  values_(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j - 1)) = accuracy;
}

double average_accuracy(const AccuracyMatrix& r, std::size_t i) {
  if (i < 1 || i > r.tasks()) throw InvalidInputError("average_accuracy: task index out of range");
  double total = 0.0;
  for (std::size_t j = 1; j <= i; ++j) total += r(i, j);
  return total / static_cast<double>(i);
}

double aia(const AccuracyMatrix& r) {
  double total = 0.0;
  for (std::size_t i = 1; i <= r.tasks(); ++i) total += average_accuracy(r, i);
  return total / static_cast<double>(r.tasks());
}

double fwt(const AccuracyMatrix& r) {
  const std::size_t m = r.tasks();
  if (m < 2) throw InvalidInputError("fwt needs at least two tasks");
  double total = 0.0;
  for (std::size_t i = 2; i <= m; ++i) total += r(i - 1, i) - r(0, i);
  return total / static_cast<double>(m - 1);
}

double bwt(const AccuracyMatrix& r) {
  const std::size_t m = r.tasks();
  if (m < 2) throw InvalidInputError("bwt needs at least two tasks");
  double total = 0.0;
  for (std::size_t i = 1; i < m; ++i) total += r(m, i) - r(i, i);
  return total / static_cast<double>(m - 1);
}

double classify_accuracy(const Vector& theta, const SampleBatch& batch) {
  if (theta.size() != batch.dimension()) {
    throw InvalidInputError("classify_accuracy: dimension mismatch");
  }
  if (batch.size() < 1) throw InvalidInputError("classify_accuracy: empty batch");
  const Vector z = batch.features * theta;
  std::size_t correct = 0;
  for (Eigen::Index i = 0; i < z.size(); ++i) {
    const double predicted = z[i] >= 0.0 ? 1.0 : 0.0;
    if (predicted == batch.responses[i]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(batch.size());
}

}  // namespace msni
