#include "msni/linalg.hpp"

#include <cmath>

#include <Eigen/Cholesky>

#include "msni/errors.hpp"

namespace msni {
namespace {

bool acceptable(const Eigen::LLT<Matrix>& llt, double condition_limit) {
  if (llt.info() != Eigen::Success) return false;
  const double rcond = llt.rcond();
  return std::isfinite(rcond) && rcond > 0.0 && 1.0 / rcond <= condition_limit;
}

Eigen::LLT<Matrix> guarded_factor(const Matrix& h, double condition_limit,
                                  bool* ridged) {
  if (h.rows() != h.cols() || h.rows() == 0) {
    throw InvalidInputError("solve_spd: matrix must be square and non-empty");
  }
  if (!h.allFinite()) {
    throw SingularSystemError("solve_spd: matrix has non-finite entries");
  }
  if (ridged != nullptr) *ridged = false;

  Eigen::LLT<Matrix> llt(h);
  if (acceptable(llt, condition_limit)) return llt;

  const double lambda = 1e-8 * h.trace() / static_cast<double>(h.rows());
  if (!(lambda > 0.0)) {
    throw SingularSystemError("solve_spd: matrix is singular (non-positive trace)");
  }
  Matrix guarded = h;
  guarded.diagonal().array() += lambda;
  llt.compute(guarded);
  if (llt.info() != Eigen::Success) {
    throw SingularSystemError("solve_spd: matrix is singular after ridge guard");
  }
  if (ridged != nullptr) *ridged = true;
  return llt;
}

}  // namespace

Vector solve_spd(const Matrix& h, const Vector& b, double condition_limit,
                 bool* ridged) {
  if (b.size() != h.rows()) {
    throw InvalidInputError("solve_spd: right-hand side dimension mismatch");
  }
  return guarded_factor(h, condition_limit, ridged).solve(b);
}

Matrix solve_spd(const Matrix& h, const Matrix& b, double condition_limit,
                 bool* ridged) {
  if (b.rows() != h.rows()) {
    throw InvalidInputError("solve_spd: right-hand side dimension mismatch");
  }
  return guarded_factor(h, condition_limit, ridged).solve(b);
}

void symmetrize_from_lower(Matrix& m) {
  for (Eigen::Index j = 1; j < m.cols(); ++j) {
    for (Eigen::Index i = 0; i < j; ++i) m(i, j) = m(j, i);
  }
}

}  // namespace msni
