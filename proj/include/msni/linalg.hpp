#pragma once

#include <Eigen/Core>

namespace msni {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Condition number above which the ridge guard kicks in.
inline constexpr double kDefaultRidgeCondition = 1e12;

/// Solves H x = b for a symmetric matrix H using a Cholesky factorization.
///
/// When the factorization fails or the estimated condition number exceeds
/// `condition_limit`, H is replaced by H + lambda I with
/// lambda = 1e-8 * trace(H) / p and the factorization is retried. Throws
/// SingularSystemError if the guarded matrix still cannot be factorized.
/// `ridged`, when non-null, reports whether the guard was applied.
Vector solve_spd(const Matrix& h, const Vector& b,
                 double condition_limit = kDefaultRidgeCondition,
                 bool* ridged = nullptr);

/// Same guard as solve_spd, for a matrix right-hand side.
Matrix solve_spd(const Matrix& h, const Matrix& b,
                 double condition_limit = kDefaultRidgeCondition,
                 bool* ridged = nullptr);

/// Copies the lower triangle onto the upper one so the result is exactly
/// symmetric.
void symmetrize_from_lower(Matrix& m);

}  // namespace msni
