#pragma once

#include <stdexcept>
#include <string>

#include <Eigen/Core>

namespace msni {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidInputError : public Error {
 public:
  using Error::Error;
};

class InvalidScheduleError : public Error {
 public:
  using Error::Error;
};

/// A linear system stayed singular after the ridge guard was applied.
class SingularSystemError : public Error {
 public:
  using Error::Error;
};

/// Newton iteration stopped without meeting its convergence test.
class NonConvergenceError : public Error {
 public:
  NonConvergenceError(const std::string& what, Eigen::VectorXd last_iterate,
                      double gradient_norm)
      : Error(what),
        last_iterate_(std::move(last_iterate)),
        gradient_norm_(gradient_norm) {}

  const Eigen::VectorXd& last_iterate() const { return last_iterate_; }
  double gradient_norm() const { return gradient_norm_; }

 private:
  Eigen::VectorXd last_iterate_;
  double gradient_norm_;
};

class ParseError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace msni
