#pragma once

#include <stdexcept>
#include <string>
#include <utility>

#include <Eigen/Dense>

namespace spps {

enum class ErrorKind { input, non_convergence, degenerate_estimation, bootstrap_unreliable };

inline const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::input: return "input";
    case ErrorKind::non_convergence: return "non_convergence";
    case ErrorKind::degenerate_estimation: return "degenerate_estimation";
    case ErrorKind::bootstrap_unreliable: return "bootstrap_unreliable";
  }
  return "unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

class InputError : public Error {
 public:
  explicit InputError(const std::string& what) : Error(ErrorKind::input, what) {}
};

// Raised when Newton iterates diverge (separation) in a beta fit.
class NonConvergence : public Error {
 public:
  NonConvergence(const std::string& what, Eigen::VectorXd last_iterate, int iterations)
      : Error(ErrorKind::non_convergence, what),
        last_iterate_(std::move(last_iterate)),
        iterations_(iterations) {}
  const Eigen::VectorXd& last_iterate() const noexcept { return last_iterate_; }
  int iterations() const noexcept { return iterations_; }

 private:
  Eigen::VectorXd last_iterate_;
  int iterations_;
};

class EstimationError : public Error {
 public:
  explicit EstimationError(const std::string& what)
      : Error(ErrorKind::degenerate_estimation, what) {}
};

inline void require(bool condition, const std::string& message) {
  if (!condition) throw InputError(message);
}

}  // namespace spps
