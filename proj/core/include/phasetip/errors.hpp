#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace phasetip {

// Input data violates a record invariant or a file schema.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// An estimator could not produce a result on otherwise valid data.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Newton-Raphson ran out of iterations. Carries the last iterate.
class ConvergenceError : public NumericalError {
 public:
  ConvergenceError(const std::string& what, std::vector<double> last_beta)
      : NumericalError(what), last_beta_(std::move(last_beta)) {}

  const std::vector<double>& last_beta() const noexcept { return last_beta_; }

 private:
  std::vector<double> last_beta_;
};

// Monotone partial likelihood: at least one coefficient diverges.
class SeparationError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

}  // namespace phasetip
