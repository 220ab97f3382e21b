#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace plr {

/// Invalid configuration value (unsupported smoothness order, zero
/// quadrature resolution, ...).
struct ConfigError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

/// Input outside the domain contract: points off [0,1], labels outside
/// {0,1}, empty groups, mismatched shapes.
struct DomainError : std::domain_error {
  using std::domain_error::domain_error;
};

/// Newton fit failed to converge or diverged. Carries the last iterate so
/// callers can inspect it or retry with a larger smoothing parameter.
struct FitError : std::runtime_error {
  FitError(const std::string& msg, std::vector<double> last_iterate,
           int iters, double grad_norm)
      : std::runtime_error(msg),
        iterate(std::move(last_iterate)),
        iterations(iters),
        gradient_norm(grad_norm) {}

  std::vector<double> iterate;
  int iterations = 0;
  double gradient_norm = 0.0;
};

/// Null calibration cannot be computed (degenerate spectrum, bisection
/// bracket failure, unreliable permutation replicates).
struct CalibrationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace plr
