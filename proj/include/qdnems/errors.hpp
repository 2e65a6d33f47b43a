#pragma once

#include <stdexcept>
#include <string>

namespace qdnems {

/// Bad or inconsistent configuration (CLI exit code 1).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Numerical failure: non-convergence, spectral-bound violation, failed fit
/// (CLI exit code 2).
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A requested state is outside the truncated product basis.
class BasisError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

/// An oracle cross-check disagreed with the optimized path (CLI exit code 3).
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// The weak-field approximation does not hold: magnetic length <= dot radius.
class WeakFieldError : public ConfigError {
 public:
  WeakFieldError(const std::string& what, double length_ratio)
      : ConfigError(what), length_ratio_(length_ratio) {}
  /// l_B / R at the offending field.
  double length_ratio() const noexcept { return length_ratio_; }

 private:
  double length_ratio_;
};

}  // namespace qdnems
