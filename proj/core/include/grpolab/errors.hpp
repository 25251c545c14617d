#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace grpolab {

// Argument errors use std::invalid_argument throughout the library.

/// Raised when a computation produces a nonfinite value (ratio, gradient).
class NumericalError : public std::runtime_error {
 public:
  NumericalError(const std::string& what, std::size_t index)
      : std::runtime_error(what), index_(index) {}

  /// Group index or step index at which the failure was detected.
  std::size_t index() const noexcept { return index_; }

 private:
  std::size_t index_;
};

/// Raised for requests the implementation cannot service (e.g. enumerating
/// a correct set that is too large).
class UnsupportedError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace grpolab
