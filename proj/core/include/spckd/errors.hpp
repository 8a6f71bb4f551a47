#ifndef SPCKD_ERRORS_HPP
#define SPCKD_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace spckd {

// Incompatible tensor/operator dimensions.
class ShapeError : public std::runtime_error {
 public:
  explicit ShapeError(const std::string& msg) : std::runtime_error(msg) {}
};

// Invalid configuration value (gamma out of range, zero stages, ...).
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// Malformed on-disk data (bad magic, truncation, version mismatch).
class FormatError : public std::runtime_error {
 public:
  explicit FormatError(const std::string& msg) : std::runtime_error(msg) {}
};

// API misuse (double backward, optimizer step without gradients, bad CLI).
class UsageError : public std::runtime_error {
 public:
  explicit UsageError(const std::string& msg) : std::runtime_error(msg) {}
};

// NaN/Inf surfaced during computation.
class NumericError : public std::runtime_error {
 public:
  explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace spckd

#endif  // SPCKD_ERRORS_HPP
