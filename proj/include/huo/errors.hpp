#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace huo {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input: wrong dimensions, bad parameters, broken invariants.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// Request exceeds the configured memory/dimension cap.
class ResourceError : public Error {
 public:
  using Error::Error;
};

/// Floating point trouble: eigensolver failure, log of a non-positive weight.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// No complete MUB family is known (or implemented) for this dimension.
class UnsupportedDimensionError : public Error {
 public:
  using Error::Error;
};

/// A basis that was expected to be unbiased to the energy basis is not.
class NotUnbiasedError : public Error {
 public:
  using Error::Error;
};

/// An operation was called outside its stated domain.
class PreconditionError : public Error {
 public:
  using Error::Error;
};

class ConvergenceError : public Error {
 public:
  ConvergenceError(const std::string& what, double constraint_residual, double gradient_norm)
      : Error(what), constraint_residual_(constraint_residual), gradient_norm_(gradient_norm) {}

  double constraint_residual() const noexcept { return constraint_residual_; }
  double gradient_norm() const noexcept { return gradient_norm_; }

 private:
  double constraint_residual_;
  double gradient_norm_;
};

/// Golden comparison found different columns than expected.
class SchemaError : public Error {
 public:
  using Error::Error;
};

/// Configuration problems; carries every message found, not just the first.
class ConfigError : public Error {
 public:
  explicit ConfigError(std::vector<std::string> messages)
      : Error(join(messages)), messages_(std::move(messages)) {}

  const std::vector<std::string>& messages() const noexcept { return messages_; }

 private:
  static std::string join(const std::vector<std::string>& messages) {
    std::string out;
    for (const auto& m : messages) {
      if (!out.empty()) out += "; ";
      out += m;
    }
    return out;
  }

  std::vector<std::string> messages_;
};

}  // namespace huo
