#pragma once

#include <stdexcept>
#include <string>

namespace atomkernel {

// Base class for all library errors so callers can catch one type.
struct Error : std::runtime_error {
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Mixing points or atoms from different domains (torus vs line vs plane).
struct VariantMismatchError : Error {
  explicit VariantMismatchError(const std::string& msg) : Error(msg) {}
};

// Non-finite coordinate or weight, empty input where content is required.
struct InvalidValueError : Error {
  explicit InvalidValueError(const std::string& msg) : Error(msg) {}
};

// Support too close together for the requested construction.
struct SeparationError : Error {
  explicit SeparationError(const std::string& msg) : Error(msg) {}
};

// Validation grid cannot resolve the near regions.
struct GridTooCoarseError : Error {
  explicit GridTooCoarseError(const std::string& msg) : Error(msg) {}
};

// Constrained recovery problem has no solution at the requested accuracy.
struct InfeasibleError : Error {
  explicit InfeasibleError(const std::string& msg) : Error(msg) {}
};

// Certificate family cannot meet the requested far-field level.
struct CertificateSetEmptyError : Error {
  explicit CertificateSetEmptyError(const std::string& msg) : Error(msg) {}
};

// Malformed configuration input.
struct ConfigError : Error {
  explicit ConfigError(const std::string& msg) : Error(msg) {}
};

}  // namespace atomkernel
