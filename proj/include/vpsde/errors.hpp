// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace vpsde {

// Caller broke a documented precondition or a type invariant failed at
// construction (dimension mismatch, non-SPD covariance, out-of-range t, ...).
struct ContractViolation : std::invalid_argument {
  explicit ContractViolation(const std::string& msg) : std::invalid_argument(msg) {}
};

// A computation produced values outside its representable or admissible range
// (overflow in exp, non-finite SDE state, non-positive semigroup value, ...).
struct NumericError : std::runtime_error {
  explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

// An operation was asked of a target family it does not support.
struct CapabilityError : std::runtime_error {
  explicit CapabilityError(const std::string& msg) : std::runtime_error(msg) {}
};

// An event whose probability is negligible under correct RNG behaviour
// occurred repeatedly; signals an RNG or environment defect.
struct ImprobableEventError : std::runtime_error {
  explicit ImprobableEventError(const std::string& msg) : std::runtime_error(msg) {}
};

// Config file could not be parsed or failed validation.
struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace vpsde
