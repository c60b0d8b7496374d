// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace elastst {

// Shape disagreement between operands.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// A scalar or structural parameter outside its legal range.
class ParameterError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// A precondition of an API contract was violated by the caller.
class ContractError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

// Input file could not be read or parsed.
class IngestionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A data split is too short for the requested window.
class SizingError : public IngestionError {
 public:
  using IngestionError::IngestionError;
};

// A metric whose denominator vanished.
class MetricError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// Bad run configuration (unknown key, missing key, malformed value).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace elastst
