#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace frsim {

// Input that violates a documented precondition: bad parameter value,
// mismatched dimensions, malformed scenario field, unsupported
// configuration. CLI exit code 1.
class ValidationError : public std::runtime_error {
 public:
  explicit ValidationError(const std::string& what) : std::runtime_error(what) {}
};

// Failure while executing an otherwise valid configuration (unwritable
// output, malformed trace file). CLI exit code 2.
class RuntimeFailure : public std::runtime_error {
 public:
  explicit RuntimeFailure(const std::string& what) : std::runtime_error(what) {}
};

// Non-finite loss or gradient during local descent; carries the step index.
class NumericalError : public RuntimeFailure {
 public:
  NumericalError(const std::string& what, std::size_t step)
      : RuntimeFailure(what + " at step " + std::to_string(step)), step_(step) {}

  std::size_t step() const { return step_; }

 private:
  std::size_t step_;
};

}  // namespace frsim
