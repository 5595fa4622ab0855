#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace vsg {

/// Base for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input text: bad JSON, missing/mistyped fields, bad MATPOWER blocks.
class ParseError : public Error {
 public:
  using Error::Error;
};

/// Structurally valid input that violates a model invariant.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// A linear-algebra or power-flow precondition does not hold.
class NumericalError : public Error {
 public:
  using Error::Error;
};

/// An enumeration would exceed its configured size cap.
class CapacityError : public Error {
 public:
  CapacityError(const std::string& what, std::uint64_t required, std::uint64_t cap)
      : Error(what + ": " + std::to_string(required) + " exceeds cap " + std::to_string(cap)),
        required_(required),
        cap_(cap) {}

  std::uint64_t required() const noexcept { return required_; }
  std::uint64_t cap() const noexcept { return cap_; }

 private:
  std::uint64_t required_;
  std::uint64_t cap_;
};

}  // namespace vsg
