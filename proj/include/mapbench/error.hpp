#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace mapbench {

/// Base class for every domain failure raised by the toolkit; the CLI maps it to exit code 1.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  using Error::Error;
};

/// The occupancy grid has no closed outer wall to bound the interior.
class NoBoundaryError : public Error {
 public:
  using Error::Error;
};

class SingularDesignError : public Error {
 public:
  using Error::Error;
};

class ConvergenceError : public Error {
 public:
  ConvergenceError(const std::string& what, std::size_t iterations)
      : Error(what + " (after " + std::to_string(iterations) + " iterations)"),
        iterations_(iterations) {}
  std::size_t iterations() const noexcept { return iterations_; }

 private:
  std::size_t iterations_;
};

class ValidationError : public Error {
 public:
  using Error::Error;
};

}  // namespace mapbench
