#pragma once

#include <stdexcept>
#include <string>

namespace airseg {

// Exit codes shared by the command-line tool.
enum class ExitCode : int {
  kOk = 0,
  kValidation = 1,
  kNumerical = 2,
  kIo = 3,
};

class Error : public std::runtime_error {
 public:
  Error(ExitCode code, const std::string& what)
      : std::runtime_error(what), code_(code) {}
  ExitCode code() const noexcept { return code_; }

 private:
  ExitCode code_;
};

// Bad input: malformed dataset, violated precondition, inconsistent sizes.
class ValidationError : public Error {
 public:
  explicit ValidationError(const std::string& what)
      : Error(ExitCode::kValidation, what) {}
};

// A numerical procedure failed (non-convergence, degenerate geometry).
class NumericalError : public Error {
 public:
  explicit NumericalError(const std::string& what)
      : Error(ExitCode::kNumerical, what) {}
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& what) : Error(ExitCode::kIo, what) {}
};

}  // namespace airseg
