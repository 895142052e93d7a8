#pragma once

#include <stdexcept>
#include <string>

namespace novsal {

// Process exit codes used by the command-line front end.
enum class ExitCode : int { Ok = 0, Usage = 1, Data = 2, Numerical = 3 };

class Error : public std::runtime_error {
 public:
  Error(ExitCode code, const std::string& what) : std::runtime_error(what), code_(code) {}
  ExitCode code() const noexcept { return code_; }

 private:
  ExitCode code_;
};

// Bad configuration or command-line usage.
class UsageError : public Error {
 public:
  explicit UsageError(const std::string& what) : Error(ExitCode::Usage, what) {}
};

// Malformed, missing or inconsistent input data (files, dimensions, manifests).
class DataError : public Error {
 public:
  explicit DataError(const std::string& what) : Error(ExitCode::Data, what) {}
};

// Training produced a non-finite loss or parameter.
class NumericalError : public Error {
 public:
  explicit NumericalError(const std::string& what) : Error(ExitCode::Numerical, what) {}
};

}  // namespace novsal
