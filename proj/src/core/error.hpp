#pragma once

#include <stdexcept>
#include <string>

namespace bicmix {

// Exit/status codes shared by the C API and the command line tool.
enum class ErrorCode : int {
  Ok = 0,
  Usage = 2,
  Data = 3,
  Numerical = 4,
  Internal = 5,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what) : std::runtime_error(what), code_(code) {}
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

class UsageError : public Error {
 public:
  explicit UsageError(const std::string& what) : Error(ErrorCode::Usage, what) {}
};

class DataError : public Error {
 public:
  explicit DataError(const std::string& what) : Error(ErrorCode::Data, what) {}
};

class NumericalError : public Error {
 public:
  explicit NumericalError(const std::string& what, double condition = 0.0)
      : Error(ErrorCode::Numerical, what), condition_(condition) {}
  // Reciprocal condition estimate of the failing system, 0 when not applicable.
  double condition() const noexcept { return condition_; }

 private:
  double condition_;
};

}  // namespace bicmix
