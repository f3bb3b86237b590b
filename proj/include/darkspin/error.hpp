#pragma once

#include <stdexcept>
#include <string>

namespace darkspin {

enum class ErrorCode {
  Domain = 1,
  InvalidArgument,
  InsufficientData,
  NonConvergence,
  Unidentifiable,
  Integration,
  Truncation,
  Ambiguous,
  NoSolution,
  Internal,
};

const char* error_code_name(ErrorCode c);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& msg) : std::runtime_error(msg), code_(code) {}
  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

// Integration failure that still carries the best estimate reached.
class IntegrationError : public Error {
 public:
  IntegrationError(const std::string& msg, double estimate, double error_estimate)
      : Error(ErrorCode::Integration, msg), estimate_(estimate), error_estimate_(error_estimate) {}
  double estimate() const { return estimate_; }
  double error_estimate() const { return error_estimate_; }

 private:
  double estimate_;
  double error_estimate_;
};

[[noreturn]] inline void fail(ErrorCode c, const std::string& msg) { throw Error(c, msg); }

inline void require(bool ok, ErrorCode c, const std::string& msg) {
  if (!ok) fail(c, msg);
}

}  // namespace darkspin
