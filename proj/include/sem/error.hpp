#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace sem {

enum class ErrorCode {
  invalid_spec,
  invalid_argument,
  not_converged,
  infeasible,
  numerical,
  not_found,
  conflict,
  terminated,
  io,
};

inline std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::invalid_spec: return "invalid_spec";
    case ErrorCode::invalid_argument: return "invalid_argument";
    case ErrorCode::not_converged: return "not_converged";
    case ErrorCode::infeasible: return "infeasible";
    case ErrorCode::numerical: return "numerical";
    case ErrorCode::not_found: return "not_found";
    case ErrorCode::conflict: return "conflict";
    case ErrorCode::terminated: return "terminated";
    case ErrorCode::io: return "io";
  }
  return "unknown";
}

/// Library error. `path` names the offending field of a document when the
/// error comes from validation ("arrivals.density[2].c1").
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message, std::string path = {})
      : std::runtime_error(path.empty() ? message : path + ": " + message),
        code_(code),
        path_(std::move(path)) {}

  ErrorCode code() const noexcept { return code_; }
  const std::string& path() const noexcept { return path_; }

 private:
  ErrorCode code_;
  std::string path_;
};

}  // namespace sem
