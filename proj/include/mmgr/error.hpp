#pragma once

#include <json.hpp>

#include <stdexcept>
#include <string>
#include <string_view>

namespace mmgr {

using Json = nlohmann::ordered_json;

/// Closed set of machine-readable error codes. Every failure raised by the
/// library carries exactly one of these; the HTTP layer derives its status
/// from the code alone.
enum class ErrorCode {
  not_found,
  validation,
  state,
  cycle,
  schema,
  corruption,
  ordering,
  unsupported,
  inconclusive,
};

std::string_view to_string(ErrorCode code);
int http_status(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message, Json detail = Json::object())
      : std::runtime_error(message), code_(code), detail_(std::move(detail)) {}

  ErrorCode code() const noexcept { return code_; }
  const Json& detail() const noexcept { return detail_; }

 private:
  ErrorCode code_;
  Json detail_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message,
                              Json detail = Json::object()) {
  throw Error(code, message, std::move(detail));
}

[[noreturn]] inline void not_found(std::string_view what, std::string_view id) {
  fail(ErrorCode::not_found, std::string(what) + " not found: " + std::string(id),
       Json{{"kind", what}, {"id", id}});
}

inline std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::not_found: return "not_found";
    case ErrorCode::validation: return "validation";
    case ErrorCode::state: return "state";
    case ErrorCode::cycle: return "cycle";
    case ErrorCode::schema: return "schema";
    case ErrorCode::corruption: return "corruption";
    case ErrorCode::ordering: return "ordering";
    case ErrorCode::unsupported: return "unsupported";
    case ErrorCode::inconclusive: return "inconclusive";
  }
  return "validation";
}

inline int http_status(ErrorCode code) {
  switch (code) {
    case ErrorCode::not_found: return 404;
    case ErrorCode::validation:
    case ErrorCode::schema:
    case ErrorCode::ordering: return 422;
    case ErrorCode::state:
    case ErrorCode::cycle:
    case ErrorCode::inconclusive: return 409;
    case ErrorCode::corruption: return 500;
    case ErrorCode::unsupported: return 501;
  }
  return 500;
}

}  // namespace mmgr
