#pragma once

#include "mmgr/error.hpp"
#include "mmgr/op_table.hpp"
#include "mmgr/service.hpp"

#include <atomic>
#include <map>
#include <string>
#include <string_view>

namespace mmgr {

struct ApiRequest {
  std::map<std::string, std::string> params;  // path parameters
  std::map<std::string, std::string> query;
  std::string body;
};

struct ApiResponse {
  int status = 200;
  std::string content_type = "application/json";
  std::string body;
};

/// Transport-independent request handling. Every failure leaves as an
/// ApiError envelope {"error": {"code", "message", "detail"}}.
class ApiDispatcher {
 public:
  explicit ApiDispatcher(Service& service) : service_(service) {}

  ApiResponse dispatch(std::string_view op_name, const ApiRequest& request) noexcept;

  static ApiResponse error_response(ErrorCode code, const std::string& message,
                                    const Json& detail = Json::object());

  /// Exceptions that reached the generic fallback instead of a mapped
  /// error. Should stay zero.
  std::size_t unmapped_errors() const { return unmapped_.load(); }

 private:
  ApiResponse handle(const OpSpec& op, const ApiRequest& request);

  Service& service_;
  std::atomic<std::size_t> unmapped_{0};
};

}  // namespace mmgr
