#pragma once

#include "mmgr/agent.hpp"
#include "mmgr/api.hpp"

#include <map>
#include <memory>
#include <string>
#include <string_view>
#include <thread>

namespace mmgr {

/// Serves the operation table over HTTP on a background thread.
class HttpServer {
 public:
  explicit HttpServer(Service& service);
  ~HttpServer();

  /// Binds (port 0 picks a free one) and starts serving; returns the port.
  int start(const std::string& host, int port);
  /// Serves on the calling thread until stop().
  void serve_forever(const std::string& host, int port);
  void stop();
  ApiDispatcher& dispatcher() { return *dispatcher_; }

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
  std::unique_ptr<ApiDispatcher> dispatcher_;
  std::thread thread_;
};

struct HttpResult {
  int status = 0;  // 0 when the endpoint was unreachable
  std::string body;
  std::string content_type;
};

/// Minimal blocking client, endpoint given as "http://host:port".
class HttpClient {
 public:
  explicit HttpClient(const std::string& endpoint);
  ~HttpClient();

  HttpResult request(std::string_view method, const std::string& path_and_query,
                     const std::string& body = {},
                     const std::string& content_type = "application/json");

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

/// ServiceClient over the public HTTP API.
class HttpServiceClient : public ServiceClient {
 public:
  explicit HttpServiceClient(const std::string& endpoint) : http_(endpoint) {}

  SendStatus send_feedback(const FeedbackEvent& event) override;
  AgentCommand poll(std::string_view deployment_id) override;
  std::string fetch_blob(std::string_view hash) override;

 private:
  HttpClient http_;
};

std::string url_encode(std::string_view s);

}  // namespace mmgr
