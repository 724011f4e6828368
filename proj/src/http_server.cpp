#include "mmgr/http.hpp"

#include <httplib.h>

#include <regex>

namespace mmgr {

struct HttpServer::Impl {
  httplib::Server server;
};

namespace {

std::string route_regex(std::string_view path, std::vector<std::string>& names) {
  std::string out;
  std::size_t i = 0;
  while (i < path.size()) {
    if (path[i] == '{') {
      const auto close = path.find('}', i);
      names.emplace_back(path.substr(i + 1, close - i - 1));
      out += "([^/]+)";
      i = close + 1;
    } else {
      const char c = path[i++];
      if (std::string_view(".^$|()[]*+?\\").find(c) != std::string_view::npos) out += '\\';
      out += c;
    }
  }
  return out;
}

void write(httplib::Response& res, const ApiResponse& r) {
  res.status = r.status;
  res.set_content(r.body, r.content_type);
}

}  // namespace

HttpServer::HttpServer(Service& service)
    : impl_(std::make_unique<Impl>()), dispatcher_(std::make_unique<ApiDispatcher>(service)) {
  auto& svr = impl_->server;
  svr.set_payload_max_length(std::size_t{1} << 30);
  for (const auto& op : op_table()) {
    std::vector<std::string> names;
    const std::string pattern = route_regex(op.path, names);
    const std::string op_name(op.name);
    auto handler = [this, names, op_name](const httplib::Request& req, httplib::Response& res) {
      ApiRequest r;
      for (std::size_t k = 0; k < names.size(); ++k) r.params[names[k]] = req.matches[k + 1].str();
      for (const auto& [key, value] : req.params) r.query[key] = value;
      r.body = req.body;
      write(res, dispatcher_->dispatch(op_name, r));
    };
    if (op.method == "GET") {
      svr.Get(pattern, handler);
    } else if (op.method == "POST") {
      svr.Post(pattern, handler);
    } else {
      svr.Delete(pattern, handler);
    }
  }
  svr.set_exception_handler([](const httplib::Request&, httplib::Response& res, std::exception_ptr) {
    write(res, ApiDispatcher::error_response(ErrorCode::corruption, "internal error"));
  });
  svr.set_error_handler([](const httplib::Request& req, httplib::Response& res) {
    if (!res.body.empty()) return httplib::Server::HandlerResponse::Unhandled;
    if (res.status == 404 || res.status == 405) {
      write(res, ApiDispatcher::error_response(ErrorCode::not_found, "no route for " + req.method + " " + req.path,
                                               Json{{"method", req.method}, {"path", req.path}}));
    } else {
      write(res, ApiDispatcher::error_response(ErrorCode::validation,
                                               "malformed request (HTTP " + std::to_string(res.status) + ")"));
    }
    return httplib::Server::HandlerResponse::Handled;
  });
}

HttpServer::~HttpServer() { stop(); }

int HttpServer::start(const std::string& host, int port) {
  auto& svr = impl_->server;
  int bound = port;
  if (port == 0) {
    bound = svr.bind_to_any_port(host);
  } else if (!svr.bind_to_port(host, port)) {
    bound = -1;
  }
  if (bound < 0) {
    fail(ErrorCode::state, "cannot bind " + host + ":" + std::to_string(port), Json{{"host", host}, {"port", port}});
  }
  thread_ = std::thread([&svr] { svr.listen_after_bind(); });
  svr.wait_until_ready();
  return bound;
}

void HttpServer::serve_forever(const std::string& host, int port) {
  if (!impl_->server.listen(host, port)) {
    fail(ErrorCode::state, "cannot listen on " + host + ":" + std::to_string(port),
         Json{{"host", host}, {"port", port}});
  }
}

void HttpServer::stop() {
  impl_->server.stop();
  if (thread_.joinable()) thread_.join();
}

}  // namespace mmgr
