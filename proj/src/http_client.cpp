#include "mmgr/http.hpp"

#include "mmgr/json_io.hpp"

#include <httplib.h>

namespace mmgr {

struct HttpClient::Impl {
  explicit Impl(const std::string& endpoint) : client(endpoint) {
    client.set_connection_timeout(5);
    client.set_read_timeout(120);
    client.set_write_timeout(120);
  }
  httplib::Client client;
};

HttpClient::HttpClient(const std::string& endpoint) : impl_(std::make_unique<Impl>(endpoint)) {
  if (!impl_->client.is_valid()) fail(ErrorCode::validation, "invalid endpoint: " + endpoint);
}

HttpClient::~HttpClient() = default;

HttpResult HttpClient::request(std::string_view method, const std::string& path_and_query, const std::string& body,
                               const std::string& content_type) {
  auto& c = impl_->client;
  httplib::Result r = method == "GET"    ? c.Get(path_and_query)
                      : method == "POST" ? c.Post(path_and_query, body, content_type)
                                         : c.Delete(path_and_query, body, content_type);
  if (!r) return {0, httplib::to_string(r.error()), ""};
  return {r->status, r->body, r->get_header_value("Content-Type")};
}

std::string url_encode(std::string_view s) {
  static const char* hex = "0123456789ABCDEF";
  std::string out;
  for (unsigned char c : s) {
    if (std::isalnum(c) || c == '-' || c == '_' || c == '.' || c == '~') {
      out += static_cast<char>(c);
    } else {
      out += '%';
      out += hex[c >> 4];
      out += hex[c & 15];
    }
  }
  return out;
}

namespace {

ErrorCode code_from_string(std::string_view s) {
  for (auto c : {ErrorCode::not_found, ErrorCode::validation, ErrorCode::state, ErrorCode::cycle, ErrorCode::schema,
                 ErrorCode::corruption, ErrorCode::ordering, ErrorCode::unsupported, ErrorCode::inconclusive}) {
    if (to_string(c) == s) return c;
  }
  return ErrorCode::corruption;
}

[[noreturn]] void raise_from(const HttpResult& r) {
  if (r.status == 0) fail(ErrorCode::state, "service unreachable: " + r.body, Json{{"reason", "unreachable"}});
  const Json j = Json::parse(r.body, nullptr, false);
  if (j.is_object() && j.contains("error") && j["error"].is_object()) {
    const Json& e = j["error"];
    fail(code_from_string(e.value("code", "")), e.value("message", ""), e.value("detail", Json::object()));
  }
  fail(ErrorCode::corruption, "unexpected HTTP " + std::to_string(r.status));
}

}  // namespace

ServiceClient::SendStatus HttpServiceClient::send_feedback(const FeedbackEvent& event) {
  Json features = Json::object();
  for (const auto& [k, v] : event.features) features[k] = v;
  const Json line = {{"seq", event.seq},
                     {"features", features},
                     {"prediction", event.prediction},
                     {"observation", event.observation},
                     {"ts", event.ts}};
  const auto r = http_.request("POST", "/deployments/" + url_encode(event.deployment_id) + "/feedback",
                               dump_line(line), "application/x-ndjson");
  if (r.status == 200) return SendStatus::accepted;
  if (r.status == 0) return SendStatus::unreachable;
  try {
    raise_from(r);
  } catch (const Error& e) {
    if (e.code() == ErrorCode::state && e.detail().value("reason", "") == "inactive") return SendStatus::inactive;
    // The service already holds this seq (an earlier response was lost).
    if (e.code() == ErrorCode::ordering && e.detail().value("got", 0ULL) < e.detail().value("expected", 0ULL)) {
      return SendStatus::accepted;
    }
    throw;
  }
}

AgentCommand HttpServiceClient::poll(std::string_view deployment_id) {
  const auto r = http_.request("GET", "/deployments/" + url_encode(deployment_id) + "/command");
  if (r.status == 0) return {"none", std::nullopt, std::nullopt, std::nullopt};
  if (r.status != 200) raise_from(r);
  const Json j = Json::parse(r.body);
  AgentCommand c;
  c.action = j.at("action").get<std::string>();
  if (!j.at("deployment_id").is_null()) c.deployment_id = j["deployment_id"].get<std::string>();
  if (!j.at("model_id").is_null()) c.model_id = j["model_id"].get<std::string>();
  if (!j.at("bundle").is_null()) c.bundle = BlobRef{j["bundle"].at("hash").get<std::string>(), j["bundle"].at("size").get<std::uint64_t>()};
  return c;
}

std::string HttpServiceClient::fetch_blob(std::string_view hash) {
  const auto r = http_.request("GET", "/blobs/" + url_encode(hash));
  if (r.status != 200) raise_from(r);
  return r.body;
}

}  // namespace mmgr
