// OpenAI-compatible HTTP backend. httplib stays private to this translation
// unit; everything else talks through the ModelBackend interface.
#include <httplib.h>
#include <json.hpp>

#include <algorithm>
#include <cstdlib>

#include "mtp/error.hpp"
#include "mtp/gateway.hpp"

namespace mtp {
namespace {

using nlohmann::json;

json message_to_wire(const ChatMessage& m) {
  json jm;
  jm["role"] = m.role;
  if (m.image_data_url) {
    // multi-part content: text block + image block
    json parts = json::array();
    parts.push_back({{"type", "text"}, {"text", m.content}});
    parts.push_back({{"type", "image_url"}, {"image_url", {{"url", *m.image_data_url}}}});
    jm["content"] = std::move(parts);
  } else {
    jm["content"] = m.content;
  }
  return jm;
}

}  // namespace

struct HttpBackend::Impl {
  std::string host;    // scheme://host[:port]
  std::string prefix;  // path prefix from base_url, no trailing slash
  std::string token;
  int timeout_s;

  json post(const std::string& path, const json& body) const {
    httplib::Client client(host);
    client.set_connection_timeout(10, 0);
    client.set_read_timeout(timeout_s, 0);
    httplib::Headers headers;
    if (!token.empty()) headers.emplace("Authorization", "Bearer " + token);
    auto res = client.Post(prefix + path, headers, body.dump(), "application/json");
    if (!res)
      throw transport_error("request to " + host + prefix + path + " failed: " +
                            httplib::to_string(res.error()));
    if (res->status == 429 || res->status >= 500)
      throw transport_error("HTTP " + std::to_string(res->status) + " from " + path);
    if (res->status >= 400) {
      std::string snippet = res->body.substr(0, 200);
      throw config_error("HTTP " + std::to_string(res->status) + " from " + path +
                         ": " + snippet);
    }
    try {
      return json::parse(res->body);
    } catch (const json::parse_error& e) {
      throw transport_error(std::string("malformed response body: ") + e.what());
    }
  }
};

HttpBackend::HttpBackend(HttpBackendConfig config) : impl_(std::make_unique<Impl>()) {
  if (config.base_url.empty()) throw config_error("backend base_url is empty");
  auto scheme_pos = config.base_url.find("://");
  if (scheme_pos == std::string::npos)
    throw config_error("backend base_url '" + config.base_url +
                       "' must start with http:// or https://");
  auto path_pos = config.base_url.find('/', scheme_pos + 3);
  impl_->host = config.base_url.substr(0, path_pos);
  if (path_pos != std::string::npos) {
    impl_->prefix = config.base_url.substr(path_pos);
    while (!impl_->prefix.empty() && impl_->prefix.back() == '/')
      impl_->prefix.pop_back();
  }
  impl_->timeout_s = config.timeout_s;
  if (!config.credential_env.empty()) {
    const char* token = std::getenv(config.credential_env.c_str());
    if (!token || *token == '\0')
      throw config_error("credential environment variable '" + config.credential_env +
                         "' is not set");
    impl_->token = token;
  }
}

HttpBackend::~HttpBackend() = default;

std::string HttpBackend::name() const { return "http:" + impl_->host; }

std::string HttpBackend::complete(const ModelRequest& req) {
  json body;
  body["model"] = req.model_id;
  body["messages"] = json::array();
  for (const ChatMessage& m : req.messages)
    body["messages"].push_back(message_to_wire(m));
  body["temperature"] = req.params.temperature;
  body["max_tokens"] = req.params.max_tokens;
  if (req.params.seed) body["seed"] = *req.params.seed;

  json res = impl_->post("/v1/chat/completions", body);
  if (!res.contains("choices") || !res["choices"].is_array() || res["choices"].empty())
    throw transport_error("chat response has no choices");
  const json& msg = res["choices"][0];
  if (!msg.contains("message") || !msg["message"].contains("content") ||
      !msg["message"]["content"].is_string())
    throw transport_error("chat response choice has no message content");
  return msg["message"]["content"].get<std::string>();
}

std::vector<std::vector<double>> HttpBackend::embed(const ModelRequest& req) {
  json body;
  body["model"] = req.model_id;
  body["input"] = req.input;

  json res = impl_->post("/v1/embeddings", body);
  if (!res.contains("data") || !res["data"].is_array())
    throw transport_error("embedding response has no data array");
  struct Row {
    int index;
    std::vector<double> vec;
  };
  std::vector<Row> rows;
  for (const json& item : res["data"]) {
    Row row;
    row.index = item.value("index", static_cast<int>(rows.size()));
    if (!item.contains("embedding") || !item["embedding"].is_array())
      throw transport_error("embedding response item has no vector");
    row.vec = item["embedding"].get<std::vector<double>>();
    rows.push_back(std::move(row));
  }
  if (rows.size() != req.input.size())
    throw transport_error("embedding response count mismatch");
  std::sort(rows.begin(), rows.end(),
            [](const Row& a, const Row& b) { return a.index < b.index; });
  std::vector<std::vector<double>> out;
  out.reserve(rows.size());
  for (Row& row : rows) out.push_back(std::move(row.vec));
  return out;
}

}  // namespace mtp
