#define CPPHTTPLIB_OPENSSL_SUPPORT
#include <httplib.h>

#include <cstdlib>

#include <nlohmann/json.hpp>

#include "kbound/error.hpp"
#include "kbound/gateway.hpp"
#include "kbound/hashing.hpp"

namespace kbound {
using json = nlohmann::json;

namespace {

struct Url {
  std::string origin;  // scheme://host[:port]
  std::string path;    // request path
};

Url split_url(const std::string& base_url) {
  const auto scheme_end = base_url.find("://");
  if (scheme_end == std::string::npos) throw ConfigError("malformed base_url '" + base_url + "'");
  const auto path_start = base_url.find('/', scheme_end + 3);
  Url u;
  u.origin = base_url.substr(0, path_start);
  std::string prefix = path_start == std::string::npos ? "" : base_url.substr(path_start);
  while (!prefix.empty() && prefix.back() == '/') prefix.pop_back();
  const std::string suffix = "/chat/completions";
  if (prefix.size() >= suffix.size() &&
      prefix.compare(prefix.size() - suffix.size(), suffix.size(), suffix) == 0) {
    u.path = prefix;
  } else {
    u.path = prefix + suffix;
  }
  return u;
}

bool transient_status(int status) { return status == 408 || status == 429 || status >= 500; }

}  // namespace

json HttpChatBackend::build_body(const BackendRequest& request) {
  json messages = json::array();
  for (const auto& m : request.messages) {
    if (m.images.empty()) {
      messages.push_back({{"role", m.role}, {"content", m.text}});
      continue;
    }
    json parts = json::array();
    for (const auto& img : m.images) {
      parts.push_back(
          {{"type", "image_url"},
           {"image_url", {{"url", "data:image/png;base64," + base64_encode(img.png_bytes)}}}});
    }
    parts.push_back({{"type", "text"}, {"text", m.text}});
    messages.push_back({{"role", m.role}, {"content", parts}});
  }
  json body = {{"model", request.endpoint.model_id},
               {"messages", messages},
               {"temperature", request.params.temperature},
               {"max_tokens", request.params.max_tokens},
               {"top_p", request.params.top_p}};
  if (request.params.seed) body["seed"] = *request.params.seed;
  if (request.want_logprobs) body["logprobs"] = true;
  return body;
}

BackendReply HttpChatBackend::parse_body(const std::string& body) {
  json j = json::parse(body, nullptr, /*allow_exceptions=*/false);
  if (j.is_discarded()) throw TransportError("response is not JSON", false);
  if (!j.contains("choices") || !j["choices"].is_array() || j["choices"].empty()) {
    throw TransportError("response has no choices", false);
  }
  const json& choice = j["choices"][0];
  BackendReply r;
  const json& content = choice.at("message").at("content");
  if (content.is_string()) {
    r.text = content.get<std::string>();
  } else if (content.is_array()) {
    for (const auto& part : content) {
      if (part.value("type", "") == "text") r.text += part.value("text", "");
    }
  }
  if (choice.contains("logprobs") && choice["logprobs"].is_object() &&
      choice["logprobs"].contains("content") && choice["logprobs"]["content"].is_array()) {
    std::vector<double> lps;
    for (const auto& tok : choice["logprobs"]["content"]) lps.push_back(tok.at("logprob"));
    r.logprobs = std::move(lps);
  }
  return r;
}

BackendReply HttpChatBackend::send(const BackendRequest& request) {
  const EndpointSpec& ep = request.endpoint;
  httplib::Headers headers;
  if (!ep.api_key_env.empty()) {
    const char* key = std::getenv(ep.api_key_env.c_str());
    if (key == nullptr || *key == '\0') {
      throw ConfigError("environment variable " + ep.api_key_env + " (API key for '" + ep.name +
                        "') is not set");
    }
    headers.emplace("Authorization", std::string("Bearer ") + key);
  }

  const Url url = split_url(ep.base_url);
  httplib::Client client(url.origin);
  const auto secs = std::chrono::duration_cast<std::chrono::seconds>(ep.timeout);
  const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(ep.timeout - secs);
  client.set_connection_timeout(secs.count(), usecs.count());
  client.set_read_timeout(secs.count(), usecs.count());
  client.set_write_timeout(secs.count(), usecs.count());

  auto res = client.Post(url.path, headers, build_body(request).dump(), "application/json");
  if (!res) {
    throw TransportError("request to " + ep.base_url + " failed: " + httplib::to_string(res.error()),
                         true);
  }
  if (res->status != 200) {
    throw TransportError("HTTP " + std::to_string(res->status) + " from " + ep.base_url + ": " +
                             res->body.substr(0, 300),
                         transient_status(res->status));
  }
  try {
    return parse_body(res->body);
  } catch (const json::exception& e) {
    throw TransportError(std::string("malformed chat-completions response: ") + e.what(), false);
  }
}

}  // namespace kbound
