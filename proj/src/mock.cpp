#include "kbound/mock.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

#include <nlohmann/json.hpp>

#include "kbound/error.hpp"
#include "kbound/hashing.hpp"
#include "kbound/rng.hpp"

namespace kbound {
using json = nlohmann::json;

namespace {

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

bool matches(const MockRule& rule, const Messages& messages) {
  std::string last_user;
  std::string all;
  for (const auto& m : messages) {
    all += lower(m.text);
    all += '\n';
    if (m.role == "user") last_user = lower(m.text);
  }
  for (const auto& s : rule.contains) {
    if (last_user.find(lower(s)) == std::string::npos) return false;
  }
  for (const auto& s : rule.context) {
    if (all.find(lower(s)) == std::string::npos) return false;
  }
  if (rule.image && *rule.image != has_images(messages)) return false;
  return true;
}

std::uint64_t seed_for(std::uint64_t seed, const std::string& fingerprint, int sample_index) {
  return derive_seed(seed, fingerprint + ":" + std::to_string(sample_index));
}

std::vector<double> synth_logprobs(const std::string& text, double share) {
  std::istringstream in(text);
  std::size_t tokens = 0;
  for (std::string w; in >> w;) ++tokens;
  const double lp = std::log(std::clamp(share, 1e-12, 1.0));
  return std::vector<double>(std::max<std::size_t>(tokens, 1), lp);
}

}  // namespace

MockScript mock_script_from_json(const json& j) {
  MockScript s;
  s.seed = j.value("seed", std::uint64_t{0});
  if (j.contains("fallback") && j["fallback"].is_string()) s.fallback = j["fallback"];
  for (const auto& jr : j.at("rules")) {
    MockRule r;
    r.contains = jr.value("contains", std::vector<std::string>{});
    r.context = jr.value("context", std::vector<std::string>{});
    if (jr.contains("image") && jr["image"].is_boolean()) r.image = jr["image"].get<bool>();
    r.cycle = jr.value("cycle", false);
    for (const auto& ja : jr.at("answers")) {
      MockAnswer a;
      if (ja.is_string()) {
        a.text = ja.get<std::string>();
      } else {
        a.text = ja.at("text");
        a.weight = ja.value("p", 1.0);
        if (ja.contains("logprobs")) a.logprobs = ja["logprobs"].get<std::vector<double>>();
      }
      if (!(a.weight > 0)) throw ConfigError("mock answer weights must be positive");
      r.answers.push_back(std::move(a));
    }
    if (r.answers.empty()) throw ConfigError("mock rule has no answers");
    s.rules.push_back(std::move(r));
  }
  return s;
}

json mock_script_to_json(const MockScript& script) {
  json rules = json::array();
  for (const auto& r : script.rules) {
    json answers = json::array();
    for (const auto& a : r.answers) {
      json ja = {{"text", a.text}, {"p", a.weight}};
      if (a.logprobs) ja["logprobs"] = *a.logprobs;
      answers.push_back(ja);
    }
    json jr = {{"contains", r.contains}, {"context", r.context}, {"answers", answers}};
    if (r.image) jr["image"] = *r.image;
    if (r.cycle) jr["cycle"] = true;
    rules.push_back(jr);
  }
  json j = {{"seed", script.seed}, {"rules", rules}};
  if (script.fallback) j["fallback"] = *script.fallback;
  return j;
}

MockScript load_mock_script(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open mock script " + path.string());
  try {
    return mock_script_from_json(json::parse(in));
  } catch (const json::exception& e) {
    throw ConfigError("malformed mock script " + path.string() + ": " + e.what());
  }
}

MockBackend::MockBackend(MockScript script) : script_(std::move(script)) {
  if (script_.rules.empty()) {
    throw ConfigError("mock script must contain at least one rule");
  }
}

BackendReply MockBackend::send(const BackendRequest& request) {
  const MockRule* rule = nullptr;
  for (const auto& r : script_.rules) {
    if (matches(r, request.messages)) {
      rule = &r;
      break;
    }
  }
  if (rule == nullptr) {
    if (!script_.fallback) {
      const std::string q = request.messages.empty() ? "" : request.messages.back().text;
      throw TransportError("mock endpoint '" + request.endpoint.name +
                               "' has no rule for request: " + q.substr(0, 200),
                           false);
    }
    BackendReply r{*script_.fallback, std::nullopt};
    if (request.want_logprobs) r.logprobs = synth_logprobs(r.text, 1.0);
    return r;
  }

  double total = 0;
  for (const auto& a : rule->answers) total += a.weight;

  std::size_t pick = 0;
  if (request.params.temperature <= 0) {
    for (std::size_t i = 1; i < rule->answers.size(); ++i) {
      if (rule->answers[i].weight > rule->answers[pick].weight) pick = i;
    }
  } else if (rule->cycle) {
    pick = static_cast<std::size_t>(request.sample_index) % rule->answers.size();
  } else {
    std::mt19937_64 rng(seed_for(script_.seed, request.fingerprint, request.sample_index));
    const double u = unit_uniform(rng) * total;
    double acc = 0;
    pick = rule->answers.size() - 1;
    for (std::size_t i = 0; i < rule->answers.size(); ++i) {
      acc += rule->answers[i].weight;
      if (u < acc) {
        pick = i;
        break;
      }
    }
  }

  const MockAnswer& a = rule->answers[pick];
  BackendReply r{a.text, std::nullopt};
  if (a.logprobs) {
    r.logprobs = a.logprobs;
  } else if (request.want_logprobs) {
    r.logprobs = synth_logprobs(a.text, a.weight / total);
  }
  return r;
}

EndpointSpec mock_endpoint(Gateway& gateway, const std::string& name, MockScript script,
                           std::uint64_t seed, bool supports_images, bool supports_logprobs) {
  script.seed = seed;
  EndpointSpec ep;
  ep.name = name;
  ep.base_url = "mock://" + name;
  ep.model_id = "mock-" + name;
  ep.supports_images = supports_images;
  ep.supports_logprobs = supports_logprobs;
  ep.max_retries = 0;
  ep.validate();
  gateway.register_backend(name, std::make_shared<MockBackend>(std::move(script)));
  return ep;
}

}  // namespace kbound
