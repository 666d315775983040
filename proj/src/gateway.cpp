#include "kbound/gateway.hpp"

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <thread>

#include <nlohmann/json.hpp>

#include "kbound/error.hpp"
#include "kbound/hashing.hpp"
#include "kbound/response_cache.hpp"

namespace kbound {
using json = nlohmann::json;

void EndpointSpec::validate() const {
  if (name.empty()) throw ConfigError("endpoint name must be non-empty");
  for (char c : name) {
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-' || c == '.')) {
      throw ConfigError("endpoint name '" + name + "' may only contain [A-Za-z0-9_.-]");
    }
  }
  if (base_url.empty()) throw ConfigError("endpoint '" + name + "' has no base_url");
  if (timeout.count() <= 0) throw ConfigError("endpoint '" + name + "' timeout must be > 0");
  if (max_retries < 0) throw ConfigError("endpoint '" + name + "' max_retries must be >= 0");
}

void SamplingParams::validate() const {
  if (temperature < 0) throw ConfigError("temperature must be >= 0");
  if (max_tokens <= 0) throw ConfigError("max_tokens must be > 0");
  if (!(top_p > 0 && top_p <= 1)) throw ConfigError("top_p must lie in (0, 1]");
}

ImageAttachment ImageAttachment::from_image(const ImageBuffer& img) {
  return from_png(encode_png(img));
}

ImageAttachment ImageAttachment::from_png(std::string png_bytes) {
  ImageAttachment a;
  a.sha256 = sha256_hex(png_bytes);
  a.png_bytes = std::move(png_bytes);
  return a;
}

bool has_images(const Messages& messages) {
  return std::any_of(messages.begin(), messages.end(),
                     [](const Message& m) { return !m.images.empty(); });
}

std::string request_fingerprint(const EndpointSpec& endpoint, const Messages& messages,
                                const SamplingParams& params, bool want_logprobs) {
  json msgs = json::array();
  for (const auto& m : messages) {
    json images = json::array();
    for (const auto& img : m.images) images.push_back(img.sha256);
    msgs.push_back({{"role", m.role}, {"text", m.text}, {"images", images}});
  }
  json p = {{"temperature", params.temperature},
            {"max_tokens", params.max_tokens},
            {"top_p", params.top_p},
            {"seed", params.seed ? json(*params.seed) : json(nullptr)}};
  json canon = {{"model", endpoint.model_id},
                {"messages", msgs},
                {"params", p},
                {"logprobs", want_logprobs}};
  return sha256_hex(canon.dump());
}

std::chrono::milliseconds RetryPolicy::delay(int attempt, double unit_random) const {
  const double base_ms = static_cast<double>(base.count()) * std::pow(factor, attempt);
  const double jittered = base_ms * (1.0 + jitter * (2.0 * unit_random - 1.0));
  return std::chrono::milliseconds(static_cast<std::int64_t>(std::max(0.0, jittered)));
}

Gateway::Gateway() : Gateway(Options{}) {}

Gateway::Gateway(Options options)
    : options_(std::move(options)),
      cache_(std::make_unique<ResponseCache>(options_.cache_dir)),
      in_flight_(static_cast<std::ptrdiff_t>(std::max<std::size_t>(1, options_.max_in_flight))) {
  options_.max_in_flight = std::max<std::size_t>(1, options_.max_in_flight);
}

Gateway::~Gateway() = default;

void Gateway::register_backend(const std::string& endpoint_name,
                               std::shared_ptr<Backend> backend) {
  std::lock_guard lock(mu_);
  backends_[endpoint_name] = std::move(backend);
}

Backend& Gateway::backend_for(const EndpointSpec& endpoint) {
  std::lock_guard lock(mu_);
  if (auto it = backends_.find(endpoint.name); it != backends_.end()) return *it->second;
  if (endpoint.base_url.rfind("http://", 0) == 0 || endpoint.base_url.rfind("https://", 0) == 0) {
    if (!http_) http_ = std::make_shared<HttpChatBackend>();
    return *http_;
  }
  throw ConfigError("no backend registered for endpoint '" + endpoint.name + "' (" +
                    endpoint.base_url + ")");
}

BackendReply Gateway::send_with_retries(Backend& backend, const BackendRequest& request) {
  for (int attempt = 0;; ++attempt) {
    try {
      in_flight_.acquire();
      struct Release {
        std::counting_semaphore<>& s;
        ~Release() { s.release(); }
      } release{in_flight_};
      return backend.send(request);
    } catch (const TransportError& e) {
      if (!e.transient()) throw;
      if (attempt >= request.endpoint.max_retries) {
        throw TransportError("endpoint '" + request.endpoint.name + "' failed after " +
                                 std::to_string(attempt + 1) + " attempts: " + e.what(),
                             false);
      }
      double u = 0.5;
      {
        std::lock_guard lock(mu_);
        jitter_state_ ^= jitter_state_ << 13;
        jitter_state_ ^= jitter_state_ >> 7;
        jitter_state_ ^= jitter_state_ << 17;
        u = static_cast<double>(jitter_state_ >> 11) * 0x1.0p-53;
      }
      std::this_thread::sleep_for(options_.retry.delay(attempt, u));
    }
  }
}

Transcript Gateway::complete(const EndpointSpec& endpoint, const Messages& messages,
                             const SamplingParams& params, bool want_logprobs, int sample_index) {
  endpoint.validate();
  params.validate();
  if (has_images(messages) && !endpoint.supports_images) {
    throw CapabilityError("endpoint '" + endpoint.name + "' does not accept images");
  }
  if (want_logprobs && !endpoint.supports_logprobs) {
    throw CapabilityError("endpoint '" + endpoint.name + "' does not provide logprobs");
  }

  Transcript t;
  t.request_fingerprint = request_fingerprint(endpoint, messages, params, want_logprobs);
  t.messages = messages;
  t.sample_index = sample_index;

  if (auto hit = cache_->get(endpoint.name, t.request_fingerprint, sample_index)) {
    t.response_text = std::move(hit->text);
    t.token_logprobs = std::move(hit->logprobs);
    t.latency = hit->latency;
    t.from_cache = true;
    return t;
  }

  Backend& backend = backend_for(endpoint);
  {
    CallRecord rec;
    rec.endpoint = endpoint.name;
    rec.fingerprint = t.request_fingerprint;
    rec.sample_index = sample_index;
    rec.temperature = params.temperature;
    rec.has_image = has_images(messages);
    rec.want_logprobs = want_logprobs;
    rec.n_messages = messages.size();
    for (auto it = messages.rbegin(); it != messages.rend(); ++it) {
      if (it->role == "user") {
        rec.last_user_text = it->text;
        break;
      }
    }
    std::lock_guard lock(mu_);
    log_.push_back(std::move(rec));
  }

  const auto start = std::chrono::steady_clock::now();
  BackendRequest req{endpoint, messages, params, want_logprobs, t.request_fingerprint,
                     sample_index};
  BackendReply reply = send_with_retries(backend, req);
  t.latency = std::chrono::duration_cast<std::chrono::milliseconds>(
      std::chrono::steady_clock::now() - start);

  if (want_logprobs) {
    if (!reply.logprobs || reply.logprobs->empty()) {
      throw CapabilityError("endpoint '" + endpoint.name + "' returned no logprobs");
    }
    for (double& lp : *reply.logprobs) {
      // Servers occasionally report log(1) as a tiny positive float.
      if (lp > 0 && lp <= 1e-6) lp = 0.0;
      if (!(lp <= 0)) {
        throw CapabilityError("endpoint '" + endpoint.name + "' returned a positive logprob");
      }
    }
  } else {
    reply.logprobs.reset();
  }

  t.response_text = reply.text;
  t.token_logprobs = reply.logprobs;
  cache_->put(endpoint.name, t.request_fingerprint, sample_index,
              CachedReply{reply.text, reply.logprobs, t.latency});
  return t;
}

std::vector<Transcript> Gateway::sample_n(const EndpointSpec& endpoint, const Messages& messages,
                                          const SamplingParams& params, int n,
                                          bool want_logprobs) {
  if (n < 1) throw ConfigError("sample_n needs n >= 1");
  std::vector<Transcript> out(static_cast<std::size_t>(n));
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(n));
  std::atomic<int> next{0};
  auto worker = [&] {
    for (int k = next++; k < n; k = next++) {
      try {
        out[static_cast<std::size_t>(k)] = complete(endpoint, messages, params, want_logprobs, k);
      } catch (...) {
        errors[static_cast<std::size_t>(k)] = std::current_exception();
      }
    }
  };
  const auto n_workers = std::min<std::size_t>(options_.max_in_flight, static_cast<std::size_t>(n));
  if (n_workers <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t i = 0; i < n_workers; ++i) pool.emplace_back(worker);
  }

  std::vector<int> failed;
  std::string first_cause;
  for (int k = 0; k < n; ++k) {
    if (!errors[static_cast<std::size_t>(k)]) continue;
    failed.push_back(k);
    if (first_cause.empty()) {
      try {
        std::rethrow_exception(errors[static_cast<std::size_t>(k)]);
      } catch (const std::exception& e) {
        first_cause = e.what();
      }
    }
  }
  if (!failed.empty()) {
    std::string idx;
    for (int k : failed) idx += (idx.empty() ? "" : ",") + std::to_string(k);
    throw BatchError("sample batch on '" + endpoint.name + "' failed at indices [" + idx +
                         "]: " + first_cause,
                     failed);
  }
  return out;
}

std::size_t Gateway::backend_calls() const {
  std::lock_guard lock(mu_);
  return log_.size();
}

std::vector<CallRecord> Gateway::call_log() const {
  std::lock_guard lock(mu_);
  return log_;
}

void Gateway::clear_call_log() {
  std::lock_guard lock(mu_);
  log_.clear();
}

}  // namespace kbound
