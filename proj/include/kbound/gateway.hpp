#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <semaphore>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "kbound/image.hpp"

namespace kbound {

class ResponseCache;

/// One chat-completion endpoint. `base_url` starting with "mock://" marks an offline endpoint
/// served by a registered backend.
struct EndpointSpec {
  std::string name;
  std::string base_url;
  std::string model_id;
  std::string api_key_env;
  bool supports_images = true;
  bool supports_logprobs = false;
  std::chrono::milliseconds timeout{60000};
  int max_retries = 3;

  void validate() const;
  bool is_mock() const { return base_url.rfind("mock://", 0) == 0; }
};

struct SamplingParams {
  double temperature = 0.0;
  int max_tokens = 512;
  std::optional<std::int64_t> seed;
  double top_p = 1.0;

  void validate() const;
};

/// PNG-encoded image attached to a message.
struct ImageAttachment {
  std::string png_bytes;
  std::string sha256;

  static ImageAttachment from_image(const ImageBuffer& img);
  static ImageAttachment from_png(std::string png_bytes);
};

struct Message {
  std::string role;
  std::string text;
  std::vector<ImageAttachment> images;
};

using Messages = std::vector<Message>;

bool has_images(const Messages& messages);

struct Transcript {
  std::string request_fingerprint;
  Messages messages;
  std::string response_text;
  std::optional<std::vector<double>> token_logprobs;
  std::chrono::milliseconds latency{0};
  bool from_cache = false;
  int sample_index = 0;
};

/// Deterministic digest of (model id, messages, sampling params, logprob flag).
std::string request_fingerprint(const EndpointSpec& endpoint, const Messages& messages,
                                const SamplingParams& params, bool want_logprobs);

struct BackendRequest {
  const EndpointSpec& endpoint;
  const Messages& messages;
  const SamplingParams& params;
  bool want_logprobs;
  const std::string& fingerprint;
  int sample_index;
};

struct BackendReply {
  std::string text;
  std::optional<std::vector<double>> logprobs;
};

/// Transport behind the gateway. Implementations throw TransportError (transient or not).
class Backend {
 public:
  virtual ~Backend() = default;
  virtual BackendReply send(const BackendRequest& request) = 0;
};

/// OpenAI-compatible POST {base_url}/chat/completions over HTTP(S).
class HttpChatBackend final : public Backend {
 public:
  BackendReply send(const BackendRequest& request) override;

  /// Request body as sent on the wire.
  static nlohmann::json build_body(const BackendRequest& request);
  /// Extracts text and per-token logprobs from a chat-completions response body.
  static BackendReply parse_body(const std::string& body);
};

struct RetryPolicy {
  std::chrono::milliseconds base{1000};
  double factor = 2.0;
  double jitter = 0.2;

  std::chrono::milliseconds delay(int attempt, double unit_random) const;
};

/// One request that reached a backend (cache hits are not logged).
struct CallRecord {
  std::string endpoint;
  std::string fingerprint;
  int sample_index = 0;
  double temperature = 0.0;
  bool has_image = false;
  bool want_logprobs = false;
  std::size_t n_messages = 0;
  std::string last_user_text;
};

/// Uniform client over chat endpoints with retries, a response cache and bounded parallelism.
/// Safe to share between threads.
class Gateway {
 public:
  struct Options {
    std::filesystem::path cache_dir;  // empty: in-memory cache only
    std::size_t max_in_flight = 8;
    RetryPolicy retry;
  };

  Gateway();
  explicit Gateway(Options options);
  ~Gateway();
  Gateway(const Gateway&) = delete;
  Gateway& operator=(const Gateway&) = delete;

  void register_backend(const std::string& endpoint_name, std::shared_ptr<Backend> backend);

  Transcript complete(const EndpointSpec& endpoint, const Messages& messages,
                      const SamplingParams& params, bool want_logprobs, int sample_index = 0);

  /// n independent samples; sample k is cached under index k. Any failure fails the batch.
  std::vector<Transcript> sample_n(const EndpointSpec& endpoint, const Messages& messages,
                                   const SamplingParams& params, int n,
                                   bool want_logprobs = false);

  std::size_t backend_calls() const;
  std::vector<CallRecord> call_log() const;
  void clear_call_log();
  std::size_t max_in_flight() const { return options_.max_in_flight; }

 private:
  Backend& backend_for(const EndpointSpec& endpoint);
  BackendReply send_with_retries(Backend& backend, const BackendRequest& request);

  Options options_;
  std::unique_ptr<ResponseCache> cache_;
  std::counting_semaphore<> in_flight_;
  mutable std::mutex mu_;
  std::map<std::string, std::shared_ptr<Backend>> backends_;
  std::shared_ptr<Backend> http_;
  std::vector<CallRecord> log_;
  std::uint64_t jitter_state_ = 0x9e3779b97f4a7c15ULL;
};

}  // namespace kbound
