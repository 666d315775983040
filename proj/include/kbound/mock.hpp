#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "kbound/gateway.hpp"

namespace kbound {

struct MockAnswer {
  std::string text;
  double weight = 1.0;
  std::optional<std::vector<double>> logprobs;
};

/// A rule matches when every `contains` substring occurs in the latest user turn, every
/// `context` substring occurs somewhere in the conversation (both case-insensitive), and the
/// image condition holds. The first matching rule answers.
struct MockRule {
  std::vector<std::string> contains;
  std::vector<std::string> context;
  std::optional<bool> image;
  std::vector<MockAnswer> answers;
  /// Sampled calls take answers[sample_index % size] instead of a weighted draw.
  bool cycle = false;
};

struct MockScript {
  std::vector<MockRule> rules;
  std::optional<std::string> fallback;
  std::uint64_t seed = 0;
};

MockScript mock_script_from_json(const nlohmann::json& j);
nlohmann::json mock_script_to_json(const MockScript& script);
MockScript load_mock_script(const std::filesystem::path& path);

/// Offline backend. Temperature 0 returns the highest-weight answer (first on ties); higher
/// temperatures draw from the weights with an RNG seeded by (seed, fingerprint, sample index),
/// so results do not depend on call order or thread scheduling. When logprobs are requested
/// and none are scripted, each whitespace token gets log(weight share).
class MockBackend final : public Backend {
 public:
  explicit MockBackend(MockScript script);
  BackendReply send(const BackendRequest& request) override;
  const MockScript& script() const { return script_; }

 private:
  MockScript script_;
};

/// Registers a mock backend on `gateway` and returns its endpoint spec (base_url "mock://name").
EndpointSpec mock_endpoint(Gateway& gateway, const std::string& name, MockScript script,
                           std::uint64_t seed, bool supports_images = true,
                           bool supports_logprobs = true);

}  // namespace kbound
