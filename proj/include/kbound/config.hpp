#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "kbound/gateway.hpp"
#include "kbound/judging.hpp"
#include "kbound/mock.hpp"
#include "kbound/types.hpp"

namespace kbound {

/// Endpoint declared in a run configuration, with its mock script when base_url is mock://.
struct EndpointConfig {
  EndpointSpec spec;
  std::optional<MockScript> mock_script;
};

/// Which declared endpoints play which part in a run.
struct RoleConfig {
  /// One report block per subject model.
  std::vector<std::string> subjects;
  std::optional<std::string> rephraser;
  std::optional<std::string> judge;
  std::vector<std::string> cross_model;
};

enum class UnparsedPolicy { kUnconfident, kError };

struct RunConfig {
  std::vector<EndpointConfig> endpoints;
  RoleConfig roles;
  std::vector<std::filesystem::path> datasets;
  std::vector<MethodSpec> methods;
  Modality modality = Modality::kVqa;
  JudgeSpec judge;
  double heldout_fraction = 0.2;
  std::uint64_t seed = 0;
  std::size_t concurrency = 8;
  std::filesystem::path cache_dir;
  std::filesystem::path output_dir;
  int max_tokens = 512;
  double sample_temperature = 1.0;
  double sigma_offset = 0.0;
  int cross_primary_samples = 4;
  int cross_other_samples = 3;
  UnparsedPolicy unparsed_confidence = UnparsedPolicy::kUnconfident;
  /// Score the eval pass on every record, heldout included (leakage guard off).
  bool evaluate_on_fit_data = false;
  /// Reuse fits from an earlier run instead of fitting on the heldout split.
  std::optional<std::filesystem::path> thresholds_file;
  /// Failure ratio above which a method batch aborts the run.
  double abort_failure_ratio = 0.5;

  const EndpointConfig& endpoint(const std::string& name) const;

  /// Throws ConfigError on unresolved roles or inconsistent settings.
  void validate() const;
};

/// Parses the TOML run configuration. Relative paths resolve against `base_dir`.
RunConfig parse_run_config(std::string_view toml_text, const std::filesystem::path& base_dir);
RunConfig load_run_config(const std::filesystem::path& path);

/// Restricts the run to `methods` (config knobs are kept for listed ones) and overrides the
/// modality when non-empty, then validates.
void apply_overrides(RunConfig& config, const std::vector<std::string>& methods,
                     const std::string& modality);

}  // namespace kbound
