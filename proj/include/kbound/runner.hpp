#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "kbound/config.hpp"
#include "kbound/gateway.hpp"
#include "kbound/image.hpp"
#include "kbound/metrics.hpp"
#include "kbound/types.hpp"

namespace kbound {

/// Append-only JSON Lines run log. Each append is flushed and fsynced as one batch.
class RunLedger {
 public:
  /// `truncate` starts a fresh ledger; otherwise new lines are appended.
  RunLedger(std::filesystem::path path, bool truncate);

  void append(const std::vector<nlohmann::json>& lines);
  const std::filesystem::path& path() const { return path_; }

  /// All complete lines. A torn final line (interrupted write) is skipped.
  static std::vector<nlohmann::json> read(const std::filesystem::path& path);

 private:
  std::filesystem::path path_;
  std::mutex mu_;
};

/// Rebuilds the per-(model, dataset, method, modality) reports from ledger lines. Later lines
/// for the same record supersede earlier ones.
ReportSet reports_from_ledger(const std::vector<nlohmann::json>& lines);

/// Key used in thresholds.json.
std::string fit_key(const std::string& model, const std::string& dataset, Modality modality,
                    const std::string& method);

struct RunSummary {
  ReportSet reports;
  std::map<std::string, ThresholdFit> fits;
  std::size_t backend_calls = 0;
  std::size_t flagged = 0;
};

/// Orchestrates elicitation, grading, threshold fitting and reporting for a RunConfig.
class Runner {
 public:
  explicit Runner(RunConfig config, Gateway::Options gateway_options = {});
  ~Runner();

  /// Evaluates every configured method on the eval split and writes ledger.jsonl,
  /// thresholds.json and report.{json,csv,md} under the output directory. Without `resume`
  /// the ledger starts empty; fit and compare_modalities always append to it.
  RunSummary run(bool resume = false);

  /// Elicits on the heldout split only and writes thresholds.json.
  ThresholdFit fit(const std::string& method, bool resume = false);

  /// One method under qa, vqa and image_only. Writes modalities.{json,md}.
  RunSummary compare_modalities(const std::string& method, bool resume = false);

  Gateway& gateway() { return *gateway_; }
  const RunConfig& config() const { return config_; }
  const std::vector<QueryRecord>& records() const { return records_; }

 private:
  struct Impl;

  RunConfig config_;
  std::unique_ptr<Gateway> gateway_;
  std::vector<QueryRecord> records_;
  std::unique_ptr<Impl> impl_;
};

}  // namespace kbound
