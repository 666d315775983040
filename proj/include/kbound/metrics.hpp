#pragma once

#include <compare>
#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <string_view>

#include "kbound/types.hpp"

namespace kbound {

/// Exact count ratio.
struct Ratio {
  std::int64_t num = 0;
  std::int64_t den = 1;

  double value() const { return static_cast<double>(num) / static_cast<double>(den); }
  bool operator==(const Ratio& o) const { return num * o.den == o.num * den; }
};

/// Confusion counts and the five perception metrics.
///   Unc-R  = (FN + TN) / Total
///   Acc    = (TP + FN) / Total
///   Align  = (TP + TN) / Total
///   Overco = FP / Total
///   Conser = FN / Total
struct MetricsReport {
  std::int64_t total = 0;
  std::int64_t tp = 0;
  std::int64_t fp = 0;
  std::int64_t tn = 0;
  std::int64_t fn = 0;
  double unc_r = 0;
  double acc = 0;
  double align = 0;
  double overco = 0;
  double conser = 0;
  /// Records that failed and are excluded from Total.
  std::int64_t flagged = 0;
  /// Records counted as unconfident because no confidence keyword was found.
  std::int64_t unparsed_confidence = 0;

  /// Throws Error when all counts are zero or any count is negative.
  static MetricsReport from_counts(std::int64_t tp, std::int64_t fp, std::int64_t tn,
                                   std::int64_t fn);

  Ratio unc_r_ratio() const { return {fn + tn, total}; }
  Ratio acc_ratio() const { return {tp + fn, total}; }
  Ratio align_ratio() const { return {tp + tn, total}; }
  Ratio overco_ratio() const { return {fp, total}; }
  Ratio conser_ratio() const { return {fn, total}; }

  /// Checks the count identities and that each metric equals its ratio.
  void check_invariants() const;

  bool operator==(const MetricsReport&) const = default;
};

/// Throws Error on empty input.
MetricsReport compute_metrics(std::span<const EvalOutcome> outcomes);

struct ReportKey {
  std::string model;
  std::string dataset;
  std::string method;
  std::string modality = "vqa";

  auto operator<=>(const ReportKey&) const = default;
};

using ReportSet = std::map<ReportKey, MetricsReport>;

enum class ReportFormat { kJson, kCsv, kMarkdown };

ReportFormat parse_report_format(std::string_view s);
std::string_view extension_for(ReportFormat f);

/// Renders reports ordered by (model, dataset, method, modality).
std::string render_report(const ReportSet& reports, ReportFormat format);
void emit_report(const ReportSet& reports, ReportFormat format, const std::filesystem::path& path);

ReportSet parse_report_json(std::string_view text);

/// One table per model: a row per query modality (QA, VQA, "V"QA) for each method.
std::string render_modality_table(const ReportSet& reports);

}  // namespace kbound
