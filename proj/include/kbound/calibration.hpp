#pragma once

#include <filesystem>
#include <map>
#include <span>
#include <string>

#include "kbound/types.hpp"

namespace kbound {

struct ScoredLabel {
  double score = 0.0;
  bool correct = false;
};

/// Confidence rule shared by fitting and application: equality with the threshold is confident.
bool is_confident(double score, double threshold, Direction direction);

/// Picks the cut-off that maximizes alignment on `pairs`.
///
/// Candidates are -inf, the midpoints between adjacent distinct finite scores, and +inf.
/// Ties go to the candidate leaving more items unconfident, then to the smaller threshold.
/// NaN scores are never confident. Throws Error on empty input or when no score is finite.
ThresholdFit fit_threshold(std::span<const ScoredLabel> pairs, Direction direction);

/// Binarizes a score-kind signal. Throws Error for binary signals.
bool apply_threshold(const ConfidenceSignal& signal, const ThresholdFit& fit);

/// `thresholds.json`: method name -> fit. Infinite thresholds are written as "-inf"/"+inf".
void write_thresholds(const std::filesystem::path& path,
                      const std::map<std::string, ThresholdFit>& fits);
std::map<std::string, ThresholdFit> read_thresholds(const std::filesystem::path& path);

}  // namespace kbound
