#include "kbound/calibration.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <vector>

#include <nlohmann/json.hpp>

#include "kbound/error.hpp"
#include "kbound/response_cache.hpp"
#include "kbound/serialize.hpp"

namespace kbound {

bool is_confident(double score, double threshold, Direction direction) {
  return direction == Direction::kConfidentIfAtMost ? score <= threshold : score >= threshold;
}

namespace {

/// Items made confident by `threshold`, split by correctness, via binary search.
struct Counts {
  std::size_t confident_correct;
  std::size_t confident_incorrect;
};

Counts confident_counts(const std::vector<double>& correct, const std::vector<double>& incorrect,
                        double threshold, Direction direction) {
  if (direction == Direction::kConfidentIfAtMost) {
    return {static_cast<std::size_t>(
                std::upper_bound(correct.begin(), correct.end(), threshold) - correct.begin()),
            static_cast<std::size_t>(
                std::upper_bound(incorrect.begin(), incorrect.end(), threshold) -
                incorrect.begin())};
  }
  return {static_cast<std::size_t>(
              correct.end() - std::lower_bound(correct.begin(), correct.end(), threshold)),
          static_cast<std::size_t>(
              incorrect.end() - std::lower_bound(incorrect.begin(), incorrect.end(), threshold))};
}

}  // namespace

ThresholdFit fit_threshold(std::span<const ScoredLabel> pairs, Direction direction) {
  if (pairs.empty()) throw Error("fit_threshold needs at least one (score, correct) pair");

  std::vector<double> correct, incorrect, finite;
  std::size_t n_incorrect_total = 0;
  for (const auto& p : pairs) {
    if (!p.correct) ++n_incorrect_total;
    if (std::isnan(p.score)) continue;
    (p.correct ? correct : incorrect).push_back(p.score);
    if (std::isfinite(p.score)) finite.push_back(p.score);
  }
  if (finite.empty()) throw Error("fit_threshold needs at least one finite score");
  std::sort(correct.begin(), correct.end());
  std::sort(incorrect.begin(), incorrect.end());
  std::sort(finite.begin(), finite.end());
  finite.erase(std::unique(finite.begin(), finite.end()), finite.end());

  constexpr double kInf = std::numeric_limits<double>::infinity();
  std::vector<double> candidates;
  candidates.reserve(finite.size() + 1);
  candidates.push_back(-kInf);
  for (std::size_t i = 0; i + 1 < finite.size(); ++i) {
    candidates.push_back(finite[i] + (finite[i + 1] - finite[i]) / 2.0);
  }
  candidates.push_back(kInf);

  std::size_t best_aligned = 0;
  std::size_t best_confident = 0;
  double best_threshold = 0;
  bool have_best = false;
  for (double c : candidates) {
    const Counts k = confident_counts(correct, incorrect, c, direction);
    const std::size_t aligned = k.confident_correct + (n_incorrect_total - k.confident_incorrect);
    const std::size_t confident = k.confident_correct + k.confident_incorrect;
    const bool better =
        !have_best || aligned > best_aligned ||
        (aligned == best_aligned &&
         (confident < best_confident || (confident == best_confident && c < best_threshold)));
    if (better) {
      best_aligned = aligned;
      best_confident = confident;
      best_threshold = c;
      have_best = true;
    }
  }

  ThresholdFit fit;
  fit.threshold = best_threshold;
  fit.direction = direction;
  fit.n_heldout = pairs.size();
  fit.heldout_alignment = static_cast<double>(best_aligned) / static_cast<double>(pairs.size());
  return fit;
}

bool apply_threshold(const ConfidenceSignal& signal, const ThresholdFit& fit) {
  if (signal.kind != SignalKind::kScore || !signal.score_value) {
    throw Error("apply_threshold needs a score-kind signal (method '" + signal.method.name() +
                "')");
  }
  return is_confident(*signal.score_value, fit.threshold, fit.direction);
}

void write_thresholds(const std::filesystem::path& path,
                      const std::map<std::string, ThresholdFit>& fits) {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& [name, fit] : fits) j[name] = to_json(fit);
  atomic_write(path, j.dump(2) + "\n");
}

std::map<std::string, ThresholdFit> read_thresholds(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open thresholds file " + path.string());
  std::map<std::string, ThresholdFit> out;
  try {
    const auto j = nlohmann::json::parse(in);
    for (const auto& [name, v] : j.items()) out[name] = fit_from_json(v);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("malformed thresholds file " + path.string() + ": " + e.what());
  }
  return out;
}

}  // namespace kbound
