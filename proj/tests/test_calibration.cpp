#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "kbound/calibration.hpp"
#include "kbound/error.hpp"
#include "test_util.hpp"

using namespace kbound;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct Brute {
  double threshold;
  std::size_t aligned;
};

// Exhaustive search written directly from the rule: candidates are -inf, midpoints between
// adjacent distinct finite scores, +inf.
Brute brute_force(const std::vector<ScoredLabel>& pairs, Direction dir) {
  std::vector<double> finite;
  for (const auto& p : pairs) {
    if (std::isfinite(p.score)) finite.push_back(p.score);
  }
  std::sort(finite.begin(), finite.end());
  finite.erase(std::unique(finite.begin(), finite.end()), finite.end());
  std::vector<double> cands{-kInf};
  for (std::size_t i = 0; i + 1 < finite.size(); ++i) {
    cands.push_back(finite[i] + (finite[i + 1] - finite[i]) / 2);
  }
  cands.push_back(kInf);

  Brute best{0, 0};
  std::size_t best_confident = 0;
  bool first = true;
  for (double c : cands) {
    std::size_t aligned = 0;
    std::size_t confident = 0;
    for (const auto& p : pairs) {
      bool conf = false;
      if (!std::isnan(p.score)) conf = dir == Direction::kConfidentIfAtMost ? p.score <= c : p.score >= c;
      confident += conf;
      aligned += conf == p.correct;
    }
    const bool better = first || aligned > best.aligned ||
                        (aligned == best.aligned && confident < best_confident);
    if (better) {
      best = {c, aligned};
      best_confident = confident;
      first = false;
    }
  }
  return best;
}

std::vector<ScoredLabel> random_pairs(std::mt19937_64& rng, std::size_t n, bool integer_scores) {
  std::uniform_real_distribution<double> real(0.0, 10.0);
  std::uniform_int_distribution<int> integer(0, 10);
  std::bernoulli_distribution coin(0.5);
  std::vector<ScoredLabel> out(n);
  for (auto& p : out) {
    p.score = integer_scores ? integer(rng) : real(rng);
    p.correct = coin(rng);
  }
  return out;
}

}  // namespace

TEST(Fit, SeparablePerplexity) {
  const std::vector<ScoredLabel> pairs{{1, true}, {2, true}, {3, false}, {4, false}};
  const auto f = fit_threshold(pairs, Direction::kConfidentIfAtMost);
  EXPECT_DOUBLE_EQ(f.threshold, 2.5);
  EXPECT_DOUBLE_EQ(f.heldout_alignment, 1.0);
  EXPECT_EQ(f.n_heldout, 4u);
  EXPECT_EQ(f.direction, Direction::kConfidentIfAtMost);
}

TEST(Fit, AllCorrectConsistencyGoesToMinusInfinity) {
  const std::vector<ScoredLabel> pairs{{3, true}, {7, true}, {10, true}};
  const auto f = fit_threshold(pairs, Direction::kConfidentIfAtLeast);
  EXPECT_EQ(f.threshold, -kInf);
  EXPECT_DOUBLE_EQ(f.heldout_alignment, 1.0);
}

TEST(Fit, TieBreaksTowardUnconfident) {
  // Confident-all and unconfident-all both align 1 of 2; the fit must pick unconfident-all.
  const std::vector<ScoredLabel> pairs{{5, true}, {5, false}};
  const auto f = fit_threshold(pairs, Direction::kConfidentIfAtLeast);
  EXPECT_EQ(f.threshold, kInf);
  EXPECT_DOUBLE_EQ(f.heldout_alignment, 0.5);
}

TEST(Fit, MatchesBruteForceOracle) {
  std::mt19937_64 rng(20240601);
  for (int trial = 0; trial < 500; ++trial) {
    const std::size_t n = 1 + rng() % 20;
    const auto pairs = random_pairs(rng, n, trial % 2 == 0);
    for (Direction dir : {Direction::kConfidentIfAtMost, Direction::kConfidentIfAtLeast}) {
      const auto f = fit_threshold(pairs, dir);
      const auto b = brute_force(pairs, dir);
      ASSERT_EQ(f.threshold, b.threshold) << "trial " << trial;
      ASSERT_DOUBLE_EQ(f.heldout_alignment, static_cast<double>(b.aligned) / n);
    }
  }
}

TEST(Fit, NanIsNeverConfident) {
  const double nan = std::numeric_limits<double>::quiet_NaN();
  const std::vector<ScoredLabel> pairs{{nan, false}, {1, true}, {2, false}};
  const auto f = fit_threshold(pairs, Direction::kConfidentIfAtMost);
  EXPECT_DOUBLE_EQ(f.heldout_alignment, 1.0);
  EXPECT_FALSE(is_confident(nan, kInf, Direction::kConfidentIfAtMost));
  EXPECT_FALSE(is_confident(nan, -kInf, Direction::kConfidentIfAtLeast));
}

TEST(Fit, BeatsTrivialPolicies) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 200; ++trial) {
    const auto pairs = random_pairs(rng, 1 + rng() % 30, false);
    const auto f = fit_threshold(pairs, Direction::kConfidentIfAtLeast);
    const double n = static_cast<double>(pairs.size());
    const double n_correct = static_cast<double>(
        std::count_if(pairs.begin(), pairs.end(), [](const auto& p) { return p.correct; }));
    EXPECT_GE(f.heldout_alignment, n_correct / n);
    EXPECT_GE(f.heldout_alignment, (n - n_correct) / n);
  }
}

TEST(Fit, RelabelingCorrectAsIncorrectNeverHelpsConfidentSide) {
  // With all items confident-capable, turning a correct item incorrect cannot raise the best
  // alignment above the original best + 1/N (it changes one label).
  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 200; ++trial) {
    auto pairs = random_pairs(rng, 2 + rng() % 20, true);
    const auto before = fit_threshold(pairs, Direction::kConfidentIfAtLeast);
    auto it = std::find_if(pairs.begin(), pairs.end(), [](const auto& p) { return p.correct; });
    if (it == pairs.end()) continue;
    it->correct = false;
    const auto after = fit_threshold(pairs, Direction::kConfidentIfAtLeast);
    EXPECT_LE(after.heldout_alignment, before.heldout_alignment + 1.0 / pairs.size() + 1e-12);
  }
}

TEST(Fit, Errors) {
  EXPECT_THROW(fit_threshold({}, Direction::kConfidentIfAtMost), Error);
  const std::vector<ScoredLabel> only_nan{{std::numeric_limits<double>::quiet_NaN(), true}};
  EXPECT_THROW(fit_threshold(only_nan, Direction::kConfidentIfAtMost), Error);
}

namespace {
ConfidenceSignal score_signal(const char* method, double v) {
  ConfidenceSignal s;
  s.method = parse_method(method);
  s.kind = SignalKind::kScore;
  s.score_value = v;
  return s;
}
}  // namespace

TEST(Apply, Examples) {
  EXPECT_TRUE(apply_threshold(score_signal("ppl_thr", 1.2), {2.5, Direction::kConfidentIfAtMost, 1, 4}));
  EXPECT_FALSE(apply_threshold(score_signal("random", 7), {8, Direction::kConfidentIfAtLeast, 1, 4}));
  EXPECT_TRUE(apply_threshold(score_signal("random", 8), {8, Direction::kConfidentIfAtLeast, 1, 4}));
  EXPECT_TRUE(apply_threshold(score_signal("ppl_thr", 2.5), {2.5, Direction::kConfidentIfAtMost, 1, 4}));

  ConfidenceSignal b;
  b.method = parse_method("vanilla");
  b.binary_value = true;
  EXPECT_THROW(apply_threshold(b, {0, Direction::kConfidentIfAtLeast, 1, 1}), Error);
}

TEST(Apply, MonotoneInScore) {
  const ThresholdFit at_least{5, Direction::kConfidentIfAtLeast, 1, 1};
  const ThresholdFit at_most{5, Direction::kConfidentIfAtMost, 1, 1};
  bool prev_least = false;
  bool prev_most = true;
  for (int s = 0; s <= 10; ++s) {
    const bool l = apply_threshold(score_signal("random", s), at_least);
    const bool m = apply_threshold(score_signal("random", s), at_most);
    EXPECT_GE(l, prev_least);
    EXPECT_LE(m, prev_most);
    prev_least = l;
    prev_most = m;
  }
}

TEST(Thresholds, FileRoundTripWithInfinities) {
  kbound::testing::TempDir dir;
  const std::map<std::string, ThresholdFit> fits{
      {"a", {2.5, Direction::kConfidentIfAtMost, 0.75, 20}},
      {"b", {-kInf, Direction::kConfidentIfAtLeast, 1.0, 3}},
      {"c", {kInf, Direction::kConfidentIfAtLeast, 0.5, 2}},
      {"d", {0.1 + 0.2, Direction::kConfidentIfAtLeast, 2.0 / 3.0, 3}},
  };
  write_thresholds(dir / "t.json", fits);
  EXPECT_EQ(read_thresholds(dir / "t.json"), fits);
}
