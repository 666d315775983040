#include <gtest/gtest.h>

#include <random>

#include "kbound/error.hpp"
#include "kbound/judging.hpp"
#include "kbound/mock.hpp"
#include "test_util.hpp"

using namespace kbound;
using kbound::testing::rule;
using kbound::testing::script;

namespace {

JudgeSpec spec(JudgeStrategy s) { return JudgeSpec{s, std::nullopt}; }

}  // namespace

TEST(Judging, GradeExamples) {
  EXPECT_TRUE(grade_answer("Paris", {"paris"}, spec(JudgeStrategy::kNormalized), "q"));
  EXPECT_TRUE(grade_answer("0", {"0", "zero"}, spec(JudgeStrategy::kExact), "q"));
  EXPECT_TRUE(grade_answer("The capital is Paris.", {"Paris"}, spec(JudgeStrategy::kNormalized), "q"));
  EXPECT_FALSE(grade_answer("Paris", {"paris"}, spec(JudgeStrategy::kExact), "q"));
  EXPECT_FALSE(grade_answer("Lyon", {"Paris"}, spec(JudgeStrategy::kNormalized), "q"));
  // Token runs, not substrings.
  EXPECT_FALSE(grade_answer("Parisian", {"Paris"}, spec(JudgeStrategy::kNormalized), "q"));
  EXPECT_TRUE(grade_answer("It is the New York one", {"new york"}, spec(JudgeStrategy::kNormalized), "q"));
  EXPECT_THROW(grade_answer("x", {}, spec(JudgeStrategy::kExact), "q"), DatasetError);
}

TEST(Judging, EquivalenceExamples) {
  const auto exact = spec(JudgeStrategy::kExact);
  const auto norm = spec(JudgeStrategy::kNormalized);
  EXPECT_TRUE(judge_equivalence("Paris", "Paris", "q", exact));
  EXPECT_TRUE(judge_equivalence("Paris", "It is Paris", "q", norm));
  for (const auto& s : {exact, norm}) {
    EXPECT_FALSE(judge_equivalence("Paris", "Lyon", "q", s));
    EXPECT_FALSE(judge_equivalence("Paris", "", "q", s));
    EXPECT_FALSE(judge_equivalence("Paris", "  ", "q", s));
  }
}

TEST(Judging, Normalization) {
  EXPECT_EQ(normalize_answer("  The  Eiffel\tTower!! "), "eiffel tower");
  EXPECT_EQ(normalize_answer("An apple, a day."), "apple day");
  EXPECT_EQ(normalize_answer("..."), "");
}

TEST(Judging, YesNo) {
  EXPECT_EQ(parse_yes_no("Yes."), true);
  EXPECT_EQ(parse_yes_no("  no, they differ"), false);
  EXPECT_EQ(parse_yes_no("**YES**"), true);
  EXPECT_EQ(parse_yes_no("Maybe yes"), std::nullopt);
  EXPECT_EQ(parse_yes_no(""), std::nullopt);
}

TEST(Judging, ExactImpliesNormalizedAndIdentity) {
  std::mt19937_64 rng(3);
  const std::vector<std::string> words = {"the", "Paris", "paris", "a", "Lyon", "x", "!", ",", " ", "An"};
  auto draw = [&] {
    std::string s;
    const int n = static_cast<int>(rng() % 5);
    for (int i = 0; i < n; ++i) s += words[rng() % words.size()] + (rng() % 2 ? " " : "");
    return s;
  };
  const auto exact = spec(JudgeStrategy::kExact);
  const auto norm = spec(JudgeStrategy::kNormalized);
  for (int i = 0; i < 2000; ++i) {
    const std::string a = draw();
    const std::vector<std::string> gold = {draw(), draw()};
    if (grade_answer(a, gold, exact, "q")) EXPECT_TRUE(grade_answer(a, gold, norm, "q")) << a;
    const std::string b = draw();
    if (judge_equivalence(a, b, "q", exact)) EXPECT_TRUE(judge_equivalence(a, b, "q", norm));
    if (a.find_first_not_of(' ') != std::string::npos) {
      EXPECT_TRUE(judge_equivalence(a, a, "q", exact)) << a;
      EXPECT_TRUE(judge_equivalence(a, a, "q", norm)) << a;
    }
    EXPECT_EQ(grade_answer(a, gold, norm, "q"), grade_answer(a, gold, norm, "q"));
  }
}

TEST(Judging, LlmJudgeViaGateway) {
  Gateway gw;
  MockScript s = script({
      rule({"Answer A: Paris", "Answer B: It is Paris"}, {{"Yes", 1, {}}}),
      rule({"Answer A: Paris", "Answer B: Lyon"}, {{"No, different cities.", 1, {}}}),
      rule({"Answer A: Paris", "Answer B: ???"}, {{"I am not sure", 1, {}}}),
  });
  s.fallback = "yes";
  JudgeSpec js{JudgeStrategy::kLlm, mock_endpoint(gw, "judge", s, 0)};
  Judge judge(js, &gw);
  EXPECT_TRUE(judge.judge_equivalence("Paris", "It is Paris", "capital?"));
  EXPECT_FALSE(judge.judge_equivalence("Paris", "Lyon", "capital?"));
  const auto before = gw.backend_calls();
  EXPECT_THROW(judge.judge_equivalence("Paris", "???", "capital?"), JudgingError);
  EXPECT_EQ(gw.backend_calls() - before, 2u);  // one retry
  EXPECT_TRUE(judge.grade_answer("Paris", {"Paris"}, "capital?"));
}

TEST(Judging, LlmNeedsEndpointAndGateway) {
  EXPECT_THROW(Judge(spec(JudgeStrategy::kLlm)), ConfigError);
  Gateway gw;
  JudgeSpec js{JudgeStrategy::kLlm, mock_endpoint(gw, "j", script({rule({"x"}, {{"yes", 1, {}}})}), 0)};
  EXPECT_THROW(Judge(js, nullptr), ConfigError);
  EXPECT_EQ(parse_judge_strategy("llm"), JudgeStrategy::kLlm);
  EXPECT_THROW(parse_judge_strategy("fuzzy"), ConfigError);
}
