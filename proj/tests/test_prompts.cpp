#include <gtest/gtest.h>

#include <toml.hpp>

#include "kbound/error.hpp"
#include "kbound/prompts.hpp"
#include "test_util.hpp"

using namespace kbound;
using kbound::testing::read_file;

namespace {

const std::string kQ = "How many humans have landed on this planet?";
const std::filesystem::path kGolden = std::filesystem::path(KBOUND_SOURCE_DIR) / "tests/golden";

std::string golden(const std::string& key) { return read_file(kGolden / (key + ".txt")); }

}  // namespace

TEST(Golden, SingleStep) {
  EXPECT_EQ(prompts::render_single(Variant::kVanilla, kQ).at(0).text, golden("vanilla"));
  EXPECT_EQ(prompts::render_single(Variant::kCot, kQ).at(0).text, golden("cot"));
  EXPECT_EQ(prompts::render_single(Variant::kImgCot, kQ).at(0).text, golden("img_cot"));
  EXPECT_EQ(prompts::render_single(Variant::kPunish, kQ).at(0).text, golden("punish"));
  EXPECT_EQ(prompts::render_single(Variant::kExplain, kQ).at(0).text, golden("explain"));
  EXPECT_EQ(prompts::render_first_round(kQ).at(0).text, golden("first_round"));
}

TEST(Golden, DoubleStep) {
  const std::pair<Variant, const char*> cases[] = {
      {Variant::kSelfJud, "self_jud"},   {Variant::kCot, "double_cot"},
      {Variant::kChallenge, "challenge"}, {Variant::kPunish, "double_punish"},
      {Variant::kProbThr, "prob_thr"}};
  for (const auto& [v, key] : cases) {
    const auto msgs = prompts::render_double(v, kQ, "Zero.");
    ASSERT_EQ(msgs.size(), 3u);
    EXPECT_EQ(msgs[0].role, "user");
    EXPECT_EQ(msgs[0].text, golden("first_round"));
    EXPECT_EQ(msgs[1].role, "assistant");
    EXPECT_EQ(msgs[1].text, "Zero.");
    EXPECT_EQ(msgs[2].role, "user");
    EXPECT_EQ(msgs[2].text, golden(key)) << key;
  }
}

TEST(Golden, RephraseAndJudge) {
  EXPECT_EQ(prompts::render_rephrase_request(kQ, 10).at(0).text, golden("rephrase"));
  EXPECT_EQ(prompts::render_equivalence_judge(kQ, "None", "No human has landed there."),
            golden("equivalence_judge"));
}

TEST(Render, SingleStepExamples) {
  const auto v = prompts::render_single(Variant::kVanilla, "Q?");
  ASSERT_EQ(v.size(), 1u);
  EXPECT_EQ(v[0].role, "user");
  EXPECT_NE(v[0].text.find(R"(If you are sure the answer is accurate and correct, please say "certain")"),
            std::string::npos);
  EXPECT_NE(v[0].text.find("Question: Q?"), std::string::npos);
  EXPECT_TRUE(v[0].text.ends_with("Question: Q?\nAnswer:"));
  EXPECT_NE(prompts::render_single(Variant::kImgCot, "Q?")[0].text.find(
                "First, describe the image, then analyse step by step"),
            std::string::npos);
  EXPECT_TRUE(prompts::render_single(Variant::kCot, "")[0].text.ends_with("Question: \nAnswer:"));
  EXPECT_THROW(prompts::render_single(Variant::kSelfJud, "Q?"), Error);
  EXPECT_THROW(prompts::render_double(Variant::kVanilla, "Q?", "A"), Error);
}

TEST(Render, DoubleStepExamples) {
  EXPECT_TRUE(prompts::render_double(Variant::kChallenge, "Q?", "A.")[2].text.starts_with(
      "I don't think your answer is right"));
  EXPECT_NE(prompts::render_double(Variant::kProbThr, "Q?", "A.")[2].text.find(
                "Provide the probability that your answer is correct (0.0 to 1.0)"),
            std::string::npos);
  EXPECT_NE(prompts::render_double(Variant::kSelfJud, "Q?", "A.")[2].text.find(
                R"(please say "certain")"),
            std::string::npos);
}

TEST(Render, RephraseExamples) {
  const auto ten = prompts::render_rephrase_request("Q?", 10)[0].text;
  EXPECT_NE(ten.find("generate 10 semantically equivalent questions"), std::string::npos);
  EXPECT_NE(ten.find(R"(like [1."question1",2."question2",...])"), std::string::npos);
  EXPECT_NE(prompts::render_rephrase_request("Q?", 1)[0].text.find("generate 1 semantically"),
            std::string::npos);
  EXPECT_THROW(prompts::render_rephrase_request("Q?", 0), Error);
}

TEST(Render, StrippingQuestionRecoversTemplate) {
  for (const auto& t : prompts::catalog()) {
    if (t.text.find(prompts::kQuestionSlot) == std::string_view::npos) continue;
    if (t.key == "rephrase" || t.key == "equivalence_judge" || t.key == "grading_judge") continue;
    const std::string rendered = t.key == "first_round"
                                     ? prompts::render_first_round(kQ)[0].text
                                     : prompts::render_single(parse_variant(t.key), kQ)[0].text;
    std::string stripped = rendered;
    stripped.replace(stripped.find(kQ), kQ.size(), prompts::kQuestionSlot);
    EXPECT_EQ(stripped, t.text) << t.key;
  }
}

TEST(Render, NoUnresolvedPlaceholders) {
  std::vector<std::string> texts;
  for (Variant v : {Variant::kVanilla, Variant::kCot, Variant::kImgCot, Variant::kPunish,
                    Variant::kExplain}) {
    texts.push_back(prompts::render_single(v, kQ)[0].text);
  }
  texts.push_back(prompts::render_rephrase_request(kQ, 3)[0].text);
  texts.push_back(prompts::render_equivalence_judge(kQ, "a", "b"));
  texts.push_back(prompts::render_grading_judge(kQ, "a", {"b", "c"}));
  for (const auto& t : texts) {
    for (const char* slot : {"[Question]", "[Reference]", "[Candidate]", "[Gold]", "[Answer]",
                             "[The original question]",
                             "[number of semantical equivalent questions]"}) {
      EXPECT_EQ(t.find(slot), std::string::npos) << slot << " in " << t;
    }
  }
}

TEST(Render, FillIsSinglePass) {
  // A question that itself contains the placeholder must not be expanded again.
  const auto text = prompts::render_first_round("What does [Question] mean?")[0].text;
  EXPECT_NE(text.find("Question: What does [Question] mean?"), std::string::npos);
  EXPECT_EQ(prompts::fill("[a][b][a]", {{"[a]", "[b]"}, {"[b]", "x"}}), "[b]x[b]");
}

TEST(Catalog, ShippedFileMatchesCatalog) {
  const auto shipped = read_file(std::filesystem::path(KBOUND_SOURCE_DIR) / "data/prompts.toml");
  EXPECT_EQ(shipped, prompts::catalog_toml());
  const toml::table t = toml::parse(shipped);
  ASSERT_EQ(t.size(), prompts::catalog().size());
  for (const auto& p : prompts::catalog()) {
    const auto* entry = t[p.key].as_table();
    ASSERT_NE(entry, nullptr) << p.key;
    EXPECT_EQ((*entry)["text"].value<std::string>().value_or(""), p.text) << p.key;
    EXPECT_EQ((*entry)["turn"].value<std::string>().value_or(""),
              p.turn == prompts::Turn::kFirst ? "first" : "second");
  }
  EXPECT_THROW(prompts::find("nope"), Error);
}
