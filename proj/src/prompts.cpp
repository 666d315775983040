#include "kbound/prompts.hpp"

#include <algorithm>

#include "kbound/error.hpp"

namespace kbound::prompts {
namespace {

constexpr std::string_view kVanilla =
    "Answer the question based on your internal knowledge and the image. If you are sure the "
    "answer is accurate and correct, please say \"certain\" after the answer. If you are not "
    "confident with the answer, please say \"uncertain\".\n"
    "Question: [Question]\n"
    "Answer:";

constexpr std::string_view kCot =
    "Answer the question based on your internal knowledge and the image. Analyse step by step. "
    "If you are sure the answer is accurate and correct, please say \"certain\" after the answer. "
    "If you are not confident with the answer, please say \"uncertain\".\n"
    "Question: [Question]\n"
    "Answer:";

constexpr std::string_view kImgCot =
    "Answer the question based on your internal knowledge and the image. First, describe the "
    "image, then analyse step by step. If you are sure the answer is accurate and correct, please "
    "say \"certain\" after the answer. If you are not confident with the answer, please say "
    "\"uncertain\".\n"
    "Question: [Question]\n"
    "Answer:";

constexpr std::string_view kPunish =
    "Answer the question based on your internal knowledge and the image. If you are sure the "
    "answer is accurate and correct, please say \"certain\" after the answer. If you are not "
    "confident with the answer, please say \"uncertain\". You will be punished if the answer is "
    "not right but you say \"certain\".\n"
    "Question: [Question]\n"
    "Answer:";

constexpr std::string_view kExplain =
    "Answer the question based on your internal knowledge and the image, explain why you give "
    "this answer. If you are sure the answer is accurate and correct, please say \"certain\" after "
    "the answer. If you are not confident with the answer, please say \"uncertain\".\n"
    "Question: [Question]\n"
    "Answer:";

constexpr std::string_view kFirstRound =
    "Answer the question based on your internal knowledge and the image.\n"
    "Question: [Question]\n"
    "Answer:";

constexpr std::string_view kSelfJudging =
    "If you are sure your previous answer is accurate and correct, please say \"certain\", If you "
    "are not confident with the answer, please say \"uncertain\".";

constexpr std::string_view kDoubleCot =
    "If you are sure your previous answer is accurate and correct, please say \"certain\", If you "
    "are not confident with the answer, please say \"uncertain\". Analyse step by step, then "
    "provide Your judgement.";

constexpr std::string_view kChallenge =
    "I don't think your answer is right, if you still think your answer is right, please say "
    "\"ceratin\". Otherwise, say \"uncertain\".";

constexpr std::string_view kDoublePunish =
    "If you are sure your previous answer is accurate and correct, please say \"certain\", If you "
    "are not confident with the answer, please say \"uncertain\". You will be punished if the "
    "answer is not right but you say \"certain\".";

constexpr std::string_view kProbThr =
    "Provide the probability that your answer is correct (0.0 to 1.0). Give ONLY the probability, "
    "no other words or explanation.";

constexpr std::string_view kRephrase =
    "Based on the Following question, generate [number of semantical equivalent questions] "
    "semantically equivalent questions. your output should be a list of strings and add a sequnce "
    "number with a dot at the start of each output question, like "
    "[1.\"question1\",2.\"question2\",...].\n"
    "Question: [The original question]\n"
    "Semantically equivalent questions:";

constexpr std::string_view kEquivalenceJudge =
    "Question: [Question]\n"
    "Answer A: [Reference]\n"
    "Answer B: [Candidate]\n"
    "Do A and B convey the same answer to the question? Reply only yes or no.";

constexpr std::string_view kGradingJudge =
    "Question: [Question]\n"
    "Reference answers: [Gold]\n"
    "Candidate answer: [Answer]\n"
    "Does the candidate answer match any of the reference answers? Reply only yes or no.";

std::string_view single_key(Variant v) {
  switch (v) {
    case Variant::kVanilla: return "vanilla";
    case Variant::kCot: return "cot";
    case Variant::kImgCot: return "img_cot";
    case Variant::kPunish: return "punish";
    case Variant::kExplain: return "explain";
    default:
      throw ConfigError("variant '" + std::string(to_string(v)) + "' has no single-step prompt");
  }
}

std::string_view second_key(Variant v) {
  switch (v) {
    case Variant::kSelfJud: return "self_jud";
    case Variant::kCot: return "double_cot";
    case Variant::kChallenge: return "challenge";
    case Variant::kPunish: return "double_punish";
    case Variant::kProbThr: return "prob_thr";
    default:
      throw ConfigError("variant '" + std::string(to_string(v)) + "' has no double-step prompt");
  }
}

}  // namespace

const std::vector<PromptTemplate>& catalog() {
  static const std::vector<PromptTemplate> kCatalog = {
      {"vanilla", Turn::kFirst, kVanilla},
      {"cot", Turn::kFirst, kCot},
      {"img_cot", Turn::kFirst, kImgCot},
      {"punish", Turn::kFirst, kPunish},
      {"explain", Turn::kFirst, kExplain},
      {"first_round", Turn::kFirst, kFirstRound},
      {"self_jud", Turn::kSecond, kSelfJudging},
      {"double_cot", Turn::kSecond, kDoubleCot},
      {"challenge", Turn::kSecond, kChallenge},
      {"double_punish", Turn::kSecond, kDoublePunish},
      {"prob_thr", Turn::kSecond, kProbThr},
      {"rephrase", Turn::kFirst, kRephrase},
      {"equivalence_judge", Turn::kFirst, kEquivalenceJudge},
      {"grading_judge", Turn::kFirst, kGradingJudge},
  };
  return kCatalog;
}

const PromptTemplate& find(std::string_view key) {
  for (const auto& t : catalog()) {
    if (t.key == key) return t;
  }
  throw ConfigError("no prompt template named '" + std::string(key) + "'");
}

std::string fill(std::string_view tmpl,
                 const std::vector<std::pair<std::string_view, std::string_view>>& slots) {
  std::string out;
  std::size_t pos = 0;
  while (pos < tmpl.size()) {
    std::size_t best = std::string_view::npos;
    const std::pair<std::string_view, std::string_view>* hit = nullptr;
    for (const auto& s : slots) {
      const std::size_t at = tmpl.find(s.first, pos);
      if (at < best) {
        best = at;
        hit = &s;
      }
    }
    if (hit == nullptr) {
      out.append(tmpl.substr(pos));
      break;
    }
    out.append(tmpl.substr(pos, best - pos));
    out.append(hit->second);
    pos = best + hit->first.size();
  }
  return out;
}

Messages render_single(Variant variant, std::string_view question) {
  const auto& t = find(single_key(variant));
  return {Message{"user", fill(t.text, {{kQuestionSlot, question}}), {}}};
}

Messages render_first_round(std::string_view question) {
  return {Message{"user", fill(kFirstRound, {{kQuestionSlot, question}}), {}}};
}

Messages render_double(Variant variant, std::string_view question, std::string_view first_answer) {
  const auto& second = find(second_key(variant));
  Messages m = render_first_round(question);
  m.push_back(Message{"assistant", std::string(first_answer), {}});
  m.push_back(Message{"user", std::string(second.text), {}});
  return m;
}

Messages render_rephrase_request(std::string_view question, int n) {
  if (n < 1) throw ConfigError("rephrase count must be >= 1");
  const std::string count = std::to_string(n);
  return {Message{"user",
                  fill(kRephrase, {{kRephraseCountSlot, count}, {kRephraseQuestionSlot, question}}),
                  {}}};
}

std::string render_equivalence_judge(std::string_view question, std::string_view reference,
                                     std::string_view candidate) {
  return fill(kEquivalenceJudge,
              {{kQuestionSlot, question}, {"[Reference]", reference}, {"[Candidate]", candidate}});
}

std::string render_grading_judge(std::string_view question, std::string_view answer,
                                 const std::vector<std::string>& gold) {
  std::string joined;
  for (const auto& g : gold) joined += (joined.empty() ? "" : " | ") + g;
  return fill(kGradingJudge, {{kQuestionSlot, question}, {"[Gold]", joined}, {"[Answer]", answer}});
}

std::string catalog_toml() {
  std::string out =
      "# Prompt templates, one table per template. Placeholders are written in square brackets.\n";
  for (const auto& t : catalog()) {
    out += "\n[" + std::string(t.key) + "]\n";
    out += std::string("turn = \"") + (t.turn == Turn::kFirst ? "first" : "second") + "\"\n";
    out += "text = '''\n" + std::string(t.text) + "'''\n";
  }
  return out;
}

}  // namespace kbound::prompts
