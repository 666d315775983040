#include "kbound/judging.hpp"

#include <algorithm>
#include <cctype>
#include <sstream>

#include "kbound/error.hpp"
#include "kbound/prompts.hpp"

namespace kbound {

std::string_view to_string(JudgeStrategy s) {
  switch (s) {
    case JudgeStrategy::kExact: return "exact";
    case JudgeStrategy::kNormalized: return "normalized";
    case JudgeStrategy::kLlm: return "llm";
  }
  return "?";
}

JudgeStrategy parse_judge_strategy(std::string_view s) {
  if (s == "exact") return JudgeStrategy::kExact;
  if (s == "normalized") return JudgeStrategy::kNormalized;
  if (s == "llm") return JudgeStrategy::kLlm;
  throw ConfigError("unknown judge strategy '" + std::string(s) + "'");
}

void JudgeSpec::validate() const {
  if (strategy == JudgeStrategy::kLlm && !judge_endpoint) {
    throw ConfigError("the llm judge strategy requires a judge endpoint");
  }
}

namespace {

std::vector<std::string> tokens(std::string_view text) {
  std::string cleaned;
  cleaned.reserve(text.size());
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (std::ispunct(c)) continue;
    cleaned.push_back(std::isspace(c) ? ' ' : static_cast<char>(std::tolower(c)));
  }
  std::vector<std::string> out;
  std::istringstream in(cleaned);
  for (std::string w; in >> w;) {
    if (w == "a" || w == "an" || w == "the") continue;
    out.push_back(std::move(w));
  }
  return out;
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

/// Normalized match: equal token sequences, or gold appears as a contiguous token run.
bool normalized_match(std::string_view answer, std::string_view gold) {
  const auto a = tokens(answer);
  const auto g = tokens(gold);
  if (g.empty()) return a.empty();
  return std::search(a.begin(), a.end(), g.begin(), g.end()) != a.end();
}

}  // namespace

std::string normalize_answer(std::string_view text) {
  std::string out;
  for (const auto& t : tokens(text)) out += (out.empty() ? "" : " ") + t;
  return out;
}

std::optional<bool> parse_yes_no(std::string_view reply) {
  std::string word;
  for (char ch : reply) {
    const auto c = static_cast<unsigned char>(ch);
    if (std::isalpha(c)) {
      word.push_back(static_cast<char>(std::tolower(c)));
    } else if (!word.empty()) {
      break;
    }
  }
  if (word == "yes") return true;
  if (word == "no") return false;
  return std::nullopt;
}

Judge::Judge(JudgeSpec spec, Gateway* gateway, SamplingParams params)
    : spec_(std::move(spec)), gateway_(gateway), params_(params) {
  spec_.validate();
  if (spec_.strategy == JudgeStrategy::kLlm && gateway_ == nullptr) {
    throw ConfigError("the llm judge strategy requires a gateway");
  }
}

bool Judge::ask(const std::string& prompt) const {
  const Messages msgs{Message{"user", prompt, {}}};
  std::string last;
  for (int attempt = 0; attempt < 2; ++attempt) {
    const Transcript t = gateway_->complete(*spec_.judge_endpoint, msgs, params_, false, attempt);
    if (auto verdict = parse_yes_no(t.response_text)) return *verdict;
    last = t.response_text;
  }
  throw JudgingError("judge reply is neither yes nor no: '" + last.substr(0, 200) + "'");
}

bool Judge::grade_answer(std::string_view answer, const std::vector<std::string>& gold,
                         std::string_view question) const {
  if (gold.empty()) throw DatasetError("grade_answer needs at least one gold answer");
  switch (spec_.strategy) {
    case JudgeStrategy::kExact: {
      const std::string a = trim(answer);
      return std::any_of(gold.begin(), gold.end(), [&](const auto& g) { return trim(g) == a; });
    }
    case JudgeStrategy::kNormalized:
      return std::any_of(gold.begin(), gold.end(),
                         [&](const auto& g) { return normalized_match(answer, g); });
    case JudgeStrategy::kLlm:
      return ask(prompts::render_grading_judge(question, answer, gold));
  }
  return false;
}

bool Judge::judge_equivalence(std::string_view reference, std::string_view candidate,
                              std::string_view question) const {
  if (trim(candidate).empty()) return false;
  switch (spec_.strategy) {
    case JudgeStrategy::kExact:
      return trim(reference) == trim(candidate);
    case JudgeStrategy::kNormalized:
      return normalized_match(candidate, reference);
    case JudgeStrategy::kLlm:
      return ask(prompts::render_equivalence_judge(question, reference, candidate));
  }
  return false;
}

bool grade_answer(std::string_view answer, const std::vector<std::string>& gold,
                  const JudgeSpec& judge, std::string_view question, Gateway* gateway) {
  return Judge(judge, gateway).grade_answer(answer, gold, question);
}

bool judge_equivalence(std::string_view reference, std::string_view candidate,
                       std::string_view question, const JudgeSpec& judge, Gateway* gateway) {
  return Judge(judge, gateway).judge_equivalence(reference, candidate, question);
}

}  // namespace kbound
