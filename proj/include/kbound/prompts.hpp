#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "kbound/gateway.hpp"
#include "kbound/types.hpp"

namespace kbound::prompts {

enum class Turn { kFirst, kSecond };

/// A stored prompt. `key` is the catalog name; placeholders are written in square brackets.
struct PromptTemplate {
  std::string_view key;
  Turn turn;
  std::string_view text;
};

inline constexpr std::string_view kQuestionSlot = "[Question]";
inline constexpr std::string_view kRephraseCountSlot = "[number of semantical equivalent questions]";
inline constexpr std::string_view kRephraseQuestionSlot = "[The original question]";

/// Every template in catalog order.
const std::vector<PromptTemplate>& catalog();
const PromptTemplate& find(std::string_view key);

/// Replaces each `{slot, value}` placeholder occurrence in one left-to-right pass, so inserted
/// values are never rescanned.
std::string fill(std::string_view tmpl,
                 const std::vector<std::pair<std::string_view, std::string_view>>& slots);

/// One user message for a single-step method (vanilla, cot, img_cot, punish, explain).
Messages render_single(Variant variant, std::string_view question);

/// The plain first-round answer prompt, shared by double-step, perplexity and sampling methods.
Messages render_first_round(std::string_view question);

/// user / assistant / user dialogue for a double-step method
/// (self_jud, cot, challenge, punish, prob_thr).
Messages render_double(Variant variant, std::string_view question, std::string_view first_answer);

Messages render_rephrase_request(std::string_view question, int n);

std::string render_equivalence_judge(std::string_view question, std::string_view reference,
                                     std::string_view candidate);
std::string render_grading_judge(std::string_view question, std::string_view answer,
                                 const std::vector<std::string>& gold);

/// Human-readable catalog (TOML, multi-line literal strings).
std::string catalog_toml();

}  // namespace kbound::prompts
