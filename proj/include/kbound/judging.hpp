#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "kbound/gateway.hpp"

namespace kbound {

enum class JudgeStrategy { kExact, kNormalized, kLlm };

std::string_view to_string(JudgeStrategy s);
JudgeStrategy parse_judge_strategy(std::string_view s);

struct JudgeSpec {
  JudgeStrategy strategy = JudgeStrategy::kNormalized;
  std::optional<EndpointSpec> judge_endpoint;

  void validate() const;
};

/// Lowercase, drop ASCII punctuation and the articles a/an/the, collapse whitespace.
std::string normalize_answer(std::string_view text);

/// First word of a judge reply, case-insensitive: yes -> true, no -> false.
std::optional<bool> parse_yes_no(std::string_view reply);

/// Correctness and equivalence decisions. The llm strategy needs a gateway; exact and
/// normalized are pure.
class Judge {
 public:
  explicit Judge(JudgeSpec spec, Gateway* gateway = nullptr, SamplingParams params = {});

  bool grade_answer(std::string_view answer, const std::vector<std::string>& gold,
                    std::string_view question) const;
  bool judge_equivalence(std::string_view reference, std::string_view candidate,
                         std::string_view question) const;

  const JudgeSpec& spec() const { return spec_; }

 private:
  bool ask(const std::string& prompt) const;

  JudgeSpec spec_;
  Gateway* gateway_;
  SamplingParams params_;
};

bool grade_answer(std::string_view answer, const std::vector<std::string>& gold,
                  const JudgeSpec& judge, std::string_view question, Gateway* gateway = nullptr);

bool judge_equivalence(std::string_view reference, std::string_view candidate,
                       std::string_view question, const JudgeSpec& judge,
                       Gateway* gateway = nullptr);

}  // namespace kbound
