#pragma once

// Writes small on-disk runs (dataset, images, mock scripts, run.toml) for runner-level tests.

#include <cstdio>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "kbound/dataset.hpp"
#include "kbound/image.hpp"
#include "kbound/mock.hpp"
#include "test_util.hpp"

namespace kbound::testing {

struct ScenarioRecord {
  std::string id;
  std::string gold;
  /// Greedy answer, without a confidence keyword.
  std::string answer;
  bool says_certain = true;
  /// Reply to the second-turn verbalized prompts.
  std::string second_turn = "certain";
  std::string probability = "0.9";
  /// Sampled call k answers samples[k % size]. Must contain `answer`; empty means always `answer`.
  std::vector<std::string> samples;
  std::optional<std::vector<double>> logprobs;
  /// Answer in the text-only modality; defaults to `answer`.
  std::optional<std::string> qa_answer;
  std::optional<Split> split;

  std::string question() const { return "For item " + id + ", what color is the shape?"; }
  std::string qa_question() const { return "Object " + id + " is painted " + gold + ". Name its color."; }
};

struct ScenarioOptions {
  std::string methods = "\"all\"";
  std::string modality = "vqa";
  double heldout_fraction = 0.3;
  bool with_images = true;
  /// Subject reply when no rule matches (image_only requests carry no question text).
  std::optional<std::string> fallback;
  /// Appended verbatim before the [roles] table.
  std::string extra;
};

inline nlohmann::json scenario_rules(const std::string& q, const std::string& answer,
                                     const ScenarioRecord& r) {
  using nlohmann::json;
  auto ans = [](const std::string& text, double p,
                const std::optional<std::vector<double>>& lp = std::nullopt) {
    json a = {{"text", text}, {"p", p}};
    if (lp) a["logprobs"] = *lp;
    return a;
  };
  std::string listing = "[";
  for (int k = 1; k <= 10; ++k) {
    listing += (k > 1 ? "," : "") + std::to_string(k) + ".\"" + q + " Variant " + std::to_string(k) + ".\"";
  }
  listing += "]";
  json pool = json::array();
  bool cycle = false;
  if (r.samples.empty() || q != r.question()) {
    pool.push_back(ans(answer, 1.0, r.logprobs));
  } else {
    // Cycle over the samples; the greedy call takes the heaviest entry, i.e. `answer`.
    cycle = true;
    bool marked = false;
    for (const auto& text : r.samples) {
      const bool mode = !marked && text == answer;
      marked = marked || mode;
      pool.push_back(ans(text, mode ? 2.0 : 1.0, mode ? r.logprobs : std::nullopt));
    }
  }
  return json::array({
      {{"contains", {"Semantically equivalent questions", q}}, {"answers", {listing}}},
      {{"contains", {"\"certain\" after the answer", q}},
       {"answers", {answer + (r.says_certain ? ". Certain" : ". Uncertain")}}},
      {{"contains", {"ONLY the probability"}}, {"context", {q}}, {"answers", {r.probability}}},
      {{"contains", {"previous answer"}}, {"context", {q}}, {"answers", {r.second_turn}}},
      {{"contains", {"think your answer is right"}}, {"context", {q}}, {"answers", {r.second_turn}}},
      {{"contains", {q}}, {"answers", pool}, {"cycle", cycle}},
  });
}

/// Writes dataset.jsonl, images/, mock_*.json and run.toml under `dir`; returns the config path.
inline std::filesystem::path write_scenario(const std::filesystem::path& dir,
                                            const std::vector<ScenarioRecord>& records,
                                            const ScenarioOptions& opt = {}) {
  using nlohmann::json;
  std::vector<QueryRecord> qs;
  json subject = json::array();
  json others = json::array();
  std::size_t i = 0;
  for (const auto& r : records) {
    QueryRecord q;
    q.id = r.id;
    q.dataset_id = "synthetic";
    q.question_text = r.question();
    q.qa_text = r.qa_question();
    q.gold_answers = {r.gold};
    q.split = r.split;
    if (opt.with_images) {
      const auto path = dir / "images" / (r.id + ".png");
      std::filesystem::create_directories(path.parent_path());
      write_png(path, ImageBuffer::filled(8, 8, 3, static_cast<float>(++i % 97) / 97.0f));
      q.image_ref = path.string();
    }
    qs.push_back(std::move(q));
    for (auto& j : scenario_rules(r.question(), r.answer, r)) subject.push_back(j);
    for (auto& j : scenario_rules(r.qa_question(), r.qa_answer.value_or(r.answer), r)) subject.push_back(j);
    json pool = json::array();
    if (r.samples.empty()) {
      pool.push_back(r.answer);
    } else {
      for (const auto& s : r.samples) pool.push_back(s);
    }
    others.push_back({{"contains", {r.question()}}, {"answers", pool}, {"cycle", true}});
    others.push_back({{"contains", {r.qa_question()}}, {"answers", {r.qa_answer.value_or(r.answer)}}});
  }
  write_dataset(dir / "dataset.jsonl", qs);
  json subject_script = {{"seed", 5}, {"rules", subject}};
  if (opt.fallback) subject_script["fallback"] = *opt.fallback;
  write_file(dir / "mock_subject.json", subject_script.dump(1));
  write_file(dir / "mock_other_a.json", json({{"seed", 6}, {"rules", others}}).dump(1));
  write_file(dir / "mock_other_b.json", json({{"seed", 7}, {"rules", others}}).dump(1));

  char heldout[32];
  std::snprintf(heldout, sizeof heldout, "%.6g", opt.heldout_fraction);
  std::string toml = "dataset = \"dataset.jsonl\"\nmodality = \"" + opt.modality + "\"\nmethods = " +
                     opt.methods + "\nheldout_fraction = " + heldout +
                     "\nseed = 0\nconcurrency = 4\ncache_dir = \"cache\"\noutput_dir = \"out\"\n" +
                     opt.extra +
                     "\n[roles]\nsubject = \"subject\"\nrephraser = \"subject\"\n"
                     "cross_model = [\"other_a\", \"other_b\"]\n\n[judge]\nstrategy = \"normalized\"\n";
  for (const char* name : {"subject", "other_a", "other_b"}) {
    toml += std::string("\n[[endpoint]]\nname = \"") + name + "\"\nbase_url = \"mock://" + name +
            "\"\nmodel_id = \"mock-" + name + "\"\nsupports_images = " + (opt.with_images ? "true" : "false") +
            "\nsupports_logprobs = true\nmock_script = \"mock_" + name + ".json\"\n";
  }
  write_file(dir / "run.toml", toml);
  return dir / "run.toml";
}

}  // namespace kbound::testing
