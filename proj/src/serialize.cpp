#include "kbound/serialize.hpp"

#include <cmath>
#include <limits>

#include "kbound/error.hpp"

namespace kbound {
using json = nlohmann::json;

json number_to_json(double v) {
  if (std::isnan(v)) return nullptr;
  if (std::isinf(v)) return v > 0 ? "+inf" : "-inf";
  return v;
}

double number_from_json(const json& j) {
  if (j.is_null()) return std::numeric_limits<double>::quiet_NaN();
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "+inf" || s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    throw Error("not a number: '" + s + "'");
  }
  return j.get<double>();
}

json to_json(const ThresholdFit& fit) {
  return {{"threshold", number_to_json(fit.threshold)},
          {"direction", std::string(to_string(fit.direction))},
          {"heldout_alignment", fit.heldout_alignment},
          {"n_heldout", fit.n_heldout}};
}

ThresholdFit fit_from_json(const json& j) {
  ThresholdFit f;
  f.threshold = number_from_json(j.at("threshold"));
  f.direction = parse_direction(j.at("direction").get<std::string>());
  f.heldout_alignment = j.at("heldout_alignment").get<double>();
  f.n_heldout = j.at("n_heldout").get<std::size_t>();
  return f;
}

json to_json(const ConfidenceSignal& s) {
  json j = {{"record_id", s.record_id},
            {"method", s.method.name()},
            {"answer", s.answer_text},
            {"kind", s.kind == SignalKind::kBinary ? "binary" : "score"},
            {"transcripts", s.transcripts},
            {"unparsed_confidence", s.unparsed_confidence},
            {"dropped_samples", s.dropped_samples}};
  if (s.binary_value) j["binary_value"] = *s.binary_value;
  if (s.score_value) j["score_value"] = number_to_json(*s.score_value);
  return j;
}

ConfidenceSignal signal_from_json(const json& j) {
  ConfidenceSignal s;
  s.record_id = j.at("record_id").get<std::string>();
  s.method = parse_method(j.at("method").get<std::string>());
  s.answer_text = j.at("answer").get<std::string>();
  s.kind = j.at("kind").get<std::string>() == "binary" ? SignalKind::kBinary : SignalKind::kScore;
  s.transcripts = j.value("transcripts", std::vector<std::string>{});
  s.unparsed_confidence = j.value("unparsed_confidence", false);
  s.dropped_samples = j.value("dropped_samples", 0);
  if (j.contains("binary_value")) s.binary_value = j["binary_value"].get<bool>();
  if (j.contains("score_value")) s.score_value = number_from_json(j["score_value"]);
  return s;
}

json to_json(const EvalOutcome& o) {
  return {{"record_id", o.record_id},
          {"answer", o.answer_text},
          {"correct", o.correct},
          {"confident", o.confident},
          {"cell", std::string(to_string(o.cell))}};
}

EvalOutcome outcome_from_json(const json& j) {
  EvalOutcome o = make_outcome(j.at("record_id").get<std::string>(),
                               j.at("answer").get<std::string>(), j.at("correct").get<bool>(),
                               j.at("confident").get<bool>());
  if (j.contains("cell") && parse_cell(j["cell"].get<std::string>()) != o.cell) {
    throw Error("ledger outcome for '" + o.record_id + "' has an inconsistent cell");
  }
  return o;
}

}  // namespace kbound
