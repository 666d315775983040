#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace kbound {

enum class Split { kEval, kHeldout };

enum class Modality { kVqa, kQa, kImageOnly };

enum class Family { kVerbalizedSingle, kVerbalizedDouble, kProbabilistic, kConsistency };

enum class Variant {
  kVanilla,
  kCot,
  kImgCot,
  kPunish,
  kExplain,
  kSelfJud,
  kChallenge,
  kProbThr,
  kPplThr,
  kRandom,
  kNoisedImg,
  kRephr,
  kRephNois,
  kCrossModel,
};

enum class Cell { kTP, kFP, kTN, kFN };

/// Binarization rule for a score-kind signal.
enum class Direction {
  kConfidentIfAtMost,   // perplexity
  kConfidentIfAtLeast,  // consistency count, verbal probability
};

std::string_view to_string(Split s);
std::string_view to_string(Modality m);
std::string_view to_string(Family f);
std::string_view to_string(Variant v);
std::string_view to_string(Cell c);
std::string_view to_string(Direction d);

Split parse_split(std::string_view s);
Modality parse_modality(std::string_view s);
Variant parse_variant(std::string_view s);
Direction parse_direction(std::string_view s);
Cell parse_cell(std::string_view s);

/// One evaluation item.
struct QueryRecord {
  std::string id;
  std::string dataset_id;
  std::string question_text;
  std::optional<std::string> image_ref;  // resolved path
  std::optional<std::string> qa_text;
  std::vector<std::string> gold_answers;
  std::optional<Split> split;

  /// Text used for the text-only modality.
  const std::string& text_question() const { return qa_text ? *qa_text : question_text; }
};

/// Fitted cut-off for a score-kind method.
struct ThresholdFit {
  double threshold = 0.0;
  Direction direction = Direction::kConfidentIfAtLeast;
  double heldout_alignment = 0.0;
  std::size_t n_heldout = 0;

  bool operator==(const ThresholdFit&) const = default;
};

/// A confidence elicitation method together with its sampling knobs.
struct MethodSpec {
  Family family = Family::kVerbalizedSingle;
  Variant variant = Variant::kVanilla;
  int n_samples = 10;
  double sample_temperature = 1.0;
  double sigma_step = 0.05;
  std::optional<ThresholdFit> threshold;

  /// Throws ConfigError when the variant is illegal for the family or knobs are out of range.
  void validate() const;

  /// Signals from this method are real-valued and need a fitted threshold.
  bool is_score_kind() const;

  /// Stable, unambiguous method name ("vanilla", "double_cot", "cross_model", ...).
  std::string name() const;
};

/// Builds a MethodSpec from a method name as printed by MethodSpec::name().
MethodSpec parse_method(std::string_view name);

/// The sixteen methods of the catalog, in table order.
std::vector<MethodSpec> all_methods();

/// Per-direction default for score-kind methods.
Direction direction_for(const MethodSpec& m);

enum class SignalKind { kBinary, kScore };

/// Raw output of one elicitation method for one record.
struct ConfidenceSignal {
  std::string record_id;
  MethodSpec method;
  std::string answer_text;
  SignalKind kind = SignalKind::kBinary;
  std::optional<bool> binary_value;
  std::optional<double> score_value;
  /// Fingerprints of the transcripts behind this signal.
  std::vector<std::string> transcripts;
  /// Verbalized reply had no confidence keyword and was counted as unconfident.
  bool unparsed_confidence = false;
  /// Consistency samples whose equivalence judgement failed and were left out of the count.
  int dropped_samples = 0;

  /// Throws Error when the kind/value pairing or the score range is violated.
  void validate() const;
};

struct EvalOutcome {
  std::string record_id;
  std::string answer_text;
  bool correct = false;
  bool confident = false;
  Cell cell = Cell::kTN;
};

Cell classify_outcome(bool correct, bool confident);

EvalOutcome make_outcome(std::string record_id, std::string answer_text, bool correct,
                         bool confident);

}  // namespace kbound
