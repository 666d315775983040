#include "kbound/types.hpp"

#include <array>
#include <utility>

#include "kbound/error.hpp"

namespace kbound {
namespace {

template <typename E, std::size_t N>
E lookup(const std::array<std::pair<E, std::string_view>, N>& table, std::string_view s,
         const char* what) {
  for (const auto& [value, name] : table) {
    if (name == s) return value;
  }
  throw ConfigError(std::string("unknown ") + what + ": '" + std::string(s) + "'");
}

template <typename E, std::size_t N>
std::string_view name_of(const std::array<std::pair<E, std::string_view>, N>& table, E e) {
  for (const auto& [value, name] : table) {
    if (value == e) return name;
  }
  return "?";
}

constexpr std::array<std::pair<Split, std::string_view>, 2> kSplits{{
    {Split::kEval, "eval"},
    {Split::kHeldout, "heldout"},
}};

constexpr std::array<std::pair<Modality, std::string_view>, 3> kModalities{{
    {Modality::kVqa, "vqa"},
    {Modality::kQa, "qa"},
    {Modality::kImageOnly, "image_only"},
}};

constexpr std::array<std::pair<Family, std::string_view>, 4> kFamilies{{
    {Family::kVerbalizedSingle, "verbalized_single"},
    {Family::kVerbalizedDouble, "verbalized_double"},
    {Family::kProbabilistic, "probabilistic"},
    {Family::kConsistency, "consistency"},
}};

constexpr std::array<std::pair<Variant, std::string_view>, 14> kVariants{{
    {Variant::kVanilla, "vanilla"},
    {Variant::kCot, "cot"},
    {Variant::kImgCot, "img_cot"},
    {Variant::kPunish, "punish"},
    {Variant::kExplain, "explain"},
    {Variant::kSelfJud, "self_jud"},
    {Variant::kChallenge, "challenge"},
    {Variant::kProbThr, "prob_thr"},
    {Variant::kPplThr, "ppl_thr"},
    {Variant::kRandom, "random"},
    {Variant::kNoisedImg, "noised_img"},
    {Variant::kRephr, "rephr"},
    {Variant::kRephNois, "reph_nois"},
    {Variant::kCrossModel, "cross_model"},
}};

constexpr std::array<std::pair<Cell, std::string_view>, 4> kCells{{
    {Cell::kTP, "TP"},
    {Cell::kFP, "FP"},
    {Cell::kTN, "TN"},
    {Cell::kFN, "FN"},
}};

constexpr std::array<std::pair<Direction, std::string_view>, 2> kDirections{{
    {Direction::kConfidentIfAtMost, "confident_if_score_at_most"},
    {Direction::kConfidentIfAtLeast, "confident_if_score_at_least"},
}};

bool legal(Family f, Variant v) {
  switch (f) {
    case Family::kVerbalizedSingle:
      return v == Variant::kVanilla || v == Variant::kCot || v == Variant::kImgCot ||
             v == Variant::kPunish || v == Variant::kExplain;
    case Family::kVerbalizedDouble:
      return v == Variant::kSelfJud || v == Variant::kCot || v == Variant::kChallenge ||
             v == Variant::kPunish || v == Variant::kProbThr;
    case Family::kProbabilistic:
      return v == Variant::kPplThr;
    case Family::kConsistency:
      return v == Variant::kRandom || v == Variant::kNoisedImg || v == Variant::kRephr ||
             v == Variant::kRephNois || v == Variant::kCrossModel;
  }
  return false;
}

}  // namespace

std::string_view to_string(Split s) { return name_of(kSplits, s); }
std::string_view to_string(Modality m) { return name_of(kModalities, m); }
std::string_view to_string(Family f) { return name_of(kFamilies, f); }
std::string_view to_string(Variant v) { return name_of(kVariants, v); }
std::string_view to_string(Cell c) { return name_of(kCells, c); }
std::string_view to_string(Direction d) { return name_of(kDirections, d); }

Split parse_split(std::string_view s) { return lookup(kSplits, s, "split"); }
Modality parse_modality(std::string_view s) { return lookup(kModalities, s, "modality"); }
Variant parse_variant(std::string_view s) { return lookup(kVariants, s, "variant"); }
Direction parse_direction(std::string_view s) { return lookup(kDirections, s, "direction"); }
Cell parse_cell(std::string_view s) { return lookup(kCells, s, "cell"); }

void MethodSpec::validate() const {
  if (!legal(family, variant)) {
    throw ConfigError("variant '" + std::string(to_string(variant)) + "' is not legal for family '" +
                      std::string(to_string(family)) + "'");
  }
  if (n_samples < 1) throw ConfigError("n_samples must be >= 1");
  if (sigma_step < 0) throw ConfigError("sigma_step must be >= 0");
  if (sample_temperature < 0) throw ConfigError("sample_temperature must be >= 0");
}

bool MethodSpec::is_score_kind() const {
  return family == Family::kProbabilistic || family == Family::kConsistency ||
         variant == Variant::kProbThr;
}

std::string MethodSpec::name() const {
  if (family == Family::kVerbalizedDouble &&
      (variant == Variant::kCot || variant == Variant::kPunish)) {
    return "double_" + std::string(to_string(variant));
  }
  return std::string(to_string(variant));
}

MethodSpec parse_method(std::string_view name) {
  MethodSpec m;
  if (name == "double_cot" || name == "double_punish") {
    m.family = Family::kVerbalizedDouble;
    m.variant = parse_variant(name.substr(7));
    return m;
  }
  m.variant = lookup(kVariants, name, "method");
  switch (m.variant) {
    case Variant::kVanilla:
    case Variant::kCot:
    case Variant::kImgCot:
    case Variant::kPunish:
    case Variant::kExplain:
      m.family = Family::kVerbalizedSingle;
      break;
    case Variant::kSelfJud:
    case Variant::kChallenge:
    case Variant::kProbThr:
      m.family = Family::kVerbalizedDouble;
      break;
    case Variant::kPplThr:
      m.family = Family::kProbabilistic;
      break;
    default:
      m.family = Family::kConsistency;
      break;
  }
  return m;
}

std::vector<MethodSpec> all_methods() {
  std::vector<MethodSpec> out;
  for (std::string_view n : {"vanilla", "cot", "img_cot", "punish", "explain", "self_jud",
                             "double_cot", "challenge", "double_punish", "prob_thr", "random",
                             "noised_img", "rephr", "reph_nois", "cross_model", "ppl_thr"}) {
    out.push_back(parse_method(n));
  }
  return out;
}

Direction direction_for(const MethodSpec& m) {
  if (!m.is_score_kind()) {
    throw ConfigError("method '" + m.name() + "' produces binary signals; no threshold direction");
  }
  return m.family == Family::kProbabilistic ? Direction::kConfidentIfAtMost
                                            : Direction::kConfidentIfAtLeast;
}

void ConfidenceSignal::validate() const {
  if (kind == SignalKind::kBinary) {
    if (!binary_value) throw Error("binary signal without a value");
    return;
  }
  if (!score_value) throw Error("score signal without a value");
  const double v = *score_value;
  if (method.family == Family::kProbabilistic && !(v >= 1.0)) {
    throw Error("perplexity score must be >= 1");
  }
  if (method.family == Family::kConsistency && !(v >= 0 && v <= method.n_samples)) {
    throw Error("consistency score outside [0, n_samples]");
  }
  if (method.variant == Variant::kProbThr && !(v >= 0 && v <= 1)) {
    throw Error("probability score outside [0, 1]");
  }
}

Cell classify_outcome(bool correct, bool confident) {
  if (correct) return confident ? Cell::kTP : Cell::kFN;
  return confident ? Cell::kFP : Cell::kTN;
}

EvalOutcome make_outcome(std::string record_id, std::string answer_text, bool correct,
                         bool confident) {
  return EvalOutcome{std::move(record_id), std::move(answer_text), correct, confident,
                     classify_outcome(correct, confident)};
}

}  // namespace kbound
