#include "kbound/elicitors.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <regex>

#include <spdlog/spdlog.h>

#include "kbound/error.hpp"
#include "kbound/hashing.hpp"
#include "kbound/prompts.hpp"

namespace kbound {
namespace {

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

std::string trim(std::string_view s, std::string_view chars = " \t\r\n") {
  const auto b = s.find_first_not_of(chars);
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(chars);
  return std::string(s.substr(b, e - b + 1));
}

std::string rtrim(std::string_view s, std::string_view chars) {
  const auto e = s.find_last_not_of(chars);
  if (e == std::string_view::npos) return {};
  return std::string(s.substr(0, e + 1));
}

/// Position just past the last clause boundary in `prefix`, keeping sentence terminators.
std::size_t clause_cut(std::string_view prefix) {
  for (std::size_t i = prefix.size(); i-- > 0;) {
    const char c = prefix[i];
    const bool followed_by_space =
        i + 1 == prefix.size() || std::isspace(static_cast<unsigned char>(prefix[i + 1]));
    if (c == '\n') return i;
    if ((c == '.' || c == '!' || c == '?') && followed_by_space) return i + 1;
    if ((c == ',' || c == ';') && followed_by_space) return i;
    if (c == '(' || c == '[') return i;
  }
  return std::string_view::npos;
}

}  // namespace

VerbalizedParse parse_verbalized(std::string_view response) {
  if (trim(response).empty()) throw UnparsedConfidenceError("empty verbalized reply");
  const std::string low = lower(response);

  std::size_t pos = low.rfind("uncertain");
  std::size_t len = 9;
  bool confident = false;
  if (pos == std::string::npos) {
    const std::size_t c = low.rfind("certain");
    const std::size_t typo = low.rfind("ceratin");
    if (c == std::string::npos && typo == std::string::npos) {
      throw UnparsedConfidenceError("reply contains neither \"certain\" nor \"uncertain\": '" +
                                    std::string(response.substr(0, 200)) + "'");
    }
    pos = c == std::string::npos ? typo : (typo == std::string::npos ? c : std::max(c, typo));
    len = 7;
    confident = true;
  }

  constexpr std::string_view kTrailing = " \t\r\n*_-:\"'`([,;";
  const std::string_view prefix = response.substr(0, pos);
  std::string answer;
  if (const std::size_t cut = clause_cut(prefix); cut != std::string_view::npos) {
    answer = trim(rtrim(prefix.substr(0, cut), kTrailing));
  } else {
    answer = trim(rtrim(prefix, kTrailing));
  }
  if (answer.empty()) {
    const std::string rest =
        std::string(prefix) + std::string(response.substr(std::min(response.size(), pos + len)));
    answer = trim(rest, " \t\r\n*_-:.,;\"'`()[]");
  }
  return {answer, confident};
}

double parse_probability(std::string_view text) {
  if (trim(text).empty()) throw ParseError("empty probability reply");
  static const std::regex kNumber(R"(\d+(?:\.\d*)?|\.\d+)");
  const std::string s(text);
  for (auto it = std::sregex_iterator(s.begin(), s.end(), kNumber); it != std::sregex_iterator();
       ++it) {
    const auto at = static_cast<std::size_t>(it->position());
    if (at > 0 && s[at - 1] == '-') continue;
    const double v = std::stod(it->str());
    if (v >= 0.0 && v <= 1.0) return v;
  }
  throw ParseError("no probability in [0,1] found in '" + s.substr(0, 200) + "'");
}

double compute_perplexity(std::span<const double> logprobs) {
  if (logprobs.empty()) throw Error("perplexity of an empty token sequence");
  double sum = 0;
  for (double lp : logprobs) {
    if (!(lp <= 0)) throw Error("log-probabilities must be <= 0");
    sum += lp;
  }
  return std::exp(-sum / static_cast<double>(logprobs.size()));
}

QueryInput QueryInput::with_question(const std::string& question) const {
  QueryInput out = *this;
  if (modality == Modality::kImageOnly) {
    out.image = compose_question_on_image(*base_image, question);
  } else {
    out.prompt_question = question;
  }
  return out;
}

QueryInput prepare_input(const QueryRecord& record, Modality modality,
                         const std::optional<ImageBuffer>& image) {
  QueryInput in;
  in.modality = modality;
  switch (modality) {
    case Modality::kVqa:
      if (!image) throw DatasetError("record '" + record.id + "' has no image for vqa");
      in.prompt_question = record.question_text;
      in.source_question = record.question_text;
      in.image = image;
      break;
    case Modality::kQa:
      in.prompt_question = record.text_question();
      in.source_question = record.text_question();
      break;
    case Modality::kImageOnly:
      if (!image) throw DatasetError("record '" + record.id + "' has no image for image_only");
      in.source_question = record.question_text;
      in.base_image = image;
      in.image = compose_question_on_image(*image, record.question_text);
      break;
  }
  return in;
}

Elicitor::Elicitor(Gateway& gateway, const Judge& judge, EndpointRoles roles,
                   ElicitorOptions options, ImageCache* image_cache)
    : gateway_(gateway),
      judge_(judge),
      roles_(std::move(roles)),
      options_(std::move(options)),
      image_cache_(image_cache) {}

Messages Elicitor::attach(Messages messages, const std::optional<ImageBuffer>& image) const {
  if (!image) return messages;
  for (auto& m : messages) {
    if (m.role == "user") {
      m.images.push_back(ImageAttachment::from_image(*image));
      break;
    }
  }
  return messages;
}

SamplingParams Elicitor::sampling_params(int) const {
  SamplingParams p = options_.greedy;
  p.temperature = options_.sample_temperature;
  // A shared seed would make every sample identical on servers that honor it.
  p.seed.reset();
  return p;
}

std::optional<ImageBuffer> Elicitor::noised(const QueryRecord& record,
                                            const std::optional<ImageBuffer>& image, double sigma,
                                            int sample_index) {
  if (!image || sigma == 0) return image;
  const std::string tag = std::to_string(sample_index) + "_" + std::to_string(sigma);
  const std::uint64_t seed = derive_seed(options_.seed, record.id + ":" + tag);
  auto make = [&] { return add_gaussian_noise(*image, sigma, seed); };
  if (image_cache_ == nullptr) return make();
  const std::string source = sha256_hex(encode_png(*image));
  return image_cache_->get_or_make(source, "s" + std::to_string(seed) + "_" + tag, make);
}

std::string Elicitor::greedy_answer(const EndpointSpec& endpoint, const QueryInput& input,
                                    ConfidenceSignal& signal) {
  const Transcript t = gateway_.complete(
      endpoint, attach(prompts::render_first_round(input.prompt_question), input.image),
      options_.greedy, false);
  signal.transcripts.push_back(t.request_fingerprint);
  return trim(t.response_text);
}

int Elicitor::count_equivalent(const std::string& reference,
                               const std::vector<std::string>& samples,
                               const std::string& question, ConfidenceSignal& signal) const {
  int count = 0;
  for (const auto& s : samples) {
    try {
      if (judge_.judge_equivalence(reference, s, question)) ++count;
    } catch (const JudgingError& e) {
      ++signal.dropped_samples;
      spdlog::warn("record '{}': equivalence judgement dropped: {}", signal.record_id, e.what());
    }
  }
  return count;
}

ConfidenceSignal Elicitor::elicit(const QueryRecord& record, const QueryInput& input,
                                  const MethodSpec& method) {
  method.validate();
  ConfidenceSignal s;
  switch (method.family) {
    case Family::kVerbalizedSingle: s = verbalized_single(record, input, method); break;
    case Family::kVerbalizedDouble: s = verbalized_double(record, input, method); break;
    case Family::kProbabilistic: s = perplexity(record, input, method); break;
    case Family::kConsistency:
      s = method.variant == Variant::kCrossModel ? cross_model(record, input, method)
                                                 : consistency(record, input, method);
      break;
  }
  s.validate();
  return s;
}

ConfidenceSignal Elicitor::verbalized_single(const QueryRecord& record, const QueryInput& input,
                                             const MethodSpec& method) {
  ConfidenceSignal s;
  s.record_id = record.id;
  s.method = method;
  s.kind = SignalKind::kBinary;
  const Transcript t = gateway_.complete(
      roles_.subject, attach(prompts::render_single(method.variant, input.prompt_question),
                             input.image),
      options_.greedy, false);
  s.transcripts.push_back(t.request_fingerprint);
  try {
    const auto parsed = parse_verbalized(t.response_text);
    s.answer_text = parsed.answer;
    s.binary_value = parsed.confident;
  } catch (const UnparsedConfidenceError&) {
    if (options_.unparsed_is_error) throw;
    s.answer_text = trim(t.response_text);
    s.binary_value = false;
    s.unparsed_confidence = true;
  }
  return s;
}

ConfidenceSignal Elicitor::verbalized_double(const QueryRecord& record, const QueryInput& input,
                                             const MethodSpec& method) {
  ConfidenceSignal s;
  s.record_id = record.id;
  s.method = method;
  s.answer_text = greedy_answer(roles_.subject, input, s);

  const Transcript t = gateway_.complete(
      roles_.subject,
      attach(prompts::render_double(method.variant, input.prompt_question, s.answer_text),
             input.image),
      options_.greedy, false);
  s.transcripts.push_back(t.request_fingerprint);

  if (method.variant == Variant::kProbThr) {
    s.kind = SignalKind::kScore;
    s.score_value = parse_probability(t.response_text);
    return s;
  }
  s.kind = SignalKind::kBinary;
  try {
    s.binary_value = parse_verbalized(t.response_text).confident;
  } catch (const UnparsedConfidenceError&) {
    if (options_.unparsed_is_error) throw;
    s.binary_value = false;
    s.unparsed_confidence = true;
  }
  return s;
}

ConfidenceSignal Elicitor::perplexity(const QueryRecord& record, const QueryInput& input,
                                      const MethodSpec& method) {
  ConfidenceSignal s;
  s.record_id = record.id;
  s.method = method;
  s.kind = SignalKind::kScore;
  const Transcript t = gateway_.complete(
      roles_.subject, attach(prompts::render_first_round(input.prompt_question), input.image),
      options_.greedy, true);
  s.transcripts.push_back(t.request_fingerprint);
  s.answer_text = trim(t.response_text);
  s.score_value = compute_perplexity(*t.token_logprobs);
  return s;
}

ConfidenceSignal Elicitor::consistency(const QueryRecord& record, const QueryInput& input,
                                       const MethodSpec& method) {
  ConfidenceSignal s;
  s.record_id = record.id;
  s.method = method;
  s.kind = SignalKind::kScore;
  s.answer_text = greedy_answer(roles_.subject, input, s);

  const int n = method.n_samples;
  const SamplingParams sp = sampling_params(0);
  const bool noise = method.variant == Variant::kNoisedImg || method.variant == Variant::kRephNois;
  const bool rephrase = method.variant == Variant::kRephr || method.variant == Variant::kRephNois;

  std::vector<std::string> samples;
  if (!noise && !rephrase) {
    const auto ts = gateway_.sample_n(
        roles_.subject, attach(prompts::render_first_round(input.prompt_question), input.image),
        sp, n);
    for (const auto& t : ts) {
      s.transcripts.push_back(t.request_fingerprint);
      samples.push_back(trim(t.response_text));
    }
  } else {
    const auto sigmas = noise_schedule(n, method.sigma_step, options_.sigma_offset);
    std::vector<std::string> questions;
    if (rephrase) {
      if (!roles_.rephraser) throw ConfigError("method '" + method.name() + "' needs a rephraser");
      questions =
          rephrase_questions(gateway_, *roles_.rephraser, input.source_question, n, options_.greedy);
    }
    for (int k = 0; k < n; ++k) {
      const QueryInput variant_input =
          rephrase ? input.with_question(questions[static_cast<std::size_t>(k)]) : input;
      const auto image =
          noise ? noised(record, variant_input.image, sigmas[static_cast<std::size_t>(k)], k)
                : variant_input.image;
      const Transcript t = gateway_.complete(
          roles_.subject, attach(prompts::render_first_round(variant_input.prompt_question), image),
          sp, false, k);
      s.transcripts.push_back(t.request_fingerprint);
      samples.push_back(trim(t.response_text));
    }
  }
  s.score_value = count_equivalent(s.answer_text, samples, input.source_question, s);
  return s;
}

ConfidenceSignal Elicitor::cross_model(const QueryRecord& record, const QueryInput& input,
                                       const MethodSpec& method) {
  if (roles_.cross_model_others.size() != 2) {
    throw ConfigError("cross_model needs exactly two other endpoints, got " +
                      std::to_string(roles_.cross_model_others.size()));
  }
  ConfidenceSignal s;
  s.record_id = record.id;
  s.method = method;
  s.method.n_samples = options_.cross_primary_samples + 2 * options_.cross_other_samples;
  s.kind = SignalKind::kScore;
  s.answer_text = greedy_answer(roles_.subject, input, s);

  const Messages msgs =
      attach(prompts::render_first_round(input.prompt_question), input.image);
  const SamplingParams sp = sampling_params(0);
  std::vector<std::string> pool;
  auto draw = [&](const EndpointSpec& ep, int n) {
    for (const auto& t : gateway_.sample_n(ep, msgs, sp, n)) {
      s.transcripts.push_back(t.request_fingerprint);
      pool.push_back(trim(t.response_text));
    }
  };
  draw(roles_.subject, options_.cross_primary_samples);
  for (const auto& other : roles_.cross_model_others) draw(other, options_.cross_other_samples);
  s.score_value = count_equivalent(s.answer_text, pool, input.source_question, s);
  return s;
}

}  // namespace kbound
