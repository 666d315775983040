#pragma once

#include <cstdint>
#include <span>
#include <optional>
#include <string>
#include <vector>

#include "kbound/gateway.hpp"
#include "kbound/image.hpp"
#include "kbound/judging.hpp"
#include "kbound/perturb.hpp"
#include "kbound/types.hpp"

namespace kbound {

/// Parses "<answer> ... certain|uncertain". "uncertain" wins whenever it occurs; the
/// Challenge prompt's spelling "ceratin" counts as "certain". The answer is the reply with the
/// final keyword clause cut off. Throws UnparsedConfidenceError when neither keyword occurs.
struct VerbalizedParse {
  std::string answer;
  bool confident = false;
};
VerbalizedParse parse_verbalized(std::string_view response);

/// First decimal literal in [0, 1], scanning left to right. Throws ParseError if none.
double parse_probability(std::string_view text);

/// exp(-mean(logprobs)). Throws Error on an empty list or a positive entry.
double compute_perplexity(std::span<const double> logprobs);

/// What the subject model is shown for one record under one query modality.
struct QueryInput {
  Modality modality = Modality::kVqa;
  /// Text substituted into the prompt's question slot (empty for image_only).
  std::string prompt_question;
  /// Question in plain text, used for rephrasing and by the LLM judge.
  std::string source_question;
  std::optional<ImageBuffer> image;
  /// Image before the question band was added (image_only only).
  std::optional<ImageBuffer> base_image;

  /// Same record, question replaced (rephrasing). image_only re-renders the band.
  QueryInput with_question(const std::string& question) const;
};

/// vqa: question + image; qa: text question only; image_only: question drawn on the image.
QueryInput prepare_input(const QueryRecord& record, Modality modality,
                         const std::optional<ImageBuffer>& image);

struct ElicitorOptions {
  /// Greedy parameters (temperature 0, fixed seed) for answers and verbalized confidence.
  SamplingParams greedy{};
  double sample_temperature = 1.0;
  int n_samples = 10;
  double sigma_step = 0.05;
  double sigma_offset = 0.0;
  std::uint64_t seed = 0;
  int cross_primary_samples = 4;
  int cross_other_samples = 3;
  /// Hard-fail instead of counting a keyword-less verbalized reply as unconfident.
  bool unparsed_is_error = false;
};

/// Endpoints an elicitor may call besides the subject.
struct EndpointRoles {
  EndpointSpec subject;
  std::optional<EndpointSpec> rephraser;
  std::vector<EndpointSpec> cross_model_others;
};

/// Runs each confidence-elicitation protocol against the gateway.
class Elicitor {
 public:
  Elicitor(Gateway& gateway, const Judge& judge, EndpointRoles roles, ElicitorOptions options,
           ImageCache* image_cache = nullptr);

  /// Dispatches on method.family.
  ConfidenceSignal elicit(const QueryRecord& record, const QueryInput& input,
                          const MethodSpec& method);

  ConfidenceSignal verbalized_single(const QueryRecord& record, const QueryInput& input,
                                     const MethodSpec& method);
  ConfidenceSignal verbalized_double(const QueryRecord& record, const QueryInput& input,
                                     const MethodSpec& method);
  ConfidenceSignal perplexity(const QueryRecord& record, const QueryInput& input,
                              const MethodSpec& method);
  ConfidenceSignal consistency(const QueryRecord& record, const QueryInput& input,
                               const MethodSpec& method);
  ConfidenceSignal cross_model(const QueryRecord& record, const QueryInput& input,
                               const MethodSpec& method);

  /// Messages with the input's image attached to the first user turn.
  Messages attach(Messages messages, const std::optional<ImageBuffer>& image) const;

 private:
  SamplingParams sampling_params(int sample_index) const;
  std::optional<ImageBuffer> noised(const QueryRecord& record,
                                    const std::optional<ImageBuffer>& image, double sigma,
                                    int sample_index);
  std::string greedy_answer(const EndpointSpec& endpoint, const QueryInput& input,
                            ConfidenceSignal& signal);
  int count_equivalent(const std::string& reference, const std::vector<std::string>& samples,
                       const std::string& question, ConfidenceSignal& signal) const;

  Gateway& gateway_;
  const Judge& judge_;
  EndpointRoles roles_;
  ElicitorOptions options_;
  ImageCache* image_cache_;
};

}  // namespace kbound
