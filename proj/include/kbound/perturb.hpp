#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "kbound/gateway.hpp"
#include "kbound/image.hpp"

namespace kbound {

/// out = clamp(in + N(0, sigma^2), 0, 1) per sample value. sigma == 0 returns the input.
ImageBuffer add_gaussian_noise(const ImageBuffer& img, double sigma, std::uint64_t seed);

/// [offset, offset + step, ..., offset + (n-1)*step]. The default offset 0 makes the first
/// sample see the clean image.
std::vector<double> noise_schedule(int n, double step, double offset = 0.0);

/// Layout of the text band appended below an image.
struct TextBandLayout {
  static constexpr int kMargin = 4;
  std::size_t chars_per_line = 0;
  std::vector<std::string> lines;
  std::size_t band_height = 0;
};

/// Word-wraps `question` to the glyph columns that fit in `image_width`.
TextBandLayout layout_question(std::size_t image_width, std::string_view question);

/// Appends a white band with the question in black 8x16 glyphs below the image.
ImageBuffer compose_question_on_image(const ImageBuffer& img, std::string_view question);

/// Extracts question strings from a bracketed list (`[1."a",2."b"]`) or numbered lines.
std::vector<std::string> parse_rephrasings(std::string_view reply);

/// Asks `endpoint` for n paraphrases; retries once when fewer than n parse out.
/// Throws ParseError listing the raw reply.
std::vector<std::string> rephrase_questions(Gateway& gateway, const EndpointSpec& endpoint,
                                            std::string_view question, int n,
                                            const SamplingParams& params);

/// Disk cache for derived images, keyed by source hash and a derivation tag.
class ImageCache {
 public:
  explicit ImageCache(std::filesystem::path dir) : dir_(std::move(dir)) {}

  template <typename Make>
  ImageBuffer get_or_make(const std::string& source_hash, const std::string& tag, Make&& make) {
    if (dir_.empty()) return make();
    const auto path = path_for(source_hash, tag);
    if (auto hit = load(path)) return *hit;
    return store(path, make());
  }

  std::filesystem::path path_for(const std::string& source_hash, const std::string& tag) const;

 private:
  std::optional<ImageBuffer> load(const std::filesystem::path& path) const;
  /// Writes the image and returns it as stored (8-bit quantized).
  ImageBuffer store(const std::filesystem::path& path, const ImageBuffer& img) const;

  std::filesystem::path dir_;
};

}  // namespace kbound
