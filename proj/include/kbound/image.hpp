#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace kbound {

/// Row-major image with 1 (gray) or 3 (RGB) channels and values in [0, 1].
class ImageBuffer {
 public:
  ImageBuffer() = default;
  /// Throws std::invalid_argument on bad dimensions or out-of-range pixels.
  ImageBuffer(std::size_t width, std::size_t height, std::size_t channels,
              std::vector<float> pixels);
  static ImageBuffer filled(std::size_t width, std::size_t height, std::size_t channels,
                            float value);

  std::size_t width() const { return width_; }
  std::size_t height() const { return height_; }
  std::size_t channels() const { return channels_; }
  const std::vector<float>& pixels() const { return pixels_; }
  bool empty() const { return pixels_.empty(); }

  float at(std::size_t x, std::size_t y, std::size_t c) const {
    return pixels_[(y * width_ + x) * channels_ + c];
  }

  bool operator==(const ImageBuffer&) const = default;

 private:
  std::size_t width_ = 0;
  std::size_t height_ = 0;
  std::size_t channels_ = 0;
  std::vector<float> pixels_;
};

/// 8-bit PNG codec. Alpha is dropped, palettes expanded, 16-bit samples reduced.
ImageBuffer decode_png(std::string_view bytes);
std::string encode_png(const ImageBuffer& img);

ImageBuffer read_png(const std::filesystem::path& path);
void write_png(const std::filesystem::path& path, const ImageBuffer& img);

}  // namespace kbound
