#include "kbound/perturb.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>
#include <random>
#include <regex>
#include <sstream>

#include "kbound/error.hpp"
#include "kbound/font8x16.hpp"
#include "kbound/prompts.hpp"
#include "kbound/response_cache.hpp"
#include "kbound/rng.hpp"

namespace kbound {

ImageBuffer add_gaussian_noise(const ImageBuffer& img, double sigma, std::uint64_t seed) {
  if (!(sigma >= 0)) throw ConfigError("noise sigma must be >= 0");
  if (sigma == 0) return img;
  NormalSource normal(seed);
  std::vector<float> px = img.pixels();
  for (float& v : px) {
    v = static_cast<float>(std::clamp(static_cast<double>(v) + sigma * normal.next(), 0.0, 1.0));
  }
  return ImageBuffer(img.width(), img.height(), img.channels(), std::move(px));
}

std::vector<double> noise_schedule(int n, double step, double offset) {
  if (n < 1) throw ConfigError("noise schedule length must be >= 1");
  if (!(step >= 0)) throw ConfigError("noise step must be >= 0");
  if (!(offset >= 0)) throw ConfigError("noise offset must be >= 0");
  std::vector<double> out(static_cast<std::size_t>(n));
  for (int k = 0; k < n; ++k) out[static_cast<std::size_t>(k)] = offset + k * step;
  return out;
}

namespace {

/// Maps UTF-8 text to printable ASCII, one '?' per non-ASCII code point.
std::string to_glyph_text(std::string_view s, bool& any_renderable) {
  std::string out;
  any_renderable = false;
  for (std::size_t i = 0; i < s.size(); ++i) {
    const auto c = static_cast<unsigned char>(s[i]);
    if (c < 0x80) {
      if (c == '\t' || c == '\n' || c == '\r') {
        out.push_back(' ');
      } else if (c >= font::kFirstCode && c < font::kFirstCode + font::kGlyphCount) {
        out.push_back(static_cast<char>(c));
        if (c != ' ') any_renderable = true;
      }
      continue;
    }
    if ((c & 0xC0) == 0x80) continue;  // continuation byte
    out.push_back('?');
  }
  return out;
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

}  // namespace

TextBandLayout layout_question(std::size_t image_width, std::string_view question) {
  const std::string trimmed = trim(question);
  if (trimmed.empty()) throw ConfigError("question to compose must be non-empty");
  bool renderable = false;
  const std::string text = to_glyph_text(trimmed, renderable);
  if (!renderable) throw Error("question has no renderable glyphs");

  TextBandLayout layout;
  const std::size_t usable =
      image_width > 2 * TextBandLayout::kMargin ? image_width - 2 * TextBandLayout::kMargin : 0;
  layout.chars_per_line = std::max<std::size_t>(1, usable / font::kGlyphWidth);

  std::string line;
  std::istringstream words(text);
  for (std::string w; words >> w;) {
    while (w.size() > layout.chars_per_line) {
      if (!line.empty()) {
        layout.lines.push_back(line);
        line.clear();
      }
      layout.lines.push_back(w.substr(0, layout.chars_per_line));
      w.erase(0, layout.chars_per_line);
    }
    if (w.empty()) continue;
    if (line.empty()) {
      line = w;
    } else if (line.size() + 1 + w.size() <= layout.chars_per_line) {
      line += ' ' + w;
    } else {
      layout.lines.push_back(line);
      line = w;
    }
  }
  if (!line.empty()) layout.lines.push_back(line);
  layout.band_height = layout.lines.size() * font::kGlyphHeight + 2 * TextBandLayout::kMargin;
  return layout;
}

ImageBuffer compose_question_on_image(const ImageBuffer& img, std::string_view question) {
  const TextBandLayout layout = layout_question(img.width(), question);
  const std::size_t w = img.width();
  const std::size_t ch = img.channels();
  const std::size_t h = img.height() + layout.band_height;
  std::vector<float> px(w * h * ch, 1.0f);
  std::copy(img.pixels().begin(), img.pixels().end(), px.begin());

  for (std::size_t li = 0; li < layout.lines.size(); ++li) {
    const std::size_t y0 = img.height() + TextBandLayout::kMargin + li * font::kGlyphHeight;
    const std::string& line = layout.lines[li];
    for (std::size_t ci = 0; ci < line.size(); ++ci) {
      const auto& glyph = font::kGlyphs[static_cast<std::size_t>(line[ci] - font::kFirstCode)];
      const std::size_t x0 = TextBandLayout::kMargin + ci * font::kGlyphWidth;
      for (int gy = 0; gy < font::kGlyphHeight; ++gy) {
        for (int gx = 0; gx < font::kGlyphWidth; ++gx) {
          if (!(glyph[static_cast<std::size_t>(gy)] & (0x80u >> gx))) continue;
          const std::size_t x = x0 + static_cast<std::size_t>(gx);
          const std::size_t y = y0 + static_cast<std::size_t>(gy);
          if (x >= w || y >= h) continue;
          for (std::size_t c = 0; c < ch; ++c) px[(y * w + x) * ch + c] = 0.0f;
        }
      }
    }
  }
  return ImageBuffer(w, h, ch, std::move(px));
}

namespace {

std::string ascii_quotes(std::string_view s) {
  std::string out(s);
  for (const char* q : {"\xe2\x80\x9c", "\xe2\x80\x9d", "\xe2\x80\x9e"}) {
    for (std::size_t p; (p = out.find(q)) != std::string::npos;) out.replace(p, 3, "\"");
  }
  for (const char* q : {"\xe2\x80\x98", "\xe2\x80\x99"}) {
    for (std::size_t p; (p = out.find(q)) != std::string::npos;) out.replace(p, 3, "'");
  }
  return out;
}

std::string strip_item(std::string s) {
  s = trim(s);
  while (!s.empty() && (s.back() == ',' || s.back() == ']')) {
    s.pop_back();
    s = trim(s);
  }
  if (s.size() >= 2 && ((s.front() == '"' && s.back() == '"') ||
                        (s.front() == '\'' && s.back() == '\''))) {
    s = trim(s.substr(1, s.size() - 2));
  }
  return s;
}

}  // namespace

std::vector<std::string> parse_rephrasings(std::string_view reply) {
  const std::string text = ascii_quotes(reply);
  std::vector<std::string> out;

  static const std::regex kQuoted(R"re((\d+)\s*\.\s*"([^"]*)")re");
  for (auto it = std::sregex_iterator(text.begin(), text.end(), kQuoted);
       it != std::sregex_iterator(); ++it) {
    std::string item = trim((*it)[2].str());
    if (!item.empty()) out.push_back(std::move(item));
  }
  if (!out.empty()) return out;

  static const std::regex kNumberedLine(R"re(^\s*[\[(]?\s*\d+\s*[.)]\s*(.*)$)re");
  std::istringstream lines(text);
  for (std::string line; std::getline(lines, line);) {
    std::smatch m;
    if (!std::regex_match(line, m, kNumberedLine)) continue;
    std::string item = strip_item(m[1].str());
    if (!item.empty()) out.push_back(std::move(item));
  }
  return out;
}

std::vector<std::string> rephrase_questions(Gateway& gateway, const EndpointSpec& endpoint,
                                            std::string_view question, int n,
                                            const SamplingParams& params) {
  if (n < 1) throw ConfigError("rephrase count must be >= 1");
  const Messages request = prompts::render_rephrase_request(question, n);
  std::string raw;
  for (int attempt = 0; attempt < 2; ++attempt) {
    const Transcript t = gateway.complete(endpoint, request, params, false, attempt);
    raw = t.response_text;
    auto items = parse_rephrasings(raw);
    if (static_cast<int>(items.size()) >= n) {
      items.resize(static_cast<std::size_t>(n));
      return items;
    }
  }
  throw ParseError("expected " + std::to_string(n) + " rephrased questions, reply was: " + raw);
}

std::filesystem::path ImageCache::path_for(const std::string& source_hash,
                                           const std::string& tag) const {
  return dir_ / "images" / (source_hash + "_" + tag + ".png");
}

std::optional<ImageBuffer> ImageCache::load(const std::filesystem::path& path) const {
  std::ifstream in(path, std::ios::binary);
  if (!in) return std::nullopt;
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  try {
    return decode_png(bytes);
  } catch (const Error&) {
    return std::nullopt;
  }
}

ImageBuffer ImageCache::store(const std::filesystem::path& path, const ImageBuffer& img) const {
  std::string bytes = encode_png(img);
  atomic_write(path, bytes);
  return decode_png(bytes);
}

}  // namespace kbound
