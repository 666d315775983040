#include <gtest/gtest.h>

#include <cmath>

#include "kbound/error.hpp"
#include "kbound/gateway.hpp"
#include "kbound/hashing.hpp"
#include "kbound/mock.hpp"
#include "kbound/perturb.hpp"
#include "test_util.hpp"

using namespace kbound;
using kbound::testing::rule;
using kbound::testing::script;
using kbound::testing::TempDir;

namespace {

ImageBuffer gradient(std::size_t w, std::size_t h, std::size_t ch) {
  std::vector<float> px(w * h * ch);
  for (std::size_t i = 0; i < px.size(); ++i) px[i] = static_cast<float>(i % 256) / 255.0f;
  return ImageBuffer(w, h, ch, std::move(px));
}

}  // namespace

TEST(Image, ValidatesBuffer) {
  EXPECT_THROW(ImageBuffer(2, 2, 3, std::vector<float>(11, 0.5f)), std::invalid_argument);
  EXPECT_THROW(ImageBuffer(1, 1, 2, std::vector<float>(2, 0.5f)), std::invalid_argument);
  EXPECT_THROW(ImageBuffer(1, 1, 1, std::vector<float>{1.5f}), std::invalid_argument);
}

TEST(Image, PngRoundTripIsExactFor8BitValues) {
  const auto img = gradient(17, 9, 3);
  EXPECT_EQ(decode_png(encode_png(img)), img);
  const auto gray = gradient(5, 4, 1);
  EXPECT_EQ(decode_png(encode_png(gray)), gray);
  EXPECT_THROW(decode_png("not a png"), Error);
}

TEST(Noise, SigmaZeroIsIdentity) {
  const auto img = gradient(32, 32, 3);
  const auto out = add_gaussian_noise(img, 0.0, 42);
  EXPECT_EQ(out, img);
  EXPECT_EQ(encode_png(out), encode_png(img));
}

TEST(Noise, ConstantImageStatistics) {
  const auto img = ImageBuffer::filled(512, 512, 1, 0.5f);
  const auto out = add_gaussian_noise(img, 0.1, 7);
  double sum = 0;
  double sq = 0;
  for (float v : out.pixels()) {
    sum += v;
    sq += static_cast<double>(v) * v;
  }
  const double n = static_cast<double>(out.pixels().size());
  const double mean = sum / n;
  const double sd = std::sqrt(sq / n - mean * mean);
  EXPECT_NEAR(mean, 0.5, 0.01);
  EXPECT_NEAR(sd, 0.1, 0.01);
  EXPECT_EQ(out.width(), 512u);
  EXPECT_EQ(out.height(), 512u);
}

TEST(Noise, ClampsAndIsSeeded) {
  const auto white = ImageBuffer::filled(64, 64, 3, 1.0f);
  const auto out = add_gaussian_noise(white, 0.4, 1);
  for (float v : out.pixels()) {
    ASSERT_LE(v, 1.0f);
    ASSERT_GE(v, 0.0f);
  }
  const auto img = gradient(64, 64, 3);
  EXPECT_EQ(add_gaussian_noise(img, 0.05, 9), add_gaussian_noise(img, 0.05, 9));
  EXPECT_NE(add_gaussian_noise(img, 0.05, 9), add_gaussian_noise(img, 0.05, 10));
  EXPECT_THROW(add_gaussian_noise(img, -0.1, 1), Error);
}

TEST(Schedule, Examples) {
  const auto ten = noise_schedule(10, 0.05);
  ASSERT_EQ(ten.size(), 10u);
  for (int k = 0; k < 10; ++k) EXPECT_NEAR(ten[k], 0.05 * k, 1e-15);
  EXPECT_EQ(ten.front(), 0.0);
  EXPECT_EQ(noise_schedule(1, 0.05), std::vector<double>{0.0});
  EXPECT_EQ(noise_schedule(3, 0.1), (std::vector<double>{0.0, 0.1, 0.2}));
  EXPECT_EQ(noise_schedule(2, 0.05, 0.05), (std::vector<double>{0.05, 0.1}));
  EXPECT_THROW(noise_schedule(0, 0.05), Error);
  EXPECT_THROW(noise_schedule(3, -1), Error);
}

TEST(Compose, PreservesImageAndAddsBand) {
  const auto img = gradient(100, 100, 3);
  const auto out = compose_question_on_image(img, "Q?");
  const auto layout = layout_question(100, "Q?");
  ASSERT_EQ(layout.lines.size(), 1u);
  EXPECT_EQ(layout.band_height, 16u + 8u);
  EXPECT_EQ(out.width(), 100u);
  EXPECT_EQ(out.height(), 100u + layout.band_height);
  for (std::size_t i = 0; i < img.pixels().size(); ++i) {
    ASSERT_EQ(out.pixels()[i], img.pixels()[i]);
  }
  // Band: white background with some black glyph pixels.
  std::size_t black = 0;
  std::size_t white = 0;
  for (std::size_t i = img.pixels().size(); i < out.pixels().size(); ++i) {
    black += out.pixels()[i] == 0.0f;
    white += out.pixels()[i] == 1.0f;
  }
  EXPECT_GT(black, 0u);
  EXPECT_EQ(black + white, out.pixels().size() - img.pixels().size());
  EXPECT_GT(white, black);
}

TEST(Compose, WrapsLongQuestions) {
  // 100 px wide: (100 - 2*4) / 8 = 11 columns.
  const auto layout = layout_question(100, "Which planet in the solar system is shown here?");
  EXPECT_EQ(layout.chars_per_line, 11u);
  const std::vector<std::string> expected{"Which", "planet in", "the solar", "system is",
                                          "shown here?"};
  EXPECT_EQ(layout.lines, expected);
  EXPECT_EQ(layout.band_height, 5u * 16u + 8u);
  // Words longer than a line are split.
  const auto narrow = layout_question(20, "abcdef");
  EXPECT_EQ(narrow.chars_per_line, 1u);
  EXPECT_EQ(narrow.lines.size(), 6u);
}

TEST(Compose, Errors) {
  const auto img = gradient(10, 10, 1);
  EXPECT_THROW(compose_question_on_image(img, "   "), ConfigError);
  EXPECT_THROW(compose_question_on_image(img, ""), ConfigError);
}

TEST(Rephrasings, BracketedList) {
  const auto qs = parse_rephrasings(R"([1."Who painted this?",2."Which artist made this?"])");
  EXPECT_EQ(qs, (std::vector<std::string>{"Who painted this?", "Which artist made this?"}));
  const auto curly = parse_rephrasings("[1.“Who is it?”, 2.“Name the person.”]");
  EXPECT_EQ(curly, (std::vector<std::string>{"Who is it?", "Name the person."}));
}

TEST(Rephrasings, NumberedLines) {
  const auto qs = parse_rephrasings("Here you go:\n1. Q-a\n2. Q-b\n3) Q-c\n");
  EXPECT_EQ(qs, (std::vector<std::string>{"Q-a", "Q-b", "Q-c"}));
}

TEST(Rephrasings, ViaMockAndRetry) {
  Gateway gw;
  const auto ep = mock_endpoint(
      gw, "reph",
      script({rule({"generate 2 semantically"},
                   {{R"([1."Who painted this?",2."Which artist made this?"])", 1.0, {}}}),
              rule({"generate 3 semantically"}, {{R"([1."only one"])", 1.0, {}}})}),
      0);
  const auto qs = rephrase_questions(gw, ep, "Who painted this?", 2, {});
  EXPECT_EQ(qs.size(), 2u);
  EXPECT_EQ(gw.backend_calls(), 1u);
  try {
    rephrase_questions(gw, ep, "Who painted this?", 3, {});
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find("only one"), std::string::npos);
  }
  // One retry after the first short reply.
  EXPECT_EQ(gw.backend_calls(), 3u);
}

TEST(ImageCacheTest, StoresAndReloads) {
  TempDir dir;
  ImageCache cache(dir.path());
  const auto img = gradient(8, 8, 3);
  int made = 0;
  auto make = [&] {
    ++made;
    return add_gaussian_noise(img, 0.1, 3);
  };
  const auto a = cache.get_or_make("abc", "s0.1", make);
  const auto b = cache.get_or_make("abc", "s0.1", make);
  EXPECT_EQ(made, 1);
  EXPECT_EQ(a, b);
  EXPECT_TRUE(std::filesystem::exists(cache.path_for("abc", "s0.1")));
}
