#include <gtest/gtest.h>

#include <array>
#include <cmath>

#include "capgp/captcha.hpp"
#include "png_decode.hpp"

namespace capgp::captcha {
namespace {

TEST(GenString, DeterministicPerSeed) {
  EXPECT_EQ(gen_string(kLowercase, 8, 99), gen_string(kLowercase, 8, 99));
  EXPECT_NE(gen_string(kLowercase, 8, 99), gen_string(kLowercase, 8, 100));
  EXPECT_EQ(gen_string(kLowercase, 8, 99).size(), 8u);
}

TEST(GenString, SingletonAlphabet) { EXPECT_EQ(gen_string("a", 4, 12345), "aaaa"); }

TEST(GenString, EmptyAlphabet) {
  try {
    gen_string("", 4, 1);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::EmptyAlphabet);
  }
}

TEST(GenString, LetterFrequenciesAreUniform) {
  const std::size_t draws = 1'000'000;
  std::array<std::size_t, 26> counts{};
  Rng rng(31337);
  for (std::size_t i = 0; i < draws / 8; ++i) {
    for (char c : gen_string(kLowercase, 8, rng)) ++counts[static_cast<std::size_t>(c - 'a')];
  }
  const double p = 1.0 / 26;
  const double expect = draws * p;
  const double sigma = std::sqrt(draws * p * (1 - p));
  double chi2 = 0;
  for (auto c : counts) {
    EXPECT_NEAR(static_cast<double>(c), expect, 3 * sigma);
    chi2 += (c - expect) * (c - expect) / expect;
  }
  EXPECT_LT(chi2, 52.62);  // chi-square, 25 dof, p = 0.001
}

/// Independent compositing of undistorted glyphs from the font table.
std::vector<std::uint8_t> reference_strip(std::string_view text, int h, int& width, int& height) {
  const int w = static_cast<int>(std::lround(5.0 * h / 7.0));
  width = 2 * kPad + w * static_cast<int>(text.size());
  height = 2 * kPad + h;
  std::vector<std::uint8_t> px(static_cast<std::size_t>(width) * height, 255);
  for (std::size_t i = 0; i < text.size(); ++i) {
    const auto& rows = kFont[static_cast<std::size_t>(text[i] - 'a')];
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        const int fx = x * 5 / w, fy = y * 7 / h;
        if ((rows[static_cast<std::size_t>(fy)] >> (4 - fx)) & 1) {
          px[static_cast<std::size_t>(kPad + y) * width + kPad + static_cast<int>(i) * w + x] = 0;
        }
      }
    }
  }
  return px;
}

TEST(Render, IdentityTransformIsFontCompositing) {
  for (int h : {7, 14, 21}) {
    const auto img = render("qarwrxex", RenderParams::identity(h));
    int w = 0, ht = 0;
    const auto ref = reference_strip("qarwrxex", h, w, ht);
    ASSERT_EQ(img.width, w);
    ASSERT_EQ(img.height, ht);
    EXPECT_EQ(img.pixels, ref) << "glyph height " << h;
  }
}

TEST(Render, DeterministicPerTextAndParams) {
  RenderParams p;
  p.seed = 7;
  const auto a = render("qarwrxex", p);
  const auto b = render("qarwrxex", p);
  EXPECT_EQ(a.pixels, b.pixels);
  p.seed = 8;
  EXPECT_NE(render("qarwrxex", p).pixels, a.pixels);
}

TEST(Render, NoiseCountIsBinomial) {
  RenderParams p;
  p.seed = 11;
  p.noise_density = 0.1;
  const auto noisy = render("mvgqqebhxz", p);
  p.noise_density = 0;
  const auto clean = render("mvgqqebhxz", p);
  ASSERT_EQ(noisy.pixels.size(), clean.pixels.size());
  std::size_t flipped = 0;
  for (std::size_t i = 0; i < clean.pixels.size(); ++i) flipped += noisy.pixels[i] != clean.pixels[i];
  EXPECT_EQ(flipped, noisy.flipped_pixels);
  const double n = static_cast<double>(clean.pixels.size());
  EXPECT_NEAR(static_cast<double>(flipped), 0.1 * n, 3 * std::sqrt(n * 0.1 * 0.9));
}

TEST(Render, FullAlphabetAndUnsupportedGlyphs) {
  EXPECT_NO_THROW(render(kLowercase, RenderParams{}));
  for (std::string bad : {"Abc", "ab1", "a b"}) {
    try {
      render(bad, RenderParams{});
      FAIL() << bad;
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), Errc::UnsupportedGlyph);
    }
  }
  EXPECT_THROW(render("", RenderParams{}), Error);
}

TEST(Render, RejectsOutOfRangeParams) {
  RenderParams p;
  p.noise_density = 0.3;
  EXPECT_THROW(render("abc", p), Error);
  p = RenderParams{};
  p.overlap = -1;
  EXPECT_THROW(render("abc", p), Error);
  p = RenderParams{};
  p.wave_amplitude = -0.5;
  EXPECT_THROW(render("abc", p), Error);
}

TEST(Render, FitsUnderSixtyPixelCell) {
  RenderParams p;
  p.fit_width = 60;
  p.seed = 3;
  const auto img = render("qarwrxex", p);
  EXPECT_EQ(img.width, 60);
  EXPECT_LE(img.height, 60);
}

TEST(Render, CanvasBoundsUnderRandomParams) {
  Rng rng(4242);
  for (int trial = 0; trial < 400; ++trial) {
    RenderParams p;
    p.glyph_height = 5 + static_cast<int>(rng.below(30));
    p.rotation_jitter = rng.uniform(0, 90);
    p.wave_amplitude = rng.uniform(0, 8);
    p.wave_period = rng.below(4) == 0 ? 0 : rng.uniform(1, 40);
    p.overlap = static_cast<int>(rng.below(25));
    p.noise_density = rng.uniform(0, 0.25);
    p.fit_width = rng.below(3) == 0 ? 20 + static_cast<int>(rng.below(100)) : 0;
    p.seed = rng.next();
    const auto text = gen_string(kLowercase, 1 + rng.below(12), rng);
    const auto img = render(text, p);
    ASSERT_EQ(img.pixels.size(), static_cast<std::size_t>(img.width) * img.height);
    ASSERT_EQ(img.glyph_boxes.size(), text.size());
    for (const auto& b : img.glyph_boxes) {
      ASSERT_GE(b.x, 0);
      ASSERT_GE(b.y, 0);
      ASSERT_LE(b.x + b.width, img.width);
      ASSERT_LE(b.y + b.height, img.height);
    }
  }
}

TEST(Png, EncodesGrayscaleLosslessly) {
  RenderParams p;
  p.seed = 9;
  const auto img = render("heeqreso", p);
  const auto png = encode_png(img);
  const auto decoded = testing::decode_png_gray(png);
  ASSERT_TRUE(decoded.has_value());
  EXPECT_EQ(decoded->width, img.width);
  EXPECT_EQ(decoded->height, img.height);
  EXPECT_EQ(decoded->pixels, img.pixels);
  EXPECT_EQ(png, encode_png(render("heeqreso", p)));
}

TEST(Png, RejectsMismatchedBuffer) { EXPECT_THROW(encode_png(3, 3, std::vector<std::uint8_t>(8)), Error); }

}  // namespace
}  // namespace capgp::captcha
