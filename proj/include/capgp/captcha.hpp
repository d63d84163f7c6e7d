#pragma once

#include <zlib.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <string>
#include <string_view>
#include <vector>

#include "capgp/error.hpp"
#include "capgp/rng.hpp"

namespace capgp::captcha {

inline constexpr std::string_view kLowercase = "abcdefghijklmnopqrstuvwxyz";

/// Random adjunctive string: M characters i.i.d. uniform over the alphabet.
inline std::string gen_string(std::string_view alphabet, std::size_t length, Rng& rng) {
  if (alphabet.empty()) throw Error(Errc::EmptyAlphabet, "alphabet has no characters");
  std::string out(length, '\0');
  for (auto& ch : out) ch = alphabet[rng.below(alphabet.size())];
  return out;
}

inline std::string gen_string(std::string_view alphabet, std::size_t length, std::uint64_t seed) {
  Rng rng(seed);
  return gen_string(alphabet, length, rng);
}

// --- bitmap font -----------------------------------------------------------

inline constexpr int kFontWidth = 5;
inline constexpr int kFontHeight = 7;

// One row per byte, bit 4 is the leftmost column.
inline constexpr std::array<std::array<std::uint8_t, kFontHeight>, 26> kFont = {{
    {0x00, 0x00, 0x0E, 0x01, 0x0F, 0x11, 0x0F},  // a
    {0x10, 0x10, 0x1E, 0x11, 0x11, 0x11, 0x1E},  // b
    {0x00, 0x00, 0x0E, 0x10, 0x10, 0x11, 0x0E},  // c
    {0x01, 0x01, 0x0F, 0x11, 0x11, 0x11, 0x0F},  // d
    {0x00, 0x00, 0x0E, 0x11, 0x1F, 0x10, 0x0E},  // e
    {0x06, 0x09, 0x08, 0x1C, 0x08, 0x08, 0x08},  // f
    {0x00, 0x0F, 0x11, 0x0F, 0x01, 0x11, 0x0E},  // g
    {0x10, 0x10, 0x16, 0x19, 0x11, 0x11, 0x11},  // h
    {0x04, 0x00, 0x0C, 0x04, 0x04, 0x04, 0x0E},  // i
    {0x02, 0x00, 0x06, 0x02, 0x02, 0x12, 0x0C},  // j
    {0x10, 0x10, 0x12, 0x14, 0x18, 0x14, 0x12},  // k
    {0x0C, 0x04, 0x04, 0x04, 0x04, 0x04, 0x0E},  // l
    {0x00, 0x00, 0x1A, 0x15, 0x15, 0x11, 0x11},  // m
    {0x00, 0x00, 0x16, 0x19, 0x11, 0x11, 0x11},  // n
    {0x00, 0x00, 0x0E, 0x11, 0x11, 0x11, 0x0E},  // o
    {0x00, 0x1E, 0x11, 0x11, 0x1E, 0x10, 0x10},  // p
    {0x00, 0x0F, 0x11, 0x11, 0x0F, 0x01, 0x01},  // q
    {0x00, 0x00, 0x16, 0x19, 0x10, 0x10, 0x10},  // r
    {0x00, 0x00, 0x0F, 0x10, 0x0E, 0x01, 0x1E},  // s
    {0x08, 0x08, 0x1C, 0x08, 0x08, 0x09, 0x06},  // t
    {0x00, 0x00, 0x11, 0x11, 0x11, 0x13, 0x0D},  // u
    {0x00, 0x00, 0x11, 0x11, 0x11, 0x0A, 0x04},  // v
    {0x00, 0x00, 0x11, 0x11, 0x15, 0x15, 0x0A},  // w
    {0x00, 0x00, 0x11, 0x0A, 0x04, 0x0A, 0x11},  // x
    {0x00, 0x11, 0x11, 0x0F, 0x01, 0x11, 0x0E},  // y
    {0x00, 0x00, 0x1F, 0x02, 0x04, 0x08, 0x1F},  // z
}};

inline constexpr std::uint8_t kInk = 0;
inline constexpr std::uint8_t kPaper = 255;
/// Blank border around the glyph strip, in pixels.
inline constexpr int kPad = 2;

inline bool supported_glyph(char c) noexcept { return c >= 'a' && c <= 'z'; }

/// A binary glyph mask, row-major, true = ink.
struct GlyphMask {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> bits;

  bool at(int x, int y) const { return bits[static_cast<std::size_t>(y) * width + x] != 0; }
};

/// Width of a glyph scaled to the given height (font aspect preserved).
inline int scaled_glyph_width(int glyph_height) {
  return std::max(1, static_cast<int>(std::lround(kFontWidth * glyph_height / double(kFontHeight))));
}

/// Nearest-neighbour scaling of the embedded font glyph for `c`.
inline GlyphMask glyph_mask(char c, int glyph_height) {
  if (!supported_glyph(c)) {
    throw Error(Errc::UnsupportedGlyph, std::string("no glyph for character '") + c + "'");
  }
  const auto& rows = kFont[static_cast<std::size_t>(c - 'a')];
  GlyphMask m;
  m.height = glyph_height;
  m.width = scaled_glyph_width(glyph_height);
  m.bits.resize(static_cast<std::size_t>(m.width) * m.height);
  for (int y = 0; y < m.height; ++y) {
    const int sy = y * kFontHeight / m.height;
    for (int x = 0; x < m.width; ++x) {
      const int sx = x * kFontWidth / m.width;
      const bool ink = (rows[static_cast<std::size_t>(sy)] >> (kFontWidth - 1 - sx)) & 1U;
      m.bits[static_cast<std::size_t>(y) * m.width + x] = ink ? 1 : 0;
    }
  }
  return m;
}

/// Rotates a mask about its centre into its tight axis-aligned box.
inline GlyphMask rotate_mask(const GlyphMask& src, double degrees) {
  if (degrees == 0.0) return src;
  const double rad = degrees * std::numbers::pi / 180.0;
  const double c = std::cos(rad);
  const double s = std::sin(rad);
  GlyphMask out;
  out.width = static_cast<int>(std::ceil(std::abs(src.width * c) + std::abs(src.height * s) - 1e-9));
  out.height = static_cast<int>(std::ceil(std::abs(src.width * s) + std::abs(src.height * c) - 1e-9));
  out.bits.assign(static_cast<std::size_t>(out.width) * out.height, 0);
  const double scx = src.width / 2.0, scy = src.height / 2.0;
  const double dcx = out.width / 2.0, dcy = out.height / 2.0;
  for (int y = 0; y < out.height; ++y) {
    for (int x = 0; x < out.width; ++x) {
      const double dx = x + 0.5 - dcx;
      const double dy = y + 0.5 - dcy;
      // inverse rotation back into source coordinates
      const double sx = c * dx + s * dy + scx;
      const double sy = -s * dx + c * dy + scy;
      const int ix = static_cast<int>(std::floor(sx));
      const int iy = static_cast<int>(std::floor(sy));
      if (ix >= 0 && iy >= 0 && ix < src.width && iy < src.height && src.at(ix, iy)) {
        out.bits[static_cast<std::size_t>(y) * out.width + x] = 1;
      }
    }
  }
  return out;
}

// --- rendering --------------------------------------------------------------

struct RenderParams {
  int glyph_height = 14;
  double rotation_jitter = 15.0;  // degrees
  double wave_amplitude = 2.0;    // pixels
  double wave_period = 20.0;      // pixels; 0 disables the wave
  int overlap = 3;                // pixels
  double noise_density = 0.04;
  /// Final strip width; 0 keeps the natural packed width.
  int fit_width = 0;
  std::uint64_t seed = 0;

  static RenderParams identity(int glyph_height = 14) {
    RenderParams p;
    p.glyph_height = glyph_height;
    p.rotation_jitter = 0;
    p.wave_amplitude = 0;
    p.wave_period = 0;
    p.overlap = 0;
    p.noise_density = 0;
    return p;
  }

  void validate() const {
    if (glyph_height < 1) throw Error(Errc::InvalidRenderParams, "glyph_height must be >= 1");
    if (rotation_jitter < 0 || rotation_jitter > 90) {
      throw Error(Errc::InvalidRenderParams, "rotation_jitter must be in [0, 90]");
    }
    if (wave_amplitude < 0 || wave_period < 0 || overlap < 0 || fit_width < 0) {
      throw Error(Errc::InvalidRenderParams, "magnitudes must be non-negative");
    }
    if (!(noise_density >= 0.0 && noise_density <= 0.25)) {
      throw Error(Errc::InvalidRenderParams, "noise_density must be in [0, 0.25]");
    }
  }
};

struct Box {
  int x = 0, y = 0, width = 0, height = 0;
  friend bool operator==(const Box&, const Box&) = default;
};

struct RenderedCaptcha {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;  // row-major grayscale
  std::string text;
  std::vector<Box> glyph_boxes;
  std::size_t flipped_pixels = 0;

  std::uint8_t at(int x, int y) const { return pixels[static_cast<std::size_t>(y) * width + x]; }
  friend bool operator==(const RenderedCaptcha&, const RenderedCaptcha&) = default;
};

/// Renders `text` with the embedded font, then applies per-glyph rotation,
/// a sinusoidal column displacement, overlapping packing, optional width
/// fitting and salt-and-pepper noise. Pure in (text, params).
inline RenderedCaptcha render(std::string_view text, const RenderParams& params) {
  params.validate();
  if (text.empty()) throw Error(Errc::UnsupportedGlyph, "empty text");

  Rng geometry(derive_seed(params.seed, 1));
  Rng noise(derive_seed(params.seed, 2));

  std::vector<GlyphMask> glyphs;
  glyphs.reserve(text.size());
  for (char c : text) {
    auto mask = glyph_mask(c, params.glyph_height);
    const double angle =
        params.rotation_jitter > 0 ? geometry.uniform(-params.rotation_jitter, params.rotation_jitter) : 0.0;
    glyphs.push_back(rotate_mask(mask, angle));
  }

  const bool wave = params.wave_amplitude > 0 && params.wave_period > 0;
  const int wave_margin = wave ? static_cast<int>(std::ceil(params.wave_amplitude)) : 0;
  int max_h = 0;
  for (const auto& g : glyphs) max_h = std::max(max_h, g.height);

  std::vector<int> xs;
  int cursor = kPad;
  int right = 0;
  for (const auto& g : glyphs) {
    xs.push_back(cursor);
    right = std::max(right, cursor + g.width);
    cursor += std::max(1, g.width - params.overlap);
  }

  RenderedCaptcha out;
  out.text = std::string(text);
  out.width = right + kPad;
  out.height = max_h + 2 * wave_margin + 2 * kPad;
  std::vector<std::uint8_t> canvas(static_cast<std::size_t>(out.width) * out.height, kPaper);

  for (std::size_t i = 0; i < glyphs.size(); ++i) {
    const auto& g = glyphs[i];
    const int gx = xs[i];
    const int gy = kPad + wave_margin + (max_h - g.height) / 2;
    for (int y = 0; y < g.height; ++y) {
      for (int x = 0; x < g.width; ++x) {
        if (!g.at(x, y)) continue;
        const int cx = gx + x;
        int shift = 0;
        if (wave) {
          shift = static_cast<int>(std::lround(params.wave_amplitude *
                                               std::sin(2.0 * std::numbers::pi * cx / params.wave_period)));
        }
        canvas[static_cast<std::size_t>(gy + y + shift) * out.width + cx] = kInk;
      }
    }
    out.glyph_boxes.push_back({gx, gy - wave_margin, g.width, g.height + 2 * wave_margin});
  }

  if (params.fit_width > 0 && params.fit_width != out.width) {
    const int w = out.width;
    const int fw = params.fit_width;
    std::vector<std::uint8_t> fitted(static_cast<std::size_t>(fw) * out.height);
    for (int y = 0; y < out.height; ++y) {
      for (int x = 0; x < fw; ++x) {
        // coverage-preserving: take the darkest source pixel of the span
        const int s0 = x * w / fw;
        const int s1 = std::max(s0 + 1, (x + 1) * w / fw);
        std::uint8_t v = kPaper;
        for (int s = s0; s < s1; ++s) v = std::min(v, canvas[static_cast<std::size_t>(y) * w + s]);
        fitted[static_cast<std::size_t>(y) * fw + x] = v;
      }
    }
    for (auto& b : out.glyph_boxes) {
      const int x0 = b.x * fw / w;
      const int x1 = std::min(fw, static_cast<int>((static_cast<long>(b.x + b.width) * fw + w - 1) / w));
      b.x = x0;
      b.width = std::max(1, x1 - x0);
    }
    canvas = std::move(fitted);
    out.width = fw;
  }

  if (params.noise_density > 0) {
    for (auto& px : canvas) {
      if (noise.unit() < params.noise_density) {
        px = static_cast<std::uint8_t>(kPaper - px);
        ++out.flipped_pixels;
      }
    }
  }
  out.pixels = std::move(canvas);
  return out;
}

// --- PNG --------------------------------------------------------------------

namespace detail {

inline void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  out.push_back(static_cast<std::uint8_t>(v >> 24));
  out.push_back(static_cast<std::uint8_t>(v >> 16));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
  out.push_back(static_cast<std::uint8_t>(v));
}

inline void put_chunk(std::vector<std::uint8_t>& out, const char (&type)[5], const std::vector<std::uint8_t>& data) {
  put_u32(out, static_cast<std::uint32_t>(data.size()));
  const std::size_t start = out.size();
  out.insert(out.end(), type, type + 4);
  out.insert(out.end(), data.begin(), data.end());
  const auto crc = ::crc32(0L, out.data() + start, static_cast<uInt>(out.size() - start));
  put_u32(out, static_cast<std::uint32_t>(crc));
}

}  // namespace detail

/// 8-bit grayscale, non-interlaced PNG of a row-major pixel buffer.
inline std::vector<std::uint8_t> encode_png(int width, int height, const std::vector<std::uint8_t>& pixels) {
  if (width <= 0 || height <= 0 || pixels.size() != static_cast<std::size_t>(width) * height) {
    throw Error(Errc::InvalidRenderParams, "pixel buffer does not match dimensions");
  }
  std::vector<std::uint8_t> out = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1A, '\n'};

  std::vector<std::uint8_t> ihdr;
  detail::put_u32(ihdr, static_cast<std::uint32_t>(width));
  detail::put_u32(ihdr, static_cast<std::uint32_t>(height));
  ihdr.insert(ihdr.end(), {8, 0, 0, 0, 0});  // depth, grayscale, deflate, filter, no interlace
  detail::put_chunk(out, "IHDR", ihdr);

  std::vector<std::uint8_t> raw;
  raw.reserve(static_cast<std::size_t>(width + 1) * height);
  for (int y = 0; y < height; ++y) {
    raw.push_back(0);
    const auto row = pixels.begin() + static_cast<std::ptrdiff_t>(y) * width;
    raw.insert(raw.end(), row, row + width);
  }
  uLongf packed_size = compressBound(static_cast<uLong>(raw.size()));
  std::vector<std::uint8_t> packed(packed_size);
  if (compress2(packed.data(), &packed_size, raw.data(), static_cast<uLong>(raw.size()), 9) != Z_OK) {
    throw Error(Errc::IoError, "deflate failed");
  }
  packed.resize(packed_size);
  detail::put_chunk(out, "IDAT", packed);
  detail::put_chunk(out, "IEND", {});
  return out;
}

inline std::vector<std::uint8_t> encode_png(const RenderedCaptcha& img) {
  return encode_png(img.width, img.height, img.pixels);
}

}  // namespace capgp::captcha
