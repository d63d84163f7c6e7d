#pragma once

#include <zlib.h>

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace capgp::testing {

struct GrayImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;
};

/// Minimal reader for 8-bit grayscale, filter-0 PNGs; validates chunk CRCs.
inline std::optional<GrayImage> decode_png_gray(const std::vector<std::uint8_t>& png) {
  static const std::uint8_t sig[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1A, '\n'};
  if (png.size() < 8 || !std::equal(sig, sig + 8, png.begin())) return std::nullopt;
  auto u32 = [&](std::size_t at) {
    return (std::uint32_t(png[at]) << 24) | (std::uint32_t(png[at + 1]) << 16) | (std::uint32_t(png[at + 2]) << 8) |
           std::uint32_t(png[at + 3]);
  };
  GrayImage img;
  std::vector<std::uint8_t> idat;
  std::size_t at = 8;
  bool ended = false;
  while (at + 12 <= png.size()) {
    const auto len = u32(at);
    const std::string type(png.begin() + at + 4, png.begin() + at + 8);
    if (at + 12 + len > png.size()) return std::nullopt;
    const auto crc = ::crc32(0L, png.data() + at + 4, len + 4);
    if (crc != u32(at + 8 + len)) return std::nullopt;
    const std::uint8_t* data = png.data() + at + 8;
    if (type == "IHDR") {
      img.width = static_cast<int>(u32(at + 8));
      img.height = static_cast<int>(u32(at + 12));
      if (data[8] != 8 || data[9] != 0 || data[12] != 0) return std::nullopt;
    } else if (type == "IDAT") {
      idat.insert(idat.end(), data, data + len);
    } else if (type == "IEND") {
      ended = true;
      break;
    }
    at += 12 + len;
  }
  if (!ended || img.width <= 0) return std::nullopt;
  uLongf raw_size = static_cast<uLongf>((img.width + 1) * img.height);
  std::vector<std::uint8_t> raw(raw_size);
  if (uncompress(raw.data(), &raw_size, idat.data(), static_cast<uLong>(idat.size())) != Z_OK) return std::nullopt;
  for (int y = 0; y < img.height; ++y) {
    const auto row = static_cast<std::size_t>(y) * (img.width + 1);
    if (raw[row] != 0) return std::nullopt;
    img.pixels.insert(img.pixels.end(), raw.begin() + row + 1, raw.begin() + row + 1 + img.width);
  }
  return img;
}

}  // namespace capgp::testing
