#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "capgp/captcha.hpp"
#include "capgp/rng.hpp"
#include "capgp/scheme.hpp"

namespace capgp::service {

inline constexpr int kTileSize = 60;

inline std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

/// Placeholder picture for an image id: a mirrored 6x6 block pattern with
/// two grey levels, 60x60 pixels, stable per id.
inline std::vector<std::uint8_t> placeholder_tile(const ImageId& id) {
  const std::uint64_t h = mix64(fnv1a(id));
  const std::uint8_t fg = static_cast<std::uint8_t>(30 + (h >> 56) % 120);
  const std::uint8_t bg = static_cast<std::uint8_t>(200 + (h >> 48) % 50);
  constexpr int cells = 6;
  constexpr int cell = kTileSize / cells;
  std::vector<std::uint8_t> px(static_cast<std::size_t>(kTileSize) * kTileSize, bg);
  for (int cy = 0; cy < cells; ++cy) {
    for (int cx = 0; cx < cells / 2; ++cx) {
      if (((h >> (cy * 3 + cx)) & 1U) == 0) continue;
      for (int mirror : {cx, cells - 1 - cx}) {
        for (int y = cy * cell; y < (cy + 1) * cell; ++y) {
          for (int x = mirror * cell; x < (mirror + 1) * cell; ++x) {
            px[static_cast<std::size_t>(y) * kTileSize + x] = fg;
          }
        }
      }
    }
  }
  return px;
}

/// Image source: either PNG files from a directory (id = file stem) or
/// generated placeholders named img00, img01, ...
class ImageLibrary {
 public:
  ImageLibrary(const std::string& dir, std::size_t placeholder_count) : dir_(dir) {
    if (dir_.empty()) {
      ids_ = numbered_pool(placeholder_count);
      return;
    }
    namespace fs = std::filesystem;
    if (!fs::is_directory(dir_)) throw Error(Errc::IoError, "image_dir '" + dir_ + "' is not a directory");
    for (const auto& entry : fs::directory_iterator(dir_)) {
      if (entry.is_regular_file() && entry.path().extension() == ".png") ids_.push_back(entry.path().stem().string());
    }
    std::sort(ids_.begin(), ids_.end());
  }

  const std::vector<ImageId>& ids() const { return ids_; }

  bool contains(const ImageId& id) const { return std::binary_search(ids_.begin(), ids_.end(), id); }

  std::vector<std::uint8_t> png(const ImageId& id) const {
    if (!contains(id)) throw Error(Errc::UnknownImageId, "no image '" + id + "'");
    if (dir_.empty()) return captcha::encode_png(kTileSize, kTileSize, placeholder_tile(id));
    std::ifstream in(std::filesystem::path(dir_) / (id + ".png"), std::ios::binary);
    if (!in) throw Error(Errc::IoError, "cannot read image '" + id + "'");
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  }

 private:
  std::string dir_;
  std::vector<ImageId> ids_;
};

}  // namespace capgp::service
