#pragma once

#include <algorithm>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "capgp/rng.hpp"
#include "capgp/scheme.hpp"

namespace capgp::testing {

/// Challenge with hand-picked strings, in slot order.
inline Challenge make_challenge(const std::vector<std::pair<ImageId, std::string>>& cells) {
  Challenge ch;
  ch.challenge_id = "fixed";
  for (std::size_t i = 0; i < cells.size(); ++i) ch.cells.push_back({cells[i].first, cells[i].second, i});
  return ch;
}

/// Worked example: user 'ghc' with three pass-images and fixed grid strings.
/// The second image's string 'heeqreso' gives code 'qeo' at positions (4, 6, 8).
inline SchemeParams worked_example_params() { return SchemeParams::with_grid(50, 8); }

inline PasswordProfile worked_example_profile() {
  return create_profile("ghc", {"img03", "img17", "img41"}, {{1, 2, 4}, {4, 6, 8}, {3, 5}}, worked_example_params());
}

inline Challenge worked_example_challenge() {
  std::vector<std::pair<ImageId, std::string>> cells = {
      {"img03", "qarwrxex"}, {"img17", "heeqreso"}, {"img41", "mvgqqebh"}, {"img00", "zzzzzzzz"}, {"img01", "yyyyyyyy"}};
  return make_challenge(cells);
}

/// Random valid profile with K in [k_lo, k_hi] and random position sets.
inline PasswordProfile random_profile(Rng& rng, const SchemeParams& params, std::size_t k_lo, std::size_t k_hi,
                                      std::size_t max_positions = 0) {
  const std::size_t k = k_lo + rng.below(k_hi - k_lo + 1);
  std::vector<ImageId> pool = params.image_pool;
  std::vector<ImageId> images;
  for (std::size_t i = 0; i < k; ++i) {
    std::swap(pool[i], pool[i + rng.below(pool.size() - i)]);
    images.push_back(pool[i]);
  }
  const std::size_t m = params.string_len;
  const std::size_t cap = max_positions == 0 ? m : std::min(m, max_positions);
  std::vector<std::vector<int>> positions;
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t n = 1 + rng.below(cap);
    std::vector<int> all(m);
    for (std::size_t j = 0; j < m; ++j) all[j] = static_cast<int>(j + 1);
    for (std::size_t j = 0; j < n; ++j) std::swap(all[j], all[j + rng.below(m - j)]);
    positions.emplace_back(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(n));
  }
  return create_profile("u", std::move(images), std::move(positions), params);
}

/// Reference enumeration of block concatenations: recursively pick any
/// unused block next. Independent of the library's ordering walk.
inline void concat_all(const std::vector<std::string>& blocks, std::vector<bool>& used, std::string& prefix,
                       std::set<std::string>& out) {
  bool any = false;
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    if (used[i]) continue;
    any = true;
    used[i] = true;
    const auto len = prefix.size();
    prefix += blocks[i];
    concat_all(blocks, used, prefix, out);
    prefix.resize(len);
    used[i] = false;
  }
  if (!any) out.insert(prefix);
}

inline std::set<std::string> reference_accepted(const PasswordProfile& profile, const Challenge& ch) {
  std::vector<std::string> blocks;
  for (std::size_t i = 0; i < profile.pass_images.size(); ++i) {
    const GridCell* cell = ch.find(profile.pass_images[i]);
    std::string b;
    for (int p : profile.positions[i]) b.push_back(cell->captcha_text[static_cast<std::size_t>(p - 1)]);
    blocks.push_back(b);
  }
  std::vector<bool> used(blocks.size(), false);
  std::string prefix;
  std::set<std::string> out;
  concat_all(blocks, used, prefix, out);
  return out;
}

}  // namespace capgp::testing
