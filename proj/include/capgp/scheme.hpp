#pragma once

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <cstdio>
#include <numeric>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "capgp/captcha.hpp"
#include "capgp/error.hpp"
#include "capgp/rng.hpp"

namespace capgp {

using ImageId = std::string;
using Clock = std::chrono::system_clock;
using TimePoint = Clock::time_point;

/// Accepted-string enumeration walks all K! block orders; this bounds it.
inline constexpr std::size_t kMaxPassImages = 10;

/// Pool of generated identifiers "img00", "img01", ...
inline std::vector<ImageId> numbered_pool(std::size_t count) {
  std::vector<ImageId> pool;
  pool.reserve(count);
  const int digits = count > 100 ? 3 : 2;
  for (std::size_t i = 0; i < count; ++i) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "img%0*zu", digits, i);
    pool.emplace_back(buf);
  }
  return pool;
}

struct SchemeParams {
  std::size_t grid_size = 50;
  std::size_t string_len = 8;
  std::string alphabet = std::string(captcha::kLowercase);
  std::size_t min_pass_images = 3;
  std::size_t rounds = 1;
  std::vector<ImageId> image_pool = numbered_pool(50);
  std::chrono::seconds challenge_ttl{300};

  /// Parameterisation with a pool of exactly `grid` numbered images.
  static SchemeParams with_grid(std::size_t grid, std::size_t string_len = 8) {
    SchemeParams p;
    p.grid_size = grid;
    p.string_len = string_len;
    p.image_pool = numbered_pool(grid);
    return p;
  }

  std::size_t alphabet_size() const { return alphabet.size(); }

  void validate() const {
    if (string_len < 1) throw Error(Errc::InvalidParams, "string_len must be >= 1");
    if (rounds < 1) throw Error(Errc::InvalidParams, "rounds must be >= 1");
    if (alphabet.size() < 2) throw Error(Errc::InvalidParams, "alphabet needs at least two characters");
    std::set<char> distinct(alphabet.begin(), alphabet.end());
    if (distinct.size() != alphabet.size()) throw Error(Errc::InvalidParams, "alphabet characters must be distinct");
    if (grid_size < min_pass_images) throw Error(Errc::InvalidParams, "grid_size below min_pass_images");
    if (image_pool.size() < grid_size) throw Error(Errc::PoolTooSmall, "image pool smaller than grid");
    std::set<ImageId> ids(image_pool.begin(), image_pool.end());
    if (ids.size() != image_pool.size()) throw Error(Errc::InvalidParams, "image pool has duplicate identifiers");
    // rejection sampling of distinct strings needs A^M >= N
    double space = 1;
    for (std::size_t i = 0; i < string_len && space < 1e18; ++i) space *= static_cast<double>(alphabet.size());
    if (space < static_cast<double>(grid_size)) {
      throw Error(Errc::InvalidParams, "alphabet^string_len too small for distinct strings per grid");
    }
  }
};

/// A user's secret: pass-images and, per image, the 1-based pass-positions
/// (kept sorted ascending, without duplicates).
struct PasswordProfile {
  std::string user_id;
  std::vector<ImageId> pass_images;
  std::vector<std::vector<int>> positions;

  std::size_t pass_image_count() const { return pass_images.size(); }

  std::size_t entered_length() const {
    std::size_t total = 0;
    for (const auto& p : positions) total += p.size();
    return total;
  }

  std::vector<std::size_t> block_lengths() const {
    std::vector<std::size_t> out;
    for (const auto& p : positions) out.push_back(p.size());
    return out;
  }

  friend bool operator==(const PasswordProfile&, const PasswordProfile&) = default;
};

inline PasswordProfile create_profile(std::string user_id, std::vector<ImageId> pass_images,
                                      std::vector<std::vector<int>> positions, const SchemeParams& params) {
  if (pass_images.size() != positions.size()) {
    throw Error(Errc::ProfileShapeMismatch, "one position set is required per pass-image");
  }
  if (pass_images.size() < params.min_pass_images) {
    throw Error(Errc::TooFewPassImages, "need at least " + std::to_string(params.min_pass_images) + " pass-images");
  }
  std::unordered_set<ImageId> seen;
  const std::unordered_set<ImageId> pool(params.image_pool.begin(), params.image_pool.end());
  for (const auto& id : pass_images) {
    if (!seen.insert(id).second) throw Error(Errc::DuplicatePassImage, "pass-image '" + id + "' repeated");
    if (!pool.contains(id)) throw Error(Errc::UnknownImageId, "image '" + id + "' not in pool");
  }
  const int m = static_cast<int>(params.string_len);
  for (auto& set : positions) {
    if (set.empty()) throw Error(Errc::EmptyPositionSet, "every pass-image needs a pass-position");
    for (int p : set) {
      if (p < 1 || p > m) {
        throw Error(Errc::PositionOutOfRange, "position " + std::to_string(p) + " outside [1, " + std::to_string(m) + "]");
      }
    }
    std::sort(set.begin(), set.end());
    set.erase(std::unique(set.begin(), set.end()), set.end());
  }
  return PasswordProfile{std::move(user_id), std::move(pass_images), std::move(positions)};
}

/// Basic-scheme profile: every position of every pass-image is typed.
inline PasswordProfile create_basic_profile(std::string user_id, std::vector<ImageId> pass_images,
                                            const SchemeParams& params) {
  std::vector<int> full(params.string_len);
  std::iota(full.begin(), full.end(), 1);
  std::vector<std::vector<int>> positions(pass_images.size(), full);
  return create_profile(std::move(user_id), std::move(pass_images), std::move(positions), params);
}

struct GridCell {
  ImageId image_id;
  std::string captcha_text;
  std::size_t slot_index = 0;
  friend bool operator==(const GridCell&, const GridCell&) = default;
};

struct Challenge {
  std::string challenge_id;
  std::vector<GridCell> cells;
  std::uint64_t rng_seed = 0;
  TimePoint created_at{};
  bool consumed = false;

  const GridCell* find(const ImageId& id) const {
    for (const auto& c : cells) {
      if (c.image_id == id) return &c;
    }
    return nullptr;
  }

  friend bool operator==(const Challenge&, const Challenge&) = default;
};

inline std::string challenge_id_for_seed(std::uint64_t seed) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%016llx%016llx", static_cast<unsigned long long>(mix64(seed)),
                static_cast<unsigned long long>(mix64(~seed)));
  return buf;
}

/// One login round: all pass-images plus decoys from the pool in a shuffled
/// grid, each with a fresh string; all strings distinct within the grid.
inline Challenge generate_challenge(const PasswordProfile& profile, const SchemeParams& params, std::uint64_t seed,
                                    TimePoint created_at = {}) {
  if (params.image_pool.size() < params.grid_size) {
    throw Error(Errc::PoolTooSmall, "image pool smaller than grid");
  }
  params.validate();
  if (profile.pass_images.size() > params.grid_size) {
    throw Error(Errc::InvalidParams, "profile has more pass-images than grid cells");
  }
  Rng rng(seed);
  const std::unordered_set<ImageId> secret(profile.pass_images.begin(), profile.pass_images.end());
  std::vector<ImageId> decoy_pool;
  for (const auto& id : params.image_pool) {
    if (!secret.contains(id)) decoy_pool.push_back(id);
  }
  const std::size_t decoys = params.grid_size - profile.pass_images.size();
  // partial Fisher-Yates: first `decoys` entries become the sample
  for (std::size_t i = 0; i < decoys; ++i) {
    std::swap(decoy_pool[i], decoy_pool[i + rng.below(decoy_pool.size() - i)]);
  }
  std::vector<ImageId> layout(profile.pass_images);
  layout.insert(layout.end(), decoy_pool.begin(), decoy_pool.begin() + static_cast<std::ptrdiff_t>(decoys));
  rng.shuffle(std::span<ImageId>(layout));

  Challenge ch;
  ch.rng_seed = seed;
  ch.challenge_id = challenge_id_for_seed(seed);
  ch.created_at = created_at;
  std::unordered_set<std::string> used;
  for (std::size_t slot = 0; slot < layout.size(); ++slot) {
    std::string text;
    do {
      text = captcha::gen_string(params.alphabet, params.string_len, rng);
    } while (used.contains(text));
    used.insert(text);
    ch.cells.push_back(GridCell{layout[slot], std::move(text), slot});
  }
  return ch;
}

/// Per pass-image code: the characters at its pass-positions, ascending.
inline std::vector<std::string> expected_codes(const PasswordProfile& profile, const Challenge& challenge) {
  std::vector<std::string> codes;
  codes.reserve(profile.pass_images.size());
  for (std::size_t i = 0; i < profile.pass_images.size(); ++i) {
    const GridCell* cell = challenge.find(profile.pass_images[i]);
    if (cell == nullptr) throw Error(Errc::PassImageMissing, "pass-image '" + profile.pass_images[i] + "' not shown");
    std::string code;
    for (int p : profile.positions[i]) {
      if (p < 1 || static_cast<std::size_t>(p) > cell->captcha_text.size()) {
        throw Error(Errc::PositionOutOfRange, "position beyond challenge string");
      }
      code.push_back(cell->captcha_text[static_cast<std::size_t>(p - 1)]);
    }
    codes.push_back(std::move(code));
  }
  return codes;
}

namespace detail {

inline void check_permutation_cap(std::size_t k) {
  if (k > kMaxPassImages) {
    throw Error(Errc::PermutationCapExceeded, std::to_string(k) + " pass-images exceeds cap of " +
                                                  std::to_string(kMaxPassImages));
  }
}

/// Calls visit(concatenation) for every ordering of the blocks; stops early
/// when visit returns true.
template <typename Visit>
bool for_each_ordering(const std::vector<std::string>& blocks, Visit&& visit) {
  check_permutation_cap(blocks.size());
  std::vector<std::size_t> order(blocks.size());
  std::iota(order.begin(), order.end(), 0);
  std::string joined;
  do {
    joined.clear();
    for (auto i : order) joined += blocks[i];
    if (visit(joined)) return true;
  } while (std::next_permutation(order.begin(), order.end()));
  return false;
}

}  // namespace detail

/// Every concatenation of the codes under all orders of the pass-images,
/// sorted and deduplicated.
inline std::vector<std::string> accepted_strings(const PasswordProfile& profile, const Challenge& challenge) {
  detail::check_permutation_cap(profile.pass_images.size());
  const auto codes = expected_codes(profile, challenge);
  std::set<std::string> out;
  detail::for_each_ordering(codes, [&](const std::string& s) {
    out.insert(s);
    return false;
  });
  return {out.begin(), out.end()};
}

/// Non-consuming membership test against the accepted set.
inline bool accepts(const PasswordProfile& profile, const Challenge& challenge, std::string_view typed) {
  detail::check_permutation_cap(profile.pass_images.size());
  const auto codes = expected_codes(profile, challenge);
  if (typed.size() != profile.entered_length()) return false;
  return detail::for_each_ordering(codes, [&](const std::string& s) { return s == typed; });
}

enum class RejectReason { None, WrongLength, WrongContent };

constexpr std::string_view to_string(RejectReason r) noexcept {
  switch (r) {
    case RejectReason::None: return "none";
    case RejectReason::WrongLength: return "wrong-length";
    case RejectReason::WrongContent: return "wrong-content";
  }
  return "unknown";
}

struct VerifyResult {
  bool accepted = false;
  RejectReason reason = RejectReason::None;  // log-only detail
};

/// Single-use check of a typed string. The challenge is consumed by every
/// evaluated attempt, accepted or not.
inline VerifyResult verify(const PasswordProfile& profile, Challenge& challenge, std::string_view typed,
                           const SchemeParams& params, TimePoint now) {
  if (challenge.consumed) throw Error(Errc::ChallengeConsumed, "challenge already used");
  if (now - challenge.created_at > params.challenge_ttl) {
    challenge.consumed = true;
    throw Error(Errc::ChallengeExpired, "challenge older than ttl");
  }
  for (const auto& id : profile.pass_images) {
    if (challenge.find(id) == nullptr) throw Error(Errc::PassImageMissing, "pass-image '" + id + "' not shown");
  }
  challenge.consumed = true;
  if (typed.size() != profile.entered_length()) return {false, RejectReason::WrongLength};
  if (accepts(profile, challenge, typed)) return {true, RejectReason::None};
  return {false, RejectReason::WrongContent};
}

inline VerifyResult verify(const PasswordProfile& profile, Challenge& challenge, std::string_view typed,
                           const SchemeParams& params) {
  return verify(profile, challenge, typed, params, challenge.created_at);
}

/// Login over S rounds: every round is evaluated (and consumed); accepted
/// only when all rounds accept.
inline VerifyResult verify_multi_round(const PasswordProfile& profile, std::span<Challenge> challenges,
                                       std::span<const std::string> typed, const SchemeParams& params,
                                       TimePoint now) {
  if (challenges.size() != typed.size() || challenges.size() != params.rounds) {
    throw Error(Errc::RoundCountMismatch, "expected " + std::to_string(params.rounds) + " rounds, got " +
                                              std::to_string(challenges.size()) + " challenges and " +
                                              std::to_string(typed.size()) + " entries");
  }
  VerifyResult overall{true, RejectReason::None};
  for (std::size_t i = 0; i < challenges.size(); ++i) {
    const auto r = verify(profile, challenges[i], typed[i], params, now);
    if (!r.accepted && overall.accepted) overall = r;
  }
  return overall;
}

inline VerifyResult verify_multi_round(const PasswordProfile& profile, std::span<Challenge> challenges,
                                       std::span<const std::string> typed, const SchemeParams& params) {
  return verify_multi_round(profile, challenges, typed, params,
                            challenges.empty() ? TimePoint{} : challenges.front().created_at);
}

}  // namespace capgp
