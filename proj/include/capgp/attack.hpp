#pragma once

#include <algorithm>
#include <array>
#include <compare>
#include <cstdint>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "capgp/combinatorics.hpp"
#include "capgp/error.hpp"
#include "capgp/rng.hpp"
#include "capgp/scheme.hpp"

namespace capgp::attack {

/// What spyware records from one successful session.
struct Observation {
  std::vector<std::pair<ImageId, std::string>> cells;  // slot order as displayed
  std::string typed;
  std::vector<std::int64_t> keystroke_ms;  // optional, one per typed character
  /// Side-channel alignment: typed block t belongs to pass-image slot
  /// block_owner[t]. Absent when the attacker cannot tell blocks apart.
  std::optional<std::vector<std::size_t>> block_owner;

  const std::string* text_of(const ImageId& id) const {
    for (const auto& [image, text] : cells) {
      if (image == id) return &text;
    }
    return nullptr;
  }
};

inline Observation observe(const Challenge& challenge, std::string typed) {
  Observation obs;
  obs.cells.reserve(challenge.cells.size());
  for (const auto& c : challenge.cells) obs.cells.emplace_back(c.image_id, c.captcha_text);
  obs.typed = std::move(typed);
  return obs;
}

enum class Solver { None, Oracle };

struct AttackerModel {
  Solver solver = Solver::Oracle;
  std::optional<std::size_t> solver_budget;  // nullopt = unlimited
  bool knows_segmentation = true;
};

/// A hypothesis that `image` is a pass-image with these pass-positions.
struct Candidate {
  ImageId image;
  std::vector<int> positions;
  auto operator<=>(const Candidate&) const = default;
};

struct SegmentState {
  std::size_t length = 0;
  std::set<Candidate> pairs;
  std::set<ImageId> images;  // coarse model: image holds the segment's characters
};

struct AttackerState {
  std::vector<SegmentState> segments;
  bool initialised = false;
  std::size_t observations = 0;
  std::size_t captchas_solved = 0;

  std::vector<std::size_t> block_lengths() const {
    std::vector<std::size_t> out;
    for (const auto& s : segments) out.push_back(s.length);
    return out;
  }

  /// Every segment pinned to a single (image, positions) pair.
  bool unique() const {
    if (!initialised) return false;
    return std::all_of(segments.begin(), segments.end(), [](const auto& s) { return s.pairs.size() == 1; });
  }
};

inline AttackerState initial_state(const std::vector<std::size_t>& block_lengths) {
  AttackerState st;
  for (auto n : block_lengths) st.segments.push_back(SegmentState{n, {}, {}});
  return st;
}

namespace detail {

inline std::string code_at(const std::string& text, const std::vector<int>& positions) {
  std::string out;
  for (int p : positions) out.push_back(text[static_cast<std::size_t>(p - 1)]);
  return out;
}

/// Multiset containment of the segment's characters in the string.
inline bool contains_chars(std::string_view text, std::string_view segment) {
  std::array<int, 256> count{};
  for (unsigned char c : text) ++count[c];
  for (unsigned char c : segment) {
    if (--count[c] < 0) return false;
  }
  return true;
}

/// All ascending position tuples at which `text` spells `segment`.
inline void embeddings(const std::string& text, std::string_view segment, std::vector<int>& current,
                       std::vector<std::vector<int>>& out) {
  if (current.size() == segment.size()) {
    out.push_back(current);
    return;
  }
  const std::size_t from = current.empty() ? 0 : static_cast<std::size_t>(current.back());
  const std::size_t need = segment.size() - current.size();
  for (std::size_t i = from; i + need <= text.size(); ++i) {
    if (text[i] != segment[current.size()]) continue;
    current.push_back(static_cast<int>(i + 1));
    embeddings(text, segment, current, out);
    current.pop_back();
  }
}

/// Per segment slot, the typed substrings it may correspond to in this
/// observation.
inline std::vector<std::set<std::string>> segment_options(const AttackerState& st, const Observation& obs) {
  const auto lengths = st.block_lengths();
  const std::size_t total = std::accumulate(lengths.begin(), lengths.end(), std::size_t{0});
  if (obs.typed.size() != total) {
    throw Error(Errc::InvalidObservation, "typed length " + std::to_string(obs.typed.size()) +
                                              " does not match segmentation total " + std::to_string(total));
  }
  std::vector<std::set<std::string>> options(lengths.size());
  const bool anchor = !st.initialised;
  if (obs.block_owner) {
    const auto& owner = *obs.block_owner;
    if (owner.size() != lengths.size()) throw Error(Errc::InvalidObservation, "block_owner size mismatch");
    std::size_t offset = 0;
    for (auto slot : owner) {
      if (slot >= lengths.size()) throw Error(Errc::InvalidObservation, "block_owner index out of range");
      options[slot].insert(obs.typed.substr(offset, lengths[slot]));
      offset += lengths[slot];
    }
    return options;
  }
  if (anchor) {
    // without alignment, slots are the blocks in the first observation's order
    std::size_t offset = 0;
    for (std::size_t j = 0; j < lengths.size(); ++j) {
      options[j].insert(obs.typed.substr(offset, lengths[j]));
      offset += lengths[j];
    }
    return options;
  }
  // unaligned: any block of matching length under any ordering of the slots
  std::vector<std::size_t> order(lengths);
  std::sort(order.begin(), order.end());
  std::map<std::size_t, std::set<std::string>> by_length;
  do {
    std::size_t offset = 0;
    for (auto n : order) {
      by_length[n].insert(obs.typed.substr(offset, n));
      offset += n;
    }
  } while (std::next_permutation(order.begin(), order.end()));
  for (std::size_t j = 0; j < lengths.size(); ++j) options[j] = by_length[lengths[j]];
  return options;
}

}  // namespace detail

/// Folds one observation into the candidate sets. Requires CAPTCHA-reading
/// ability: every displayed string is consumed, costing one solve per cell.
inline AttackerState intersect(AttackerState st, const Observation& obs) {
  const auto options = detail::segment_options(st, obs);
  std::unordered_map<ImageId, const std::string*> shown;
  for (const auto& [image, text] : obs.cells) shown.emplace(image, &text);

  for (std::size_t j = 0; j < st.segments.size(); ++j) {
    auto& seg = st.segments[j];
    const auto& allowed = options[j];
    if (!st.initialised) {
      for (const auto& [image, text] : obs.cells) {
        for (const auto& s : allowed) {
          std::vector<int> current;
          std::vector<std::vector<int>> found;
          detail::embeddings(text, s, current, found);
          for (auto& positions : found) seg.pairs.insert(Candidate{image, std::move(positions)});
          if (detail::contains_chars(text, s)) seg.images.insert(image);
        }
      }
    } else {
      std::erase_if(seg.pairs, [&](const Candidate& c) {
        auto it = shown.find(c.image);
        return it == shown.end() || !allowed.contains(detail::code_at(*it->second, c.positions));
      });
      std::erase_if(seg.images, [&](const ImageId& id) {
        auto it = shown.find(id);
        if (it == shown.end()) return true;
        return std::none_of(allowed.begin(), allowed.end(),
                            [&](const std::string& s) { return detail::contains_chars(*it->second, s); });
      });
    }
    if (seg.pairs.empty()) {
      throw Error(Errc::InconsistentObservation, "segment " + std::to_string(j) + " lost every candidate");
    }
  }
  st.initialised = true;
  ++st.observations;
  st.captchas_solved += obs.cells.size();
  return st;
}

/// Only a replayed string that happens to be accepted for the fresh grid
/// succeeds.
inline bool replay_attack(const Observation& obs, const Challenge& fresh_challenge, const PasswordProfile& profile) {
  return accepts(profile, fresh_challenge, obs.typed);
}

/// Basic-scheme break: cut the typed string into M-character pieces and look
/// each one up among the displayed strings.
inline std::vector<ImageId> crack_basic_scheme(const Observation& obs, std::size_t string_len) {
  if (string_len == 0 || obs.typed.empty() || obs.typed.size() % string_len != 0) {
    throw Error(Errc::InvalidObservation, "typed length is not a multiple of the string length");
  }
  std::vector<ImageId> found;
  for (std::size_t off = 0; off < obs.typed.size(); off += string_len) {
    const std::string_view piece(obs.typed.data() + off, string_len);
    auto it = std::find_if(obs.cells.begin(), obs.cells.end(), [&](const auto& c) { return c.second == piece; });
    if (it == obs.cells.end()) throw Error(Errc::SegmentNotFound, "no cell shows '" + std::string(piece) + "'");
    found.push_back(it->first);
  }
  return found;
}

inline constexpr std::size_t kMaxSegmentationLength = 12;

/// Block-length hypotheses for an entry of unknown structure.
inline std::vector<combinatorics::Composition> enumerate_segmentations(std::string_view typed, std::size_t min_k,
                                                                       std::size_t max_k, std::size_t string_len) {
  if (typed.size() > kMaxSegmentationLength) {
    throw Error(Errc::CapExceeded, "segmentation search is capped at length " +
                                       std::to_string(kMaxSegmentationLength));
  }
  std::vector<combinatorics::Composition> out;
  const int total = static_cast<int>(typed.size());
  for (std::size_t k = std::max<std::size_t>(min_k, 1); k <= max_k; ++k) {
    auto part = combinatorics::compositions(total, static_cast<int>(k), static_cast<int>(string_len));
    out.insert(out.end(), part.begin(), part.end());
  }
  return out;
}

// --- simulation ---------------------------------------------------------------

struct SessionSnapshot {
  std::vector<std::size_t> image_candidates;  // per segment
  std::vector<std::size_t> pair_candidates;   // per segment
  std::size_t hypotheses = 1;
};

struct AttackReport {
  bool converged = false;
  std::optional<std::size_t> sessions_until_unique;
  std::size_t sessions_observed = 0;
  std::size_t captchas_solved = 0;      // over every observed session
  std::size_t captchas_to_unique = 0;   // solver counter when candidates became unique
  std::vector<SessionSnapshot> trajectory;
  std::optional<PasswordProfile> recovered;
  bool recovered_verifies = false;
  /// The true (image, positions) pair survived every intersection.
  bool truth_retained = true;
  /// Solver-less attacker only: recorded entries accepted on a fresh grid.
  std::size_t replay_successes = 0;
  std::string note;
};

namespace detail {

struct VictimSession {
  Challenge challenge;
  Observation obs;
  std::vector<std::size_t> order;  // typed block t = pass-image order[t]
};

inline VictimSession victim_login(const PasswordProfile& profile, const SchemeParams& params, std::uint64_t seed,
                                  std::size_t session) {
  VictimSession v;
  v.challenge = generate_challenge(profile, params, derive_seed(seed, 2 * session));
  const auto codes = expected_codes(profile, v.challenge);
  v.order.resize(codes.size());
  std::iota(v.order.begin(), v.order.end(), 0);
  Rng habit(derive_seed(seed, 2 * session + 1));
  habit.shuffle(std::span<std::size_t>(v.order));
  std::string typed;
  for (auto i : v.order) typed += codes[i];
  v.obs = observe(v.challenge, std::move(typed));
  return v;
}

inline SessionSnapshot snapshot(const AttackerState& st, std::size_t hypotheses) {
  SessionSnapshot s;
  s.hypotheses = hypotheses;
  for (const auto& seg : st.segments) {
    s.image_candidates.push_back(seg.images.size());
    s.pair_candidates.push_back(seg.pairs.size());
  }
  return s;
}

inline PasswordProfile recovered_profile(const AttackerState& st, const std::string& user_id) {
  PasswordProfile p;
  p.user_id = user_id;
  for (const auto& seg : st.segments) {
    p.pass_images.push_back(seg.pairs.begin()->image);
    p.positions.push_back(seg.pairs.begin()->positions);
  }
  return p;
}

/// Logs in with a recovered profile against a fresh challenge of the victim.
inline bool recovered_login_works(const PasswordProfile& victim, const PasswordProfile& recovered,
                                  const SchemeParams& params, std::uint64_t seed) {
  const auto fresh = generate_challenge(victim, params, seed);
  std::string typed;
  for (std::size_t i = 0; i < recovered.pass_images.size(); ++i) {
    const GridCell* cell = fresh.find(recovered.pass_images[i]);
    if (cell == nullptr) return false;
    typed += code_at(cell->captcha_text, recovered.positions[i]);
  }
  return accepts(victim, fresh, typed);
}

}  // namespace detail

/// Plays an honest victim against a spyware-assisted attacker for up to
/// max_sessions successful logins and reports how fast the candidates
/// collapse. With observe_at_least > 0 the attacker keeps observing after
/// convergence so the trajectory has at least that many entries.
inline AttackReport simulate_attack(const PasswordProfile& profile, const SchemeParams& params,
                                    const AttackerModel& attacker, std::size_t max_sessions, std::uint64_t seed,
                                    std::size_t observe_at_least = 0) {
  AttackReport report;
  const std::uint64_t fresh_seed = derive_seed(seed, ~std::uint64_t{0});

  if (attacker.solver == Solver::None) {
    // strings exist only as pixels; recorded entries can only be replayed
    for (std::size_t s = 0; s < max_sessions; ++s) {
      auto v = detail::victim_login(profile, params, seed, s);
      ++report.sessions_observed;
      const auto fresh = generate_challenge(profile, params, derive_seed(fresh_seed, s));
      if (replay_attack(v.obs, fresh, profile)) ++report.replay_successes;
    }
    report.note = "no CAPTCHA solver: candidate sets cannot be formed; did not converge";
    return report;
  }

  const auto truth_lengths = profile.block_lengths();
  struct Hypothesis {
    AttackerState state;
    bool truth = false;
  };
  std::vector<Hypothesis> hypotheses;
  std::vector<std::size_t> first_order;

  for (std::size_t s = 0; s < max_sessions; ++s) {
    auto v = detail::victim_login(profile, params, seed, s);
    if (attacker.solver_budget && report.captchas_solved + v.obs.cells.size() > *attacker.solver_budget) {
      report.note = "solver budget exhausted";
      break;
    }
    if (attacker.knows_segmentation) v.obs.block_owner = v.order;

    if (s == 0) {
      first_order = v.order;
      if (attacker.knows_segmentation) {
        hypotheses.push_back({initial_state(truth_lengths), true});
      } else {
        const std::size_t max_k = std::min(v.obs.typed.size(), kMaxPassImages);
        for (const auto& comp : enumerate_segmentations(v.obs.typed, params.min_pass_images, max_k,
                                                        params.string_len)) {
          std::vector<std::size_t> lengths(comp.begin(), comp.end());
          std::vector<std::size_t> typed_truth;
          for (auto i : v.order) typed_truth.push_back(truth_lengths[i]);
          hypotheses.push_back({initial_state(lengths), lengths == typed_truth});
        }
      }
    }

    std::vector<Hypothesis> next;
    for (auto& h : hypotheses) {
      try {
        next.push_back({intersect(std::move(h.state), v.obs), h.truth});
      } catch (const Error& e) {
        if (e.code() != Errc::InconsistentObservation) throw;
        if (h.truth) report.truth_retained = false;
      }
    }
    hypotheses = std::move(next);
    ++report.sessions_observed;
    report.captchas_solved += v.obs.cells.size();

    // soundness bookkeeping against ground truth
    for (const auto& h : hypotheses) {
      if (!h.truth) continue;
      for (std::size_t j = 0; j < h.state.segments.size(); ++j) {
        const std::size_t owner = attacker.knows_segmentation ? j : first_order[j];
        const Candidate truth{profile.pass_images[owner], profile.positions[owner]};
        if (!h.state.segments[j].pairs.contains(truth)) report.truth_retained = false;
      }
    }

    if (hypotheses.empty()) {
      report.note = "every segmentation hypothesis eliminated";
      break;
    }
    report.trajectory.push_back(detail::snapshot(hypotheses.front().state, hypotheses.size()));
    if (!report.converged && hypotheses.size() == 1 && hypotheses.front().state.unique()) {
      report.converged = true;
      report.sessions_until_unique = s + 1;
      report.captchas_to_unique = hypotheses.front().state.captchas_solved;
      auto rec = detail::recovered_profile(hypotheses.front().state, profile.user_id);
      report.recovered_verifies = detail::recovered_login_works(profile, rec, params, fresh_seed);
      report.recovered = std::move(rec);
    }
    if (report.converged && s + 1 >= observe_at_least) return report;
  }
  if (report.note.empty()) report.note = report.converged ? "converged" : "did not converge within session limit";
  return report;
}

}  // namespace capgp::attack
