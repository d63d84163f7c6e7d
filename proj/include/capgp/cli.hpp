#pragma once

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <optional>
#include <ostream>
#include <random>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <vector>

#include "capgp/attack.hpp"
#include "capgp/attack_trials.hpp"
#include "capgp/captcha.hpp"
#include "capgp/combinatorics.hpp"
#include "capgp/scheme.hpp"
#include "json.hpp"

// Subcommand bodies of the capgp tool. Argument parsing lives in the tool;
// everything here writes to a caller-supplied stream.
namespace capgp::cli {

enum ExitCode : int { kOk = 0, kUsage = 1, kRuntime = 2 };

/// Bad flag values or ranges; the tool maps it to exit code 1.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline std::uint64_t entropy_seed() {
  std::random_device dev;
  return (static_cast<std::uint64_t>(dev()) << 32) ^ dev();
}

inline std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

// ---- space ---------------------------------------------------------------

struct SpaceOptions {
  int grid = 50;
  int string_len = 8;
  int l_min = 3;
  int l_max = 10;
  int k_min = 3;
  bool json = false;
};

struct SpaceRow {
  int total_length = 0;
  combinatorics::BigInt count;
  std::string scientific;  // two significant figures, e.g. 1.0e+07
  double log2 = 0;
};

/// Two significant figures from the exact integer (no float rounding of the
/// leading digits).
inline std::string scientific_2sf(const combinatorics::BigInt& value) {
  std::string digits = value.str();
  if (digits.size() == 1) return digits + ".0e+00";
  int exponent = static_cast<int>(digits.size()) - 1;
  int lead = (digits[0] - '0') * 10 + (digits[1] - '0');
  // round half up on the remaining digits
  if (digits.size() > 2 && digits[2] >= '5') ++lead;
  if (lead == 100) {
    lead = 10;
    ++exponent;
  }
  char buf[32];
  std::snprintf(buf, sizeof buf, "%d.%de%+03d", lead / 10, lead % 10, exponent);
  return buf;
}

inline std::vector<SpaceRow> space_rows(const SpaceOptions& o) {
  if (o.l_max < o.l_min) throw UsageError("--l-max must not be below --l-min");
  if (o.grid < 1 || o.string_len < 1 || o.k_min < 1) throw UsageError("--n, --m and --k-min must be positive");
  if (o.l_min < o.k_min) throw UsageError("--l-min must be at least --k-min");
  if (o.grid < o.k_min) throw UsageError("--n must be at least --k-min");
  std::vector<SpaceRow> rows;
  for (int l = o.l_min; l <= o.l_max; ++l) {
    const auto s = combinatorics::space_size({l, o.grid, o.string_len, o.k_min});
    rows.push_back({l, s.count, scientific_2sf(s.count), s.log2});
  }
  return rows;
}

inline int cmd_space(const SpaceOptions& o, std::ostream& out) {
  const auto rows = space_rows(o);
  if (o.json) {
    nlohmann::json doc;
    doc["n"] = o.grid;
    doc["m"] = o.string_len;
    doc["k_min"] = o.k_min;
    for (const auto& r : rows) {
      doc["rows"].push_back({{"L", r.total_length}, {"count", r.count.str()}, {"scientific", r.scientific},
                             {"log2", r.log2}});
    }
    out << doc.dump(2) << "\n";
    return kOk;
  }
  char line[160];
  std::snprintf(line, sizeof line, "%4s  %26s  %9s  %6s\n", "L", "count", "approx", "log2");
  out << "N=" << o.grid << " M=" << o.string_len << " K_min=" << o.k_min << "\n" << line;
  for (const auto& r : rows) {
    std::snprintf(line, sizeof line, "%4d  %26s  %9s  %6.2f\n", r.total_length, r.count.str().c_str(),
                  r.scientific.c_str(), r.log2);
    out << line;
  }
  return kOk;
}

// ---- attack --------------------------------------------------------------

struct AttackOptions {
  std::string preset = "analytic";
  std::optional<std::size_t> grid, string_len, pass_images, positions;
  std::string solver = "oracle";
  std::optional<std::size_t> solver_budget;
  bool unknown_segmentation = false;
  std::size_t trials = 1000;
  std::size_t max_sessions = 20;
  std::size_t trajectory_sessions = 3;
  std::optional<std::uint64_t> seed;
  bool json = false;
};

inline attack::AttackScenario scenario_from(const AttackOptions& o, std::uint64_t seed) {
  attack::AttackScenario sc;
  if (o.preset == "analytic" || o.preset == "paper-iv-a") sc = attack::AttackScenario::analytic();
  else if (o.preset == "prototype" || o.preset == "paper-v") sc = attack::AttackScenario::prototype();
  else throw UsageError("unknown preset '" + o.preset + "' (expected analytic or prototype)");
  if (o.grid) sc.grid_size = *o.grid;
  if (o.string_len) sc.string_len = *o.string_len;
  if (o.pass_images) sc.pass_images = *o.pass_images;
  if (o.positions) sc.positions_per_image = *o.positions;
  if (o.solver == "oracle") sc.attacker.solver = attack::Solver::Oracle;
  else if (o.solver == "none") sc.attacker.solver = attack::Solver::None;
  else throw UsageError("unknown solver '" + o.solver + "' (expected oracle or none)");
  sc.attacker.solver_budget = o.solver_budget;
  sc.attacker.knows_segmentation = !o.unknown_segmentation;
  if (o.trials == 0) throw UsageError("--trials must be positive");
  if (o.max_sessions == 0) throw UsageError("--max-sessions must be positive");
  if (sc.pass_images < 1 || sc.pass_images > kMaxPassImages) throw UsageError("--k must be in [1, 10]");
  if (sc.positions_per_image < 1 || sc.positions_per_image > sc.string_len) {
    throw UsageError("--positions must be in [1, M]");
  }
  if (sc.grid_size < sc.pass_images) throw UsageError("--n must be at least --k");
  sc.trials = o.trials;
  sc.max_sessions = o.max_sessions;
  sc.trajectory_sessions = std::min(o.trajectory_sessions, o.max_sessions);
  sc.seed = seed;
  return sc;
}

inline std::string quantile_text(const attack::AttackSummary& s, double q) {
  const auto v = s.quantile(q);
  return v ? std::to_string(*v) : std::string("none");
}

inline int cmd_attack(const AttackOptions& o, std::ostream& out) {
  const std::uint64_t seed = o.seed ? *o.seed : entropy_seed();
  const auto sc = scenario_from(o, seed);
  const auto sum = attack::run_attack_trials(sc);
  const bool solver_none = sc.attacker.solver == attack::Solver::None;

  if (o.json) {
    nlohmann::json doc;
    doc["seed"] = seed;
    doc["scenario"] = {{"n", sc.grid_size},        {"m", sc.string_len},
                       {"k", sc.pass_images},      {"positions", sc.positions_per_image},
                       {"solver", o.solver},       {"known_segmentation", sc.attacker.knows_segmentation},
                       {"trials", sc.trials},      {"max_sessions", sc.max_sessions}};
    doc["mean_image_candidates"] = sum.mean_image_candidates;
    doc["mean_pair_candidates"] = sum.mean_pair_candidates;
    doc["closed_form_candidates"] = sum.closed_form_candidates;
    doc["converged"] = sum.converged;
    auto q = [&](double p) -> nlohmann::json {
      const auto v = sum.quantile(p);
      return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
    };
    doc["sessions_until_unique"] = {{"p10", q(0.1)}, {"median", q(0.5)}, {"p90", q(0.9)}};
    doc["mean_captchas_to_unique"] = sum.mean_captchas_to_unique;
    doc["captchas_per_session"] = sc.grid_size;
    doc["recovered_verified"] = sum.recovered_verified;
    doc["replay_successes"] = sum.replay_successes;
    if (solver_none) doc["note"] = "no CAPTCHA solver: candidates never narrow, attack does not converge";
    out << doc.dump(2) << "\n";
    return kOk;
  }

  out << "seed: " << seed << "\n";
  out << "scenario: N=" << sc.grid_size << " M=" << sc.string_len << " K=" << sc.pass_images
      << " positions=" << sc.positions_per_image << " solver=" << o.solver
      << " segmentation=" << (sc.attacker.knows_segmentation ? "known" : "unknown") << " trials=" << sc.trials
      << " max_sessions=" << sc.max_sessions << "\n";
  if (!sum.mean_image_candidates.empty()) {
    out << "session  image_candidates  closed_form  pair_candidates\n";
    for (std::size_t s = 0; s < sum.mean_image_candidates.size(); ++s) {
      char line[128];
      std::snprintf(line, sizeof line, "%7zu  %16.2f  %11.2f  %15.2f\n", s + 1, sum.mean_image_candidates[s],
                    sum.closed_form_candidates[s], sum.mean_pair_candidates[s]);
      out << line;
    }
  }
  if (solver_none) {
    out << "not converged: no CAPTCHA solver, the recorded strings cannot be read\n";
    out << "replay successes: " << sum.replay_successes << "\n";
    return kOk;
  }
  out << "converged: " << sum.converged << "/" << sum.trials << "\n";
  out << "sessions until unique: p10 " << quantile_text(sum, 0.1) << ", median " << quantile_text(sum, 0.5)
      << ", p90 " << quantile_text(sum, 0.9) << "\n";
  out << "captchas solved until unique: mean " << fixed(sum.mean_captchas_to_unique, 1) << " (" << sc.grid_size
      << " per session)\n";
  out << "recovered profiles that log in: " << sum.recovered_verified << "/" << sum.converged << "\n";
  return kOk;
}

// ---- captcha -------------------------------------------------------------

struct CaptchaOptions {
  std::string text;
  std::optional<std::uint64_t> seed;
  std::string output = "captcha.png";
  captcha::RenderParams render;
  bool identity = false;
};

inline int cmd_captcha(const CaptchaOptions& o, std::ostream& out) {
  auto params = o.identity ? captcha::RenderParams::identity(o.render.glyph_height) : o.render;
  params.seed = o.seed ? *o.seed : entropy_seed();
  try {
    params.validate();
  } catch (const Error& e) {
    throw UsageError(e.what());
  }
  const auto img = captcha::render(o.text, params);
  const auto png = captcha::encode_png(img);
  std::ofstream f(o.output, std::ios::binary | std::ios::trunc);
  if (!f) throw Error(Errc::IoError, "cannot open '" + o.output + "' for writing");
  f.write(reinterpret_cast<const char*>(png.data()), static_cast<std::streamsize>(png.size()));
  if (!f) throw Error(Errc::IoError, "write to '" + o.output + "' failed");
  out << "seed: " << params.seed << "\n";
  out << "wrote " << o.output << " (" << img.width << "x" << img.height << ", " << png.size() << " bytes)\n";
  return kOk;
}

// ---- demo ----------------------------------------------------------------

struct DemoTranscript {
  std::vector<std::string> codes;
  std::vector<std::string> accepted;
  bool sample_accepted = false;
  bool replay_rejected = false;
  std::vector<ImageId> basic_recovered;
  bool basic_cracked = false;
};

/// Replaces the strings shown under some images, keeping all strings in the
/// grid distinct by redrawing any decoy that collides.
inline void pin_strings(Challenge& ch, const std::vector<std::pair<ImageId, std::string>>& pinned,
                        const SchemeParams& params, std::uint64_t seed) {
  std::unordered_set<std::string> fixed_texts;
  for (const auto& [id, text] : pinned) fixed_texts.insert(text);
  Rng rng(derive_seed(seed, 99));
  std::unordered_set<std::string> used = fixed_texts;
  for (auto& cell : ch.cells) {
    bool is_pinned = false;
    for (const auto& [id, text] : pinned) {
      if (cell.image_id == id) {
        cell.captcha_text = text;
        is_pinned = true;
      }
    }
    if (is_pinned) continue;
    while (used.contains(cell.captcha_text)) cell.captcha_text = captcha::gen_string(params.alphabet, params.string_len, rng);
    used.insert(cell.captcha_text);
  }
}

inline DemoTranscript cmd_demo(std::uint64_t seed, std::ostream& out) {
  DemoTranscript t;
  const auto params = SchemeParams::with_grid(50, 8);
  const std::vector<ImageId> images = {"img03", "img17", "img41"};
  const auto profile = create_profile("ghc", images, {{1, 2, 4}, {4, 6, 8}, {3, 5}}, params);
  out << "seed: " << seed << "\n";
  out << "profile 'ghc': img03 positions {1,2,4}, img17 positions {4,6,8}, img41 positions {3,5}\n";

  auto ch = generate_challenge(profile, params, derive_seed(seed, 1));
  pin_strings(ch, {{"img03", "qarwrxex"}, {"img17", "heeqreso"}, {"img41", "mvgqqebh"}}, params, seed);
  out << "challenge " << ch.challenge_id << " with " << ch.cells.size() << " images\n";
  for (const auto& id : images) {
    const auto* cell = ch.find(id);
    out << "  slot " << cell->slot_index << ": " << id << " shows '" << cell->captcha_text << "'\n";
  }
  t.codes = expected_codes(profile, ch);
  out << "codes:";
  for (const auto& c : t.codes) out << " " << c;
  out << "\n";
  t.accepted = accepted_strings(profile, ch);
  out << "accepted strings (" << t.accepted.size() << "):\n";
  for (const auto& s : t.accepted) out << "  " << s << "\n";

  const std::string sample = "gqqeoqaw";
  const auto observed = attack::observe(ch, sample);
  auto result = verify(profile, ch, sample, params, ch.created_at);
  t.sample_accepted = result.accepted;
  out << "verify '" << sample << "': " << (result.accepted ? "accept" : "reject") << "\n";

  const auto fresh = generate_challenge(profile, params, derive_seed(seed, 2));
  t.replay_rejected = !attack::replay_attack(observed, fresh, profile);
  out << "replay of '" << sample << "' on a fresh challenge: " << (t.replay_rejected ? "reject" : "accept") << "\n";

  // Basic mode: every position selected, so the typed entry is the full
  // strings concatenated and one observation gives the images away.
  const auto basic = create_basic_profile("ghc-basic", images, params);
  const auto basic_ch = generate_challenge(basic, params, derive_seed(seed, 3));
  std::string typed;
  for (const auto& code : expected_codes(basic, basic_ch)) typed += code;
  out << "basic-mode twin types '" << typed << "'\n";
  t.basic_recovered = attack::crack_basic_scheme(attack::observe(basic_ch, typed), params.string_len);
  t.basic_cracked = t.basic_recovered == images;
  out << "recovered from 1 observation:";
  for (const auto& id : t.basic_recovered) out << " " << id;
  out << (t.basic_cracked ? " (matches)" : " (mismatch)") << "\n";
  return t;
}

}  // namespace capgp::cli
