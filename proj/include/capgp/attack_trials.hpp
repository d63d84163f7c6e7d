#pragma once

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "capgp/attack.hpp"
#include "capgp/combinatorics.hpp"
#include "capgp/rng.hpp"
#include "capgp/scheme.hpp"

namespace capgp::attack {

/// A repeated-trial attack experiment: fresh random victim per trial.
struct AttackScenario {
  std::size_t grid_size = 100;
  std::size_t string_len = 8;
  std::size_t pass_images = 3;
  std::size_t positions_per_image = 1;
  std::size_t pool_size = 0;  // 0: same as grid
  AttackerModel attacker;
  std::size_t trials = 1000;
  std::size_t max_sessions = 20;
  std::size_t trajectory_sessions = 3;
  std::uint64_t seed = 0;

  /// Analytic setting: 100 images on screen.
  static AttackScenario analytic() { return {}; }

  /// Prototype setting: 50 images on screen.
  static AttackScenario prototype() {
    AttackScenario s;
    s.grid_size = 50;
    return s;
  }
};

struct AttackSummary {
  std::size_t trials = 0;
  std::size_t converged = 0;
  std::vector<double> mean_image_candidates;  // index s-1: after s sessions, every trial
  std::vector<double> mean_pair_candidates;
  std::vector<double> closed_form_candidates;  // 1 + (N-1) p^s
  std::vector<std::size_t> sessions_until_unique;  // converged trials, sorted
  std::optional<std::size_t> median_sessions;  // none if half or more never converged
  double mean_captchas_to_unique = 0;
  bool cost_accounting_exact = true;  // captchas_to_unique == N * sessions, every trial
  std::size_t recovered_verified = 0;
  bool truth_always_retained = true;
  std::size_t replay_successes = 0;

  std::optional<std::size_t> quantile(double q) const {
    // rank over all trials; non-converged trials rank last
    const auto rank = static_cast<std::size_t>(q * static_cast<double>(trials - 1) + 0.5);
    if (rank >= sessions_until_unique.size()) return std::nullopt;
    return sessions_until_unique[rank];
  }
};

inline PasswordProfile random_victim(const AttackScenario& sc, const SchemeParams& params, Rng& rng) {
  std::vector<ImageId> pool = params.image_pool;
  std::vector<ImageId> images;
  for (std::size_t i = 0; i < sc.pass_images; ++i) {
    std::swap(pool[i], pool[i + rng.below(pool.size() - i)]);
    images.push_back(pool[i]);
  }
  std::vector<std::vector<int>> positions;
  for (std::size_t i = 0; i < sc.pass_images; ++i) {
    std::vector<int> all(sc.string_len);
    std::iota(all.begin(), all.end(), 1);
    for (std::size_t j = 0; j < sc.positions_per_image; ++j) std::swap(all[j], all[j + rng.below(all.size() - j)]);
    positions.emplace_back(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(sc.positions_per_image));
  }
  return create_profile("victim", std::move(images), std::move(positions), params);
}

inline SchemeParams scenario_params(const AttackScenario& sc) {
  auto params = SchemeParams::with_grid(sc.grid_size, sc.string_len);
  params.min_pass_images = std::min<std::size_t>(params.min_pass_images, sc.pass_images);
  if (sc.pool_size > sc.grid_size) params.image_pool = numbered_pool(sc.pool_size);
  params.validate();
  if (sc.positions_per_image < 1 || sc.positions_per_image > sc.string_len) {
    throw Error(Errc::InvalidParams, "positions per image must be in [1, M]");
  }
  if (sc.pass_images > sc.grid_size) throw Error(Errc::InvalidParams, "more pass-images than grid cells");
  return params;
}

inline AttackSummary run_attack_trials(const AttackScenario& sc) {
  const auto params = scenario_params(sc);
  AttackSummary sum;
  sum.trials = sc.trials;
  std::vector<double> image_total, pair_total;
  std::vector<std::size_t> samples;
  double captchas = 0;

  for (std::size_t t = 0; t < sc.trials; ++t) {
    Rng rng(derive_seed(sc.seed, t));
    const auto victim = random_victim(sc, params, rng);
    const auto report = simulate_attack(victim, params, sc.attacker, sc.max_sessions, rng.next(),
                                        sc.trajectory_sessions);
    sum.replay_successes += report.replay_successes;
    sum.truth_always_retained = sum.truth_always_retained && report.truth_retained;
    for (std::size_t s = 0; s < report.trajectory.size(); ++s) {
      if (image_total.size() <= s) {
        image_total.resize(s + 1, 0);
        pair_total.resize(s + 1, 0);
        samples.resize(s + 1, 0);
      }
      const auto& snap = report.trajectory[s];
      for (std::size_t j = 0; j < snap.image_candidates.size(); ++j) {
        image_total[s] += static_cast<double>(snap.image_candidates[j]);
        pair_total[s] += static_cast<double>(snap.pair_candidates[j]);
        ++samples[s];
      }
    }
    if (report.converged) {
      ++sum.converged;
      const auto sessions = *report.sessions_until_unique;
      sum.sessions_until_unique.push_back(sessions);
      captchas += static_cast<double>(report.captchas_to_unique);
      if (report.captchas_to_unique != params.grid_size * sessions) sum.cost_accounting_exact = false;
      sum.recovered_verified += report.recovered_verifies;
    }
  }
  // later sessions only cover trials that had not converged yet
  const std::size_t full = std::min(samples.size(), sc.trajectory_sessions);
  for (std::size_t s = 0; s < full; ++s) {
    sum.mean_image_candidates.push_back(image_total[s] / static_cast<double>(samples[s]));
    sum.mean_pair_candidates.push_back(pair_total[s] / static_cast<double>(samples[s]));
  }
  const std::size_t horizon = sc.trajectory_sessions;
  for (std::size_t s = 1; s <= horizon; ++s) {
    sum.closed_form_candidates.push_back(
        combinatorics::expected_candidates(static_cast<int>(sc.grid_size), static_cast<int>(params.alphabet_size()),
                                           static_cast<int>(sc.string_len), static_cast<int>(s))
            .total);
  }
  std::sort(sum.sessions_until_unique.begin(), sum.sessions_until_unique.end());
  if (sum.converged > 0) sum.mean_captchas_to_unique = captchas / static_cast<double>(sum.converged);
  if (sc.trials > 0) sum.median_sessions = sum.quantile(0.5);
  return sum;
}

}  // namespace capgp::attack
