#pragma once

#include <boost/multiprecision/cpp_int.hpp>

#include <cmath>
#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "capgp/error.hpp"

namespace capgp::combinatorics {

using BigInt = boost::multiprecision::cpp_int;
using Rational = boost::multiprecision::cpp_rational;
using Composition = std::vector<int>;

/// Exact C(n, k); zero outside 0 <= k <= n.
inline BigInt binomial(std::int64_t n, std::int64_t k) {
  if (k < 0 || n < 0 || k > n) return 0;
  if (k > n - k) k = n - k;
  BigInt r = 1;
  for (std::int64_t i = 1; i <= k; ++i) {
    r *= n - k + i;
    r /= i;  // exact: r is C(n-k+i, i) here
  }
  return r;
}

inline BigInt factorial(std::int64_t n) {
  BigInt r = 1;
  for (std::int64_t i = 2; i <= n; ++i) r *= i;
  return r;
}

inline BigInt power(std::int64_t base, std::int64_t exp) {
  BigInt r = 1;
  for (std::int64_t i = 0; i < exp; ++i) r *= base;
  return r;
}

/// log2 of a positive integer from its bit length and leading 53 bits.
inline double log2_exact(const BigInt& value) {
  if (value <= 0) return -INFINITY;
  const auto msb = static_cast<std::int64_t>(boost::multiprecision::msb(value));
  const std::int64_t shift = msb > 52 ? msb - 52 : 0;
  const BigInt top = value >> static_cast<unsigned>(shift);
  return std::log2(top.convert_to<double>()) + static_cast<double>(shift);
}

/// All ordered K-tuples with parts in [1, M] summing to L, in lexicographic
/// order. Empty when infeasible.
inline std::vector<Composition> compositions(int total, int parts, int max_part) {
  std::vector<Composition> out;
  if (parts < 1 || max_part < 1 || total < parts || total > parts * max_part) return out;
  Composition current;
  current.reserve(static_cast<std::size_t>(parts));
  auto recurse = [&](auto&& self, int remaining, int left) -> void {
    if (left == 0) {
      if (remaining == 0) out.push_back(current);
      return;
    }
    // remaining parts after this one need between (left-1) and (left-1)*M
    const int lo = std::max(1, remaining - (left - 1) * max_part);
    const int hi = std::min(max_part, remaining - (left - 1));
    for (int n = lo; n <= hi; ++n) {
      current.push_back(n);
      self(self, remaining - n, left - 1);
      current.pop_back();
    }
  };
  recurse(recurse, total, parts);
  return out;
}

namespace detail {

/// Coefficient of x^total in (sum_{j=1..M} weight(j) x^j)^parts by
/// memoised recursion on the first part.
template <typename Weight>
BigInt weighted_composition_sum(int total, int parts, int max_part, Weight&& weight) {
  if (parts < 0 || total < 0) return 0;
  std::map<std::pair<int, int>, BigInt> memo;
  auto go = [&](auto&& self, int remaining, int left) -> BigInt {
    if (left == 0) return remaining == 0 ? 1 : 0;
    if (remaining < left || remaining > left * max_part) return 0;
    const auto key = std::make_pair(remaining, left);
    if (auto it = memo.find(key); it != memo.end()) return it->second;
    BigInt sum = 0;
    for (int n = 1; n <= std::min(max_part, remaining); ++n) sum += weight(n) * self(self, remaining - n, left - 1);
    memo.emplace(key, sum);
    return sum;
  };
  return go(go, total, parts);
}

}  // namespace detail

/// G(M, K, L): number of compositions, without materialising them.
inline BigInt composition_count(int total, int parts, int max_part) {
  if (max_part < 1) return 0;
  return detail::weighted_composition_sum(total, parts, max_part, [](int) { return BigInt(1); });
}

/// O(K, L, N, M): position-set choices once the K pass-images are fixed.
/// N does not enter the sum; it is kept for signature symmetry with P.
inline BigInt count_O(int k, int total, int /*grid*/, int string_len) {
  if (k < 1 || string_len < 1) return 0;
  std::vector<BigInt> row(static_cast<std::size_t>(string_len) + 1);
  for (int j = 0; j <= string_len; ++j) row[static_cast<std::size_t>(j)] = binomial(string_len, j);
  return detail::weighted_composition_sum(total, k, string_len,
                                          [&](int n) { return row[static_cast<std::size_t>(n)]; });
}

/// P(K, L, N, M) = C(N, K) * O(K, L, N, M).
inline BigInt count_P(int k, int total, int grid, int string_len) {
  if (k > grid) return 0;
  return binomial(grid, k) * count_O(k, total, grid, string_len);
}

struct SpaceQuery {
  int total_length = 3;  // L
  int grid_size = 50;    // N
  int string_len = 8;    // M
  int min_pass_images = 3;

  void validate() const {
    if (string_len < 1) throw Error(Errc::InvalidParams, "M must be >= 1");
    if (min_pass_images < 1) throw Error(Errc::InvalidParams, "K_min must be >= 1");
    if (total_length < min_pass_images) throw Error(Errc::InvalidParams, "L must be >= K_min");
    if (grid_size < min_pass_images) throw Error(Errc::InvalidParams, "N must be >= K_min");
  }
};

struct SpaceSize {
  BigInt count;
  double log2 = 0;
};

/// S(L, N, M) = sum over K = K_min..L of P(K, L, N, M).
inline SpaceSize space_size(const SpaceQuery& q) {
  q.validate();
  BigInt sum = 0;
  for (int k = q.min_pass_images; k <= q.total_length; ++k) {
    sum += count_P(k, q.total_length, q.grid_size, q.string_len);
  }
  return {sum, log2_exact(sum)};
}

struct GuessProbability {
  Rational exact;        // accepted_count / A^L
  double value = 0;
  Rational upper_bound;  // K! / A^L
  double upper_bound_value = 0;
};

/// Success probability of one uniformly random guess of length L.
inline GuessProbability guess_success_probability(const std::vector<int>& block_lengths, int alphabet_size,
                                                  const BigInt& accepted_count) {
  if (alphabet_size < 1) throw Error(Errc::InvalidParams, "alphabet size must be positive");
  int total = 0;
  for (int n : block_lengths) {
    if (n < 1) throw Error(Errc::InvalidParams, "block lengths must be positive");
    total += n;
  }
  const auto k = static_cast<std::int64_t>(block_lengths.size());
  const BigInt ceiling = factorial(k);
  if (accepted_count < 0 || accepted_count > ceiling) {
    throw Error(Errc::InvalidParams, "accepted_count must lie in [0, K!]");
  }
  const BigInt denom = power(alphabet_size, total);
  GuessProbability g;
  g.exact = Rational(accepted_count, denom);
  g.upper_bound = Rational(ceiling, denom);
  g.value = g.exact.convert_to<double>();
  g.upper_bound_value = g.upper_bound.convert_to<double>();
  return g;
}

/// Probability a given character appears somewhere in a random M-string.
inline double char_presence_prob(int alphabet_size, int string_len) {
  if (alphabet_size < 1) throw Error(Errc::InvalidParams, "alphabet size must be positive");
  return 1.0 - std::pow((alphabet_size - 1.0) / alphabet_size, string_len);
}

struct CandidateEstimate {
  double total = 0;   // pass-image plus surviving decoys
  double decoys = 0;
};

/// Expected image candidates for a one-character segment after s sessions.
inline CandidateEstimate expected_candidates(int grid, int alphabet_size, int string_len, int sessions) {
  if (sessions == 0) return {static_cast<double>(grid), grid - 1.0};
  const double p = char_presence_prob(alphabet_size, string_len);
  const double decoys = (grid - 1) * std::pow(p, sessions);
  return {1.0 + decoys, decoys};
}

/// Chance of naming every pass-image from one observation, guessing
/// uniformly among the ~N*p images holding each typed character.
inline double single_shot_crack_prob(int grid, int alphabet_size, int string_len, int pass_images) {
  const double per_image = 1.0 / (grid * char_presence_prob(alphabet_size, string_len));
  return std::pow(per_image, pass_images);
}

}  // namespace capgp::combinatorics
