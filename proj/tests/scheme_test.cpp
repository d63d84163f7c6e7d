#include <gtest/gtest.h>

#include <cmath>
#include <set>

#include "capgp/scheme.hpp"
#include "test_support.hpp"

namespace capgp {
namespace {

using testing::worked_example_challenge;
using testing::worked_example_params;
using testing::worked_example_profile;
using testing::make_challenge;

Errc error_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "expected capgp::Error";
  return Errc::IoError;
}

TEST(CreateProfile, WorkedExample) {
  const auto p = worked_example_profile();
  EXPECT_EQ(p.pass_image_count(), 3u);
  EXPECT_EQ(p.entered_length(), 8u);
  EXPECT_EQ(p.positions[1], (std::vector<int>{4, 6, 8}));
}

TEST(CreateProfile, NormalisesPositionOrder) {
  const auto p = create_profile("u", {"img00", "img01", "img02"}, {{4, 1, 2, 4}, {8}, {5, 3}}, worked_example_params());
  EXPECT_EQ(p.positions[0], (std::vector<int>{1, 2, 4}));
  EXPECT_EQ(p.positions[2], (std::vector<int>{3, 5}));
}

TEST(CreateProfile, ValidationErrors) {
  const auto params = worked_example_params();
  EXPECT_EQ(error_of([&] { create_profile("u", {"img00", "img01"}, {{1}, {2}}, params); }), Errc::TooFewPassImages);
  EXPECT_EQ(error_of([&] { create_profile("u", {"img00", "img01", "img02"}, {{1}, {2}, {9}}, params); }),
            Errc::PositionOutOfRange);
  EXPECT_EQ(error_of([&] { create_profile("u", {"img00", "img01", "img02"}, {{0}, {2}, {3}}, params); }),
            Errc::PositionOutOfRange);
  EXPECT_EQ(error_of([&] { create_profile("u", {"img00", "img01", "img02"}, {{1}, {}, {3}}, params); }),
            Errc::EmptyPositionSet);
  EXPECT_EQ(error_of([&] { create_profile("u", {"img00", "img01", "img00"}, {{1}, {2}, {3}}, params); }),
            Errc::DuplicatePassImage);
  EXPECT_EQ(error_of([&] { create_profile("u", {"img00", "img01", "cat"}, {{1}, {2}, {3}}, params); }),
            Errc::UnknownImageId);
  EXPECT_EQ(error_of([&] { create_profile("u", {"img00", "img01", "img02"}, {{1}, {2}}, params); }),
            Errc::ProfileShapeMismatch);
}

TEST(CreateProfile, BasicModeUsesFullPositionSets) {
  auto params = SchemeParams::with_grid(10, 4);
  const auto p = create_basic_profile("u", {"img01", "img02", "img03"}, params);
  EXPECT_EQ(p.entered_length(), 12u);
  for (const auto& set : p.positions) EXPECT_EQ(set, (std::vector<int>{1, 2, 3, 4}));
}

TEST(SchemeParams, Invariants) {
  auto p = SchemeParams::with_grid(50);
  EXPECT_NO_THROW(p.validate());
  p.rounds = 0;
  EXPECT_EQ(error_of([&] { p.validate(); }), Errc::InvalidParams);
  p = SchemeParams::with_grid(50);
  p.alphabet = "a";
  EXPECT_EQ(error_of([&] { p.validate(); }), Errc::InvalidParams);
  p = SchemeParams::with_grid(50);
  p.image_pool.resize(10);
  EXPECT_EQ(error_of([&] { p.validate(); }), Errc::PoolTooSmall);
  p = SchemeParams::with_grid(2);
  EXPECT_EQ(error_of([&] { p.validate(); }), Errc::InvalidParams);
}

TEST(GenerateChallenge, StructureAtDefaultScale) {
  const auto params = worked_example_params();
  const auto profile = worked_example_profile();
  const auto ch = generate_challenge(profile, params, 42);
  ASSERT_EQ(ch.cells.size(), 50u);
  std::set<std::string> texts, ids;
  for (std::size_t i = 0; i < ch.cells.size(); ++i) {
    const auto& c = ch.cells[i];
    EXPECT_EQ(c.slot_index, i);
    EXPECT_EQ(c.captcha_text.size(), 8u);
    for (char x : c.captcha_text) EXPECT_NE(params.alphabet.find(x), std::string::npos);
    texts.insert(c.captcha_text);
    ids.insert(c.image_id);
  }
  EXPECT_EQ(texts.size(), 50u);
  EXPECT_EQ(ids.size(), 50u);
  for (const auto& id : profile.pass_images) EXPECT_NE(ch.find(id), nullptr);
  EXPECT_FALSE(ch.consumed);
}

TEST(GenerateChallenge, DeterministicUnderSeed) {
  const auto params = worked_example_params();
  const auto profile = worked_example_profile();
  EXPECT_EQ(generate_challenge(profile, params, 42), generate_challenge(profile, params, 42));
  EXPECT_NE(generate_challenge(profile, params, 42).cells, generate_challenge(profile, params, 43).cells);
}

TEST(GenerateChallenge, ZeroDecoys) {
  const auto params = SchemeParams::with_grid(3);
  const auto profile = create_profile("u", {"img00", "img01", "img02"}, {{1}, {2}, {3}}, params);
  const auto ch = generate_challenge(profile, params, 7);
  ASSERT_EQ(ch.cells.size(), 3u);
  for (const auto& id : profile.pass_images) EXPECT_NE(ch.find(id), nullptr);
}

TEST(GenerateChallenge, DecoysDrawnFromLargerPool) {
  auto params = SchemeParams::with_grid(10);
  params.image_pool = numbered_pool(40);
  const auto profile = create_profile("u", {"img30", "img31", "img39"}, {{1}, {2}, {3}}, params);
  std::set<ImageId> seen;
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const auto ch = generate_challenge(profile, params, seed);
    ASSERT_EQ(ch.cells.size(), 10u);
    for (const auto& id : profile.pass_images) ASSERT_NE(ch.find(id), nullptr);
    for (const auto& c : ch.cells) seen.insert(c.image_id);
  }
  EXPECT_EQ(seen.size(), 40u);
}

TEST(GenerateChallenge, PoolTooSmall) {
  auto params = SchemeParams::with_grid(10);
  const auto profile = create_profile("u", {"img00", "img01", "img02"}, {{1}, {2}, {3}}, params);
  params.image_pool.resize(5);
  EXPECT_EQ(error_of([&] { generate_challenge(profile, params, 1); }), Errc::PoolTooSmall);
}

TEST(GenerateChallenge, DistinctStringsWhenSpaceIsTight) {
  // A^M = 4^2 = 16 strings for 16 cells: rejection sampling must fill all.
  auto params = SchemeParams::with_grid(16, 2);
  params.alphabet = "abcd";
  const auto profile = create_profile("u", {"img00", "img01", "img02"}, {{1}, {2}, {1, 2}}, params);
  const auto ch = generate_challenge(profile, params, 99);
  std::set<std::string> texts;
  for (const auto& c : ch.cells) texts.insert(c.captcha_text);
  EXPECT_EQ(texts.size(), 16u);
}

TEST(ExpectedCodes, WorkedExampleCodes) {
  const auto codes = expected_codes(worked_example_profile(), worked_example_challenge());
  EXPECT_EQ(codes, (std::vector<std::string>{"qaw", "qeo", "gq"}));
}

TEST(ExpectedCodes, ConstantString) {
  const auto params = worked_example_params();
  const auto profile = create_profile("u", {"img00", "img01", "img02"}, {{2, 7}, {1}, {1}}, params);
  const auto ch = make_challenge({{"img00", "aaaaaaaa"}, {"img01", "bcdefghi"}, {"img02", "cdefghij"}});
  EXPECT_EQ(expected_codes(profile, ch)[0], "aa");
}

TEST(ExpectedCodes, MissingPassImage) {
  const auto ch = make_challenge({{"img03", "qarwrxex"}, {"img17", "heeqreso"}});
  EXPECT_EQ(error_of([&] { expected_codes(worked_example_profile(), ch); }), Errc::PassImageMissing);
}

TEST(AcceptedStrings, SixOrderingsOfWorkedExample) {
  const auto acc = accepted_strings(worked_example_profile(), worked_example_challenge());
  const std::vector<std::string> expected = {"gqqawqeo", "gqqeoqaw", "qawgqqeo", "qawqeogq", "qeogqqaw", "qeoqawgq"};
  EXPECT_EQ(acc, expected);
}

TEST(AcceptedStrings, IdenticalBlocksCollapse) {
  const auto params = worked_example_params();
  const auto profile = create_profile("u", {"img00", "img01", "img02"}, {{1, 2}, {1, 2}, {1, 2}}, params);
  const auto ch = make_challenge({{"img00", "abcdefgh"}, {"img01", "abzzzzzz"}, {"img02", "abyyyyyy"}});
  EXPECT_EQ(accepted_strings(profile, ch), (std::vector<std::string>{"ababab"}));
}

TEST(AcceptedStrings, PermutationCap) {
  auto params = SchemeParams::with_grid(20);
  std::vector<ImageId> images(params.image_pool.begin(), params.image_pool.begin() + 11);
  std::vector<std::vector<int>> positions(11, std::vector<int>{1});
  const auto profile = create_profile("u", images, positions, params);
  const auto ch = generate_challenge(profile, params, 5);
  EXPECT_EQ(error_of([&] { accepted_strings(profile, ch); }), Errc::PermutationCapExceeded);
}

TEST(Verify, AcceptsAnyOrderingAndConsumes) {
  const auto params = worked_example_params();
  auto ch = worked_example_challenge();
  const auto r = verify(worked_example_profile(), ch, "gqqawqeo", params);
  EXPECT_TRUE(r.accepted);
  EXPECT_TRUE(ch.consumed);
  EXPECT_EQ(error_of([&] { verify(worked_example_profile(), ch, "gqqawqeo", params); }), Errc::ChallengeConsumed);
}

TEST(Verify, RejectReasons) {
  const auto params = worked_example_params();
  auto ch = worked_example_challenge();
  auto r = verify(worked_example_profile(), ch, "qawqeoqq", params);
  EXPECT_FALSE(r.accepted);
  EXPECT_EQ(r.reason, RejectReason::WrongContent);
  EXPECT_TRUE(ch.consumed);

  auto ch2 = worked_example_challenge();
  r = verify(worked_example_profile(), ch2, "", params);
  EXPECT_FALSE(r.accepted);
  EXPECT_EQ(r.reason, RejectReason::WrongLength);
}

TEST(Verify, Expiry) {
  auto params = worked_example_params();
  auto ch = worked_example_challenge();
  ch.created_at = TimePoint{} + std::chrono::hours(1);
  const auto late = ch.created_at + params.challenge_ttl + std::chrono::seconds(1);
  EXPECT_EQ(error_of([&] { verify(worked_example_profile(), ch, "gqqawqeo", params, late); }), Errc::ChallengeExpired);
  auto fresh = worked_example_challenge();
  fresh.created_at = ch.created_at;
  EXPECT_TRUE(verify(worked_example_profile(), fresh, "gqqawqeo", params, ch.created_at + params.challenge_ttl).accepted);
}

TEST(Verify, MissingPassImage) {
  auto ch = make_challenge({{"img03", "qarwrxex"}, {"img17", "heeqreso"}});
  EXPECT_EQ(error_of([&] { verify(worked_example_profile(), ch, "qawqeo", worked_example_params()); }), Errc::PassImageMissing);
}

TEST(VerifyMultiRound, RoundSemantics) {
  auto params = worked_example_params();
  const auto profile = worked_example_profile();
  {
    std::vector<Challenge> one = {worked_example_challenge()};
    std::vector<std::string> typed = {"qeogqqaw"};
    EXPECT_TRUE(verify_multi_round(profile, one, typed, params).accepted);
  }
  params.rounds = 2;
  auto make_rounds = [&] {
    return std::vector<Challenge>{generate_challenge(profile, params, 1), generate_challenge(profile, params, 2)};
  };
  {
    auto rounds = make_rounds();
    std::vector<std::string> typed = {accepted_strings(profile, rounds[0])[0], accepted_strings(profile, rounds[1])[3]};
    EXPECT_TRUE(verify_multi_round(profile, rounds, typed, params).accepted);
  }
  {
    auto rounds = make_rounds();
    std::vector<std::string> typed = {accepted_strings(profile, rounds[0])[0], "aaaaaaaa"};
    if (accepts(profile, rounds[1], typed[1])) typed[1] = "bbbbbbbb";
    const auto r = verify_multi_round(profile, rounds, typed, params);
    EXPECT_FALSE(r.accepted);
    EXPECT_TRUE(rounds[0].consumed);
    EXPECT_TRUE(rounds[1].consumed);
  }
  {
    auto rounds = make_rounds();
    std::vector<std::string> typed = {"x"};
    EXPECT_EQ(error_of([&] { verify_multi_round(profile, rounds, typed, params); }), Errc::RoundCountMismatch);
  }
}

// ---- properties -------------------------------------------------------------

TEST(SchemeProperties, VerifierMatchesAcceptedSetOracle) {
  Rng rng(2024);
  auto params = SchemeParams::with_grid(12, 4);
  params.alphabet = "abc";  // small alphabet makes repeated blocks common
  for (int trial = 0; trial < 300; ++trial) {
    const auto profile = testing::random_profile(rng, params, 3, 6, 2);
    const auto ch = generate_challenge(profile, params, rng.next());
    const auto oracle = testing::reference_accepted(profile, ch);
    const auto acc = accepted_strings(profile, ch);
    ASSERT_EQ(std::set<std::string>(acc.begin(), acc.end()), oracle);

    double kfact = std::tgamma(static_cast<double>(profile.pass_image_count()) + 1);
    EXPECT_LE(static_cast<double>(acc.size()), kfact);
    for (const auto& s : acc) {
      EXPECT_EQ(s.size(), profile.entered_length());
      EXPECT_TRUE(accepts(profile, ch, s));
    }
    // random strings of the right length over the alphabet
    for (int j = 0; j < 20; ++j) {
      const auto s = captcha::gen_string(params.alphabet, profile.entered_length(), rng);
      EXPECT_EQ(accepts(profile, ch, s), oracle.contains(s)) << s;
    }
  }
}

TEST(SchemeProperties, StoredOrderDoesNotMatter) {
  Rng rng(77);
  const auto params = worked_example_params();
  for (int trial = 0; trial < 100; ++trial) {
    auto profile = testing::random_profile(rng, params, 3, 5);
    const auto ch = generate_challenge(profile, params, rng.next());
    const auto before = accepted_strings(profile, ch);
    std::vector<std::size_t> idx(profile.pass_image_count());
    std::iota(idx.begin(), idx.end(), 0);
    rng.shuffle(std::span<std::size_t>(idx));
    PasswordProfile shuffled{profile.user_id, {}, {}};
    for (auto i : idx) {
      shuffled.pass_images.push_back(profile.pass_images[i]);
      shuffled.positions.push_back(profile.positions[i]);
    }
    EXPECT_EQ(accepted_strings(shuffled, ch), before);
  }
}

TEST(SchemeProperties, GeneratedChallengeInvariants) {
  Rng rng(5);
  const auto params = worked_example_params();
  for (int trial = 0; trial < 200; ++trial) {
    const auto profile = testing::random_profile(rng, params, 3, 8);
    const auto seed = rng.next();
    const auto ch = generate_challenge(profile, params, seed);
    std::set<std::string> texts;
    for (const auto& c : ch.cells) texts.insert(c.captcha_text);
    ASSERT_EQ(texts.size(), params.grid_size);
    for (const auto& id : profile.pass_images) ASSERT_NE(ch.find(id), nullptr);
    ASSERT_EQ(ch, generate_challenge(profile, params, seed));
  }
}

TEST(SchemeProperties, StringCollisionRateMatchesOneOverAToTheM) {
  // two independent 4-letter strings coincide with probability 1/26^4
  Rng rng(1234567);
  const std::size_t pairs = 10'000'000;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < pairs; ++i) {
    if (captcha::gen_string(captcha::kLowercase, 4, rng) == captcha::gen_string(captcha::kLowercase, 4, rng)) ++hits;
  }
  const double p = 1.0 / 456976.0;
  const double mean = pairs * p;
  const double sigma = std::sqrt(pairs * p * (1 - p));
  EXPECT_NEAR(static_cast<double>(hits), mean, 3 * sigma);
}

}  // namespace
}  // namespace capgp
