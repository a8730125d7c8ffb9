#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <vector>

#include "cuebias/rng.hpp"

namespace cuebias {
namespace {

// Known-answer vectors from the Random123 distribution (kat_vectors).
TEST(Philox, KnownAnswers) {
  EXPECT_EQ(philox4x32({0, 0, 0, 0}, {0, 0}),
            (std::array<std::uint32_t, 4>{0x6627e8d5, 0xe169c58d, 0xbc57ac4c, 0x9b00dbd8}));
  EXPECT_EQ(philox4x32({0xffffffff, 0xffffffff, 0xffffffff, 0xffffffff},
                       {0xffffffff, 0xffffffff}),
            (std::array<std::uint32_t, 4>{0x408f276d, 0x41c83b0e, 0xa20bc7c6, 0x6d5451fd}));
  EXPECT_EQ(philox4x32({0x243f6a88, 0x85a308d3, 0x13198a2e, 0x03707344},
                       {0xa4093822, 0x299f31d0}),
            (std::array<std::uint32_t, 4>{0xd16cfe09, 0x94fdcceb, 0x5001e420, 0x24126ea1}));
}

TEST(RngStream, SameSeedAndStreamReproduce) {
  RngStream a(42, 7);
  RngStream b(42, 7);
  for (int i = 0; i < 1000; ++i) ASSERT_EQ(a(), b());
}

TEST(RngStream, StreamsAndSeedsDiffer) {
  RngStream a(42, 7);
  RngStream b(42, 8);
  RngStream c(43, 7);
  int same_ab = 0;
  int same_ac = 0;
  for (int i = 0; i < 100; ++i) {
    const auto x = a();
    same_ab += x == b();
    same_ac += x == c();
  }
  EXPECT_EQ(same_ab, 0);
  EXPECT_EQ(same_ac, 0);
}

TEST(RngStream, UniformInUnitInterval) {
  RngStream rng(1, 2);
  double sum = 0.0;
  constexpr int kN = 200'000;
  for (int i = 0; i < kN; ++i) {
    const double u = rng.uniform();
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
    sum += u;
  }
  // Mean of U(0,1) has sd 1/sqrt(12 N).
  EXPECT_NEAR(sum / kN, 0.5, 5.0 / std::sqrt(12.0 * kN));
}

TEST(RngStream, BelowIsUniform) {
  RngStream rng(9, 9);
  constexpr int kBound = 7;
  constexpr int kN = 700'000;
  std::array<int, kBound> counts{};
  for (int i = 0; i < kN; ++i) {
    const auto v = rng.below(kBound);
    ASSERT_LT(v, static_cast<std::uint64_t>(kBound));
    ++counts[v];
  }
  const double p = 1.0 / kBound;
  const double sd = std::sqrt(kN * p * (1 - p));
  for (const int c : counts) EXPECT_NEAR(c, kN * p, 5 * sd);
}

TEST(DeriveSeed, DependsOnEveryInput) {
  const auto base = derive_seed(1, "init", 0);
  EXPECT_EQ(base, derive_seed(1, "init", 0));
  EXPECT_NE(base, derive_seed(2, "init", 0));
  EXPECT_NE(base, derive_seed(1, "shuffle", 0));
  EXPECT_NE(base, derive_seed(1, "init", 1));
}

TEST(Shuffle, IsAPermutationAndDeterministic) {
  std::vector<int> a(100);
  std::iota(a.begin(), a.end(), 0);
  auto b = a;
  RngStream r1(5, 0);
  RngStream r2(5, 0);
  shuffle(std::span<int>(a), r1);
  shuffle(std::span<int>(b), r2);
  EXPECT_EQ(a, b);
  auto sorted = a;
  std::sort(sorted.begin(), sorted.end());
  for (int i = 0; i < 100; ++i) EXPECT_EQ(sorted[static_cast<std::size_t>(i)], i);
  EXPECT_NE(a, sorted);
}

}  // namespace
}  // namespace cuebias
