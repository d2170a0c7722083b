#include <gtest/gtest.h>

#include "test_support.hpp"
#include "featvid/morton.hpp"

using namespace featvid;
using featvid::testing::interleave_bits;

TEST(Morton3, KnownValues) {
  EXPECT_EQ(morton3_encode(0, 0, 0).value, 0u);
  EXPECT_EQ(morton3_encode(1, 0, 0).value, 1u);
  EXPECT_EQ(morton3_encode(0, 1, 0).value, 2u);
  EXPECT_EQ(morton3_encode(0, 0, 1).value, 4u);
  EXPECT_EQ(morton3_encode(1, 1, 1).value, 7u);
  EXPECT_EQ(morton3_encode(3, 5, 1).value, 143u);
}

TEST(Morton2, KnownValues) {
  EXPECT_EQ(morton2_encode(1, 0).value, 1u);
  EXPECT_EQ(morton2_encode(0, 1).value, 2u);
  EXPECT_EQ(morton2_encode(3, 2).value, 13u);
  static_assert(morton2_encode(3, 2).value == 13u);
}

TEST(Morton3, MatchesBitLoopOracleAndRoundTrips) {
  Rng rng(1);
  for (int i = 0; i < 20000; ++i) {
    const auto x = std::uint32_t(rng.below(kMorton3MaxCoord + 1));
    const auto y = std::uint32_t(rng.below(kMorton3MaxCoord + 1));
    const auto z = std::uint32_t(rng.below(kMorton3MaxCoord + 1));
    const auto code = morton3_encode(x, y, z);
    ASSERT_EQ(code.value, interleave_bits({x, y, z}));
    const auto back = morton3_decode(code);
    ASSERT_EQ(back[0], x);
    ASSERT_EQ(back[1], y);
    ASSERT_EQ(back[2], z);
  }
}

TEST(Morton3, ExhaustiveSmallCubeIsAPermutation) {
  std::vector<bool> seen(32 * 32 * 32, false);
  for (std::uint32_t z = 0; z < 32; ++z)
    for (std::uint32_t y = 0; y < 32; ++y)
      for (std::uint32_t x = 0; x < 32; ++x) {
        const auto c = morton3_encode(x, y, z).value;
        ASSERT_LT(c, seen.size());
        ASSERT_FALSE(seen[c]);
        seen[c] = true;
      }
}

TEST(Morton3, CoordinateAbove21BitsIsRangeError) {
  EXPECT_NO_THROW(morton3_encode(kMorton3MaxCoord, kMorton3MaxCoord, kMorton3MaxCoord));
  try {
    morton3_encode(kMorton3MaxCoord + 1, 0, 0);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::range);
  }
  EXPECT_THROW(morton3_encode(0, 0, 1u << 22), Error);
}

TEST(Morton2, MatchesOracleAndRoundTrips) {
  Rng rng(2);
  for (int i = 0; i < 20000; ++i) {
    const auto u = std::uint32_t(rng.next());
    const auto v = std::uint32_t(rng.next());
    const auto code = morton2_encode(u, v);
    ASSERT_EQ(code.value, interleave_bits({u, v}));
    const auto back = morton2_decode(code);
    ASSERT_EQ(back[0], u);
    ASSERT_EQ(back[1], v);
  }
}

TEST(Morton2, RanksOfAnEightByEightBlockCoverIt) {
  std::vector<bool> seen(64, false);
  for (std::uint64_t r = 0; r < 64; ++r) {
    const auto uv = morton2_decode(MortonCode{r});
    ASSERT_LT(uv[0], 8u);
    ASSERT_LT(uv[1], 8u);
    ASSERT_FALSE(seen[uv[1] * 8 + uv[0]]);
    seen[uv[1] * 8 + uv[0]] = true;
  }
}

TEST(Morton, OrderingFollowsValue) {
  EXPECT_LT(morton3_encode(1, 0, 0), morton3_encode(0, 1, 0));
  EXPECT_EQ(morton3_encode(2, 2, 2), morton3_encode(2, 2, 2));
}
