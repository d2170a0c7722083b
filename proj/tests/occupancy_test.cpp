#include <gtest/gtest.h>

#include "test_support.hpp"
#include "featvid/occupancy.hpp"
#include "featvid/scene_synth.hpp"

using namespace featvid;
using featvid::testing::ball_grid;
using featvid::testing::random_grid;
using featvid::testing::reference_plan;

TEST(Threshold, EmptyAndFullVolumes) {
  DensityVolume zero(cube(10));
  EXPECT_EQ(threshold_occupancy(zero, 0.003).occupied_count(), 0u);
  DensityVolume ones(Grid3{5, 6, 7});
  std::fill(ones.values.begin(), ones.values.end(), 1.0f);
  EXPECT_EQ(threshold_occupancy(ones, 0.003).occupied_count(), 5u * 6u * 7u);
}

TEST(Threshold, SphereFrameMatchesPerVoxelComparison) {
  const auto f = generate_frame(static_sphere_scene(40, 0.3), 0);
  const auto occ = threshold_occupancy(f.density, kDefaultGamma);
  std::size_t oracle = 0;
  for (std::size_t i = 0; i < f.density.values.size(); ++i) {
    const bool on = double(f.density.values[i]) > 0.003;
    oracle += on;
    ASSERT_EQ(occ.test(i), on);
  }
  EXPECT_EQ(occ.occupied_count(), oracle);
}

TEST(Threshold, NegativeGammaRejected) { EXPECT_THROW(threshold_occupancy(DensityVolume(cube(2)), -1.0), Error); }

TEST(Union, IdentityAndIdempotence) {
  Rng rng(5);
  const auto a = random_grid(rng, cube(12), 0.2);
  const OccupancyGrid empty(cube(12));
  EXPECT_EQ(union_of(a, empty), a);
  EXPECT_EQ(union_of(a, a), a);
}

TEST(Union, OffsetSpheresMatchElementwiseOr) {
  const Grid3 g = cube(32);
  const auto a = ball_grid(g, 0.4, 0.5, 0.5, 0.2);
  const auto b = ball_grid(g, 0.6, 0.5, 0.5, 0.2);
  std::size_t oracle = 0;
  for (std::size_t i = 0; i < g.count(); ++i) oracle += (a.test(i) || b.test(i));
  EXPECT_EQ(union_of(a, b).occupied_count(), oracle);
  EXPECT_LT(oracle, a.occupied_count() + b.occupied_count());
}

TEST(Union, MismatchedResolutionIsShapeError) {
  try {
    union_of(OccupancyGrid(cube(4)), OccupancyGrid(cube(5)));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::shape);
  }
}

namespace {

OccupancyGrid first_n(Grid3 g, std::size_t offset, std::size_t n) {
  OccupancyGrid o(g);
  for (std::size_t i = 0; i < n; ++i) o.set(offset + i);
  return o;
}

}  // namespace

TEST(PlanGroups, ConstantOccupancyIsOneGroup) {
  std::vector<OccupancyGrid> frames(12, first_n(cube(16), 0, 100));
  const auto plan = plan_groups(frames, 512 * 512);
  ASSERT_EQ(plan.groups.size(), 1u);
  EXPECT_EQ(plan.groups[0].start_frame, 0);
  EXPECT_EQ(plan.groups[0].end_frame, 11);
  EXPECT_EQ(plan.groups[0].union_occupancy.occupied_count(), 100u);
}

TEST(PlanGroups, DisjointFramesPairUpUnderTheta250) {
  std::vector<OccupancyGrid> frames;
  for (int t = 0; t < 9; ++t) frames.push_back(first_n(cube(16), std::size_t(t) * 100, 100));
  const auto plan = plan_groups(frames, 250);
  const auto oracle = reference_plan(frames, 250);
  ASSERT_EQ(plan.groups.size(), oracle.size());
  for (std::size_t g = 0; g < oracle.size(); ++g) {
    EXPECT_EQ(plan.groups[g].start_frame, oracle[g].first);
    EXPECT_EQ(plan.groups[g].end_frame, oracle[g].second);
  }
  for (std::size_t g = 0; g + 1 < plan.groups.size(); ++g) EXPECT_EQ(plan.groups[g].frame_count(), 2);
}

TEST(PlanGroups, TranslatingSphereMatchesQuadraticPlanner) {
  const auto scene = translating_sphere_scene(24, 10, 0.2, 1.0);
  std::vector<OccupancyGrid> frames;
  for (int t = 0; t < scene.frame_count; ++t) frames.push_back(threshold_occupancy(generate_frame(scene, t).density));
  const std::size_t theta = frames[0].occupied_count() + 400;
  const auto plan = plan_groups(frames, theta);
  const auto oracle = reference_plan(frames, theta);
  ASSERT_EQ(plan.groups.size(), oracle.size());
  EXPECT_GT(plan.groups.size(), 1u);
  for (std::size_t g = 0; g < oracle.size(); ++g) {
    EXPECT_EQ(plan.groups[g].start_frame, oracle[g].first);
    EXPECT_EQ(plan.groups[g].end_frame, oracle[g].second);
  }
}

TEST(PlanGroups, SingleFrameOverThetaNamesTheFrame) {
  std::vector<OccupancyGrid> frames{first_n(cube(8), 0, 10), first_n(cube(8), 0, 50)};
  try {
    plan_groups(frames, 20);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::overflow);
    EXPECT_NE(std::string(e.what()).find("frame 1"), std::string::npos);
  }
}

TEST(PlanGroups, PartitionMaximalityAndBudgetOnRandomSequences) {
  Rng rng(77);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<OccupancyGrid> frames;
    const int T = 2 + int(rng.below(10));
    for (int t = 0; t < T; ++t) frames.push_back(random_grid(rng, cube(8), 0.05 + 0.1 * rng.uniform()));
    std::size_t max_single = 0;
    for (const auto& f : frames) max_single = std::max(max_single, f.occupied_count());
    const std::size_t theta = max_single + rng.below(80);
    const auto plan = plan_groups(frames, theta);
    int expect_start = 0;
    for (std::size_t g = 0; g < plan.groups.size(); ++g) {
      const auto& grp = plan.groups[g];
      EXPECT_EQ(grp.start_frame, expect_start);
      EXPECT_LE(grp.union_occupancy.occupied_count(), theta);
      expect_start = grp.end_frame + 1;
      if (g + 1 < plan.groups.size()) {
        const auto extended = union_of(grp.union_occupancy, frames[std::size_t(grp.end_frame + 1)]);
        EXPECT_GT(extended.occupied_count(), theta);
      }
    }
    EXPECT_EQ(expect_start, T);
  }
}

TEST(Pyramid, PaperLadderFrom288) {
  OccupancyGrid g(cube(288));
  g.set(100, 200, 3);
  const auto pyr = build_pyramid(g);
  const std::vector<int> expect{288, 144, 72, 36, 18, 9};
  ASSERT_EQ(pyr.level_count(), expect.size());
  for (std::size_t i = 0; i < expect.size(); ++i) EXPECT_EQ(pyr.level(i).grid(), cube(expect[i]));
  EXPECT_TRUE(pyr.level(5).test(100 / 32, 200 / 32, 0));
}

TEST(Pyramid, EmptyGridGivesEmptyLevels) {
  const auto pyr = build_pyramid(OccupancyGrid(cube(30)));
  EXPECT_GE(pyr.level_count(), 2u);
  for (const auto& l : pyr.levels()) EXPECT_EQ(l.occupied_count(), 0u);
}

TEST(Pyramid, SmallGridStillHasTwoLevels) {
  const auto pyr = build_pyramid(OccupancyGrid(cube(6)));
  EXPECT_EQ(pyr.level_count(), 2u);
  EXPECT_EQ(pyr.level(1).grid(), cube(3));
}

TEST(Pyramid, ParentChildConsistencyExhaustive) {
  Rng rng(3);
  const auto grid = random_grid(rng, Grid3{37, 20, 25}, 0.01);
  const auto pyr = build_pyramid(grid);
  for (std::size_t l = 1; l < pyr.level_count(); ++l) {
    const auto& fine = pyr.level(l - 1);
    const auto& coarse = pyr.level(l);
    const Grid3 c = coarse.grid();
    for (int z = 0; z < c.nz; ++z)
      for (int y = 0; y < c.ny; ++y)
        for (int x = 0; x < c.nx; ++x) {
          bool any = false;
          for (int d = 0; d < 8; ++d) {
            const int xx = 2 * x + (d & 1), yy = 2 * y + ((d >> 1) & 1), zz = 2 * z + ((d >> 2) & 1);
            if (fine.grid().contains(xx, yy, zz) && fine.test(xx, yy, zz)) any = true;
          }
          ASSERT_EQ(coarse.test(x, y, z), any);
        }
  }
}

TEST(Pyramid, ClearCoarseCellsContainNoFineVoxels32) {
  Rng rng(11);
  const auto grid = featvid::testing::random_connected_set(rng, cube(32), 600);
  const auto pyr = build_pyramid(grid);
  for (std::size_t l = 0; l < pyr.level_count(); ++l) {
    const Grid3 c = pyr.level(l).grid();
    for (int z = 0; z < c.nz; ++z)
      for (int y = 0; y < c.ny; ++y)
        for (int x = 0; x < c.nx; ++x) {
          if (pyr.level(l).test(x, y, z)) continue;
          const int s = 1 << l;
          for (int zz = z * s; zz < std::min(32, (z + 1) * s); ++zz)
            for (int yy = y * s; yy < std::min(32, (y + 1) * s); ++yy)
              for (int xx = x * s; xx < std::min(32, (x + 1) * s); ++xx) ASSERT_FALSE(grid.test(xx, yy, zz));
        }
  }
}

TEST(OccupancyIo, VrfoAndPyramidRoundTrip) {
  Rng rng(8);
  const auto grid = random_grid(rng, Grid3{13, 9, 4}, 0.3);
  const auto bytes = encode_occupancy(grid);
  EXPECT_EQ(std::string(bytes.begin(), bytes.begin() + 4), "VRFO");
  EXPECT_EQ(bytes.size(), 16u + 2u * 9u * 4u);
  EXPECT_EQ(decode_occupancy(bytes), grid);
  EXPECT_EQ(decode_occupancy(bytes).occupied_count(), grid.occupied_count());

  const auto pyr = build_pyramid(random_grid(rng, cube(40), 0.02));
  EXPECT_EQ(decode_pyramid(encode_pyramid(pyr)), pyr);
}

TEST(OccupancyIo, PngSlicesPerZ) {
  OccupancyGrid g(Grid3{8, 4, 3});
  g.set(1, 2, 1);
  const auto slices = occupancy_png_slices(g);
  ASSERT_EQ(slices.size(), 3u);
  const auto img = decode_png(slices[1]);
  EXPECT_EQ(img.channels, 1);
  EXPECT_EQ(img.at(1, 2, 0), 255);
  EXPECT_EQ(img.at(0, 0, 0), 0);
}
