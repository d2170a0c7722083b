#include <gtest/gtest.h>

#include "featvid/rate_distortion.hpp"

using namespace featvid;

TEST(RateDistortion, LosslessIsExactAndRateIsMonotone) {
  const auto seq = prepare_sequence(translating_sphere_scene(16, 3), 4096);
  const auto frames = bake_sequence(seq);
  const auto cams = heldout_cameras(2, 24);
  const std::vector<CodecSettings> settings = {{1, true}, {1, false}, {2, false}, {4, false}, {8, false}, {16, false}};
  const std::vector<int> eval = {0, 2};
  const auto rd = rate_distortion(seq, frames, reference_mlp(), cams, settings, eval, 1);
  ASSERT_EQ(rd.size(), settings.size());
  EXPECT_TRUE(std::isinf(rd[0].psnr));
  for (std::size_t i = 2; i < rd.size(); ++i) EXPECT_LE(rd[i].bytes, rd[i - 1].bytes) << settings_label(settings[i]);
  for (std::size_t i = 1; i < rd.size(); ++i) {
    EXPECT_TRUE(std::isfinite(rd[i].psnr));
    EXPECT_GT(rd[i].psnr, 15.0);
    EXPECT_DOUBLE_EQ(rd[i].bytes_per_frame, double(rd[i].bytes) / 3.0);
  }
  EXPECT_GT(rd[1].psnr, rd.back().psnr);
}

TEST(RateDistortion, HeldOutViewsAvoidTrainingAzimuths) {
  FitConfig cfg;
  const auto train = training_cameras(cfg);
  const auto held = heldout_cameras(cfg.views, cfg.view_size);
  for (const auto& h : held)
    for (const auto& t : train) EXPECT_NE(h.world_from_camera, t.world_from_camera);
}

TEST(LayoutAblation, BothArmsEncodeTheSameScene) {
  const auto r = layout_ablation(translating_sphere_scene(24, 3), 1u << 20, {1, false}, 1);
  EXPECT_GT(r.morton_bytes, 0u);
  EXPECT_GT(r.row_major_bytes, 0u);
  EXPECT_LT(r.morton_bytes, r.row_major_bytes);
}
