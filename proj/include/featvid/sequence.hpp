#pragma once

// A scene sequence prepared for fitting and streaming: per-frame occupancy,
// the group plan, and one mapping table + skip pyramid per group.

#include "featvid/feature_field.hpp"
#include "featvid/occupancy.hpp"
#include "featvid/renderer.hpp"
#include "featvid/scene_synth.hpp"

namespace featvid {

/// Smallest square feature image (side a multiple of 8) holding `count` pixels.
inline int image_side_for(std::size_t count) {
  int side = kBlockSize;
  while (std::size_t(side) * std::size_t(side) < count) side += kBlockSize;
  return side;
}

struct PreparedGroup {
  int group_id = 0;
  FrameGroup frames;
  MappingTable map;
  OccupancyPyramid pyramid;

  int frame_count() const { return frames.frame_count(); }
  bool contains(int t) const { return t >= frames.start_frame && t <= frames.end_frame; }
};

struct PreparedSequence {
  SyntheticScene scene;
  double gamma = kDefaultGamma;
  std::size_t theta = kDefaultTheta;
  Layout layout = Layout::morton_block;
  std::vector<OccupancyGrid> occupancy;
  GroupPlan plan;
  std::vector<PreparedGroup> groups;

  int frame_count() const { return int(occupancy.size()); }
  const PreparedGroup& group_for(int t) const {
    for (const auto& g : groups)
      if (g.contains(t)) return g;
    fail(Errc::range, "frame " + std::to_string(t) + " is not in the sequence");
  }
};

inline PreparedGroup prepare_group(int id, const FrameGroup& fg, Layout layout) {
  PreparedGroup g;
  g.group_id = id;
  g.frames = fg;
  const int side = image_side_for(fg.union_occupancy.occupied_count());
  g.map = build_mapping(fg.union_occupancy, side, side, layout);
  g.pyramid = build_pyramid(fg.union_occupancy);
  return g;
}

inline PreparedSequence prepare_sequence(const SyntheticScene& scene, std::size_t theta = kDefaultTheta,
                                         double gamma = kDefaultGamma, Layout layout = Layout::morton_block) {
  scene.validate();
  PreparedSequence seq;
  seq.scene = scene;
  seq.gamma = gamma;
  seq.theta = theta;
  seq.layout = layout;
  for (int t = 0; t < scene.frame_count; ++t)
    seq.occupancy.push_back(threshold_occupancy(generate_frame(scene, t).density, gamma));
  seq.plan = plan_groups(seq.occupancy, theta);
  for (std::size_t i = 0; i < seq.plan.groups.size(); ++i)
    seq.groups.push_back(prepare_group(int(i), seq.plan.groups[i], layout));
  return seq;
}

/// Lossless ground-truth feature image for frame t.
inline FeatureImage bake_frame(const PreparedSequence& seq, int t, const DensityActivation& act = {}) {
  const auto& g = seq.group_for(t);
  const auto f = generate_frame(seq.scene, t);
  return bake(f.density, f.features, g.map, t, g.group_id, act);
}

inline std::vector<FeatureImage> bake_sequence(const PreparedSequence& seq, const DensityActivation& act = {}) {
  std::vector<FeatureImage> out;
  for (int t = 0; t < seq.frame_count(); ++t) out.push_back(bake_frame(seq, t, act));
  return out;
}

/// Renderable groups over a set of per-frame images (indexed by frame).
inline std::vector<LoadedGroup> loaded_groups(const PreparedSequence& seq, const std::vector<FeatureImage>& frames) {
  if (int(frames.size()) != seq.frame_count()) fail(Errc::shape, "one feature image per frame is required");
  std::vector<LoadedGroup> out;
  for (const auto& g : seq.groups) {
    LoadedGroup lg{g.group_id, g.frames.start_frame, g.map, g.pyramid, {}};
    for (int t = g.frames.start_frame; t <= g.frames.end_frame; ++t) lg.frames.push_back(frames[std::size_t(t)]);
    out.push_back(std::move(lg));
  }
  return out;
}

}  // namespace featvid
