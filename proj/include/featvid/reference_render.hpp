#pragma once

// Ground-truth images of a synthetic scene: dense marching (no skipping)
// over the scene's own vertex volumes with a fixed reference decoder.

#include "featvid/renderer.hpp"
#include "featvid/scene_synth.hpp"

namespace featvid {

inline ExpandedVolume ground_truth_volume(const SceneFrame& frame) {
  if (frame.features.channels != kFeatureChannels) fail(Errc::shape, "scene features must have h channels");
  ExpandedVolume vol(frame.density.grid, kFeatureChannels);
  vol.density = frame.density.values;
  vol.features = frame.features.values;
  return vol;
}

inline RenderOptions reference_options() {
  RenderOptions opt;
  opt.skip_empty = false;
  opt.background = Background::white;
  return opt;
}

inline Image reference_render(const SyntheticScene& scene, int t, const Camera& cam, const TinyMlp& mlp,
                              RenderOptions opt = reference_options()) {
  cam.validate();
  opt.skip_empty = false;
  const auto vol = ground_truth_volume(generate_frame(scene, t));
  return render_volume(vol, nullptr, mlp, cam, opt);
}

inline Image reference_render(const SyntheticScene& scene, int t, const Camera& cam) {
  return reference_render(scene, t, cam, reference_mlp());
}

}  // namespace featvid
