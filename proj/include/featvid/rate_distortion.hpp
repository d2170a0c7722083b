#pragma once

// Rate-distortion sweeps over the quantizer and the paired A/B encodes used
// by the bench: mapping layout, temporal loss, spatial loss.

#include "featvid/codec.hpp"
#include "featvid/training.hpp"

namespace featvid {

/// Views between the training rig's azimuths, never used for fitting.
inline std::vector<Camera> heldout_cameras(int count, int size, double distance = 1.6) {
  std::vector<Camera> out;
  for (int i = 0; i < count; ++i) {
    const double az = 6.283185307179586 * (double(i) + 0.5) / double(count);
    out.push_back(orbit_camera(az, 0.1, distance, size, size));
  }
  return out;
}

struct RdPoint {
  CodecSettings settings;
  std::size_t bytes = 0;  // coded payload over all groups
  double bytes_per_frame = 0.0;
  double psnr = 0.0;  // vs the lossless-path render
};

inline std::string settings_label(const CodecSettings& s) { return s.lossless ? "lossless" : std::to_string(s.q); }

/// Renders `eval_frames` from `cams` after a round trip through the codec.
/// The reference is the same render from the lossless round trip, so the
/// lossless entry reports infinite PSNR.
inline std::vector<RdPoint> rate_distortion(const PreparedSequence& seq, const std::vector<FeatureImage>& frames,
                                            const TinyMlp& mlp, std::span<const Camera> cams,
                                            std::span<const CodecSettings> settings, std::span<const int> eval_frames,
                                            unsigned workers = default_workers()) {
  const auto opt = fit_render_options(workers);
  auto render_all = [&](const std::vector<FeatureImage>& decoded) {
    const auto groups = loaded_groups(seq, decoded);
    std::vector<Image> out;
    for (int t : eval_frames)
      for (const auto& cam : cams) out.push_back(render(groups, mlp, cam, t, opt));
    return out;
  };
  const auto reference = render_all(decode_stream(encode_stream(frames, {1, true}, workers)));
  std::vector<RdPoint> out;
  for (const auto& s : settings) {
    const auto enc = encode_stream(frames, s, workers);
    const auto imgs = render_all(decode_stream(enc));
    double total = 0.0;
    for (std::size_t i = 0; i < imgs.size(); ++i) total += mse(imgs[i], reference[i]);
    RdPoint p;
    p.settings = s;
    p.bytes = enc.total_payload();
    p.bytes_per_frame = double(p.bytes) / double(frames.size());
    p.psnr = psnr_from_mse(imgs.empty() ? 0.0 : total / double(imgs.size()));
    out.push_back(p);
  }
  return out;
}

// ---------------------------------------------------------------------------
// A/B ablations

struct LayoutAblation {
  std::size_t morton_bytes = 0;
  std::size_t row_major_bytes = 0;
};

/// Same scene, same quantizer, ground-truth features; only the 2D layout of
/// the mapping differs.
inline LayoutAblation layout_ablation(const SyntheticScene& scene, std::size_t theta, const CodecSettings& s,
                                      unsigned workers = default_workers()) {
  LayoutAblation out;
  for (Layout layout : {Layout::morton_block, Layout::row_major}) {
    const auto seq = prepare_sequence(scene, theta, kDefaultGamma, layout);
    const auto bytes = encode_stream(bake_sequence(seq), s, workers).total_payload();
    (layout == Layout::morton_block ? out.morton_bytes : out.row_major_bytes) = bytes;
  }
  return out;
}

struct LossArm {
  double lambda = 0.0;
  std::size_t keyframe_bytes = 0;
  std::size_t inter_bytes = 0;
  double mean_train_psnr = 0.0;
  double mean_photometric = 0.0;
};

struct LossAblation {
  LossArm with;
  LossArm without;
};

enum class AblatedLoss { temporal, spatial };

/// Fits the sequence twice, with the chosen weight at `lambda` and at zero,
/// all else equal, and encodes both at the same quantizer.
inline LossAblation loss_ablation(const PreparedSequence& seq, FitConfig cfg, AblatedLoss which, double lambda,
                                  const CodecSettings& s) {
  LossAblation out;
  for (LossArm* arm : {&out.with, &out.without}) {
    const double value = arm == &out.with ? lambda : 0.0;
    (which == AblatedLoss::temporal ? cfg.weights.lambda_t : cfg.weights.lambda_s) = value;
    const auto fit = fit_sequence(seq, cfg);
    const auto enc = encode_stream(fit.frames, s, cfg.workers);
    arm->lambda = value;
    arm->keyframe_bytes = enc.keyframe_bytes();
    arm->inter_bytes = enc.inter_bytes();
    for (const auto& st : fit.stats) {
      arm->mean_train_psnr += st.train_psnr / double(fit.stats.size());
      arm->mean_photometric += st.photometric / double(fit.stats.size());
    }
  }
  return out;
}

}  // namespace featvid
