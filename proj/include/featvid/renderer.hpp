#pragma once

// Deferred volume rendering: march a ray through the expanded volume with
// pyramid-based empty-space skipping, accumulate features weighted by
// transmittance, then decode the ray feature once with the tiny MLP.

#include <optional>

#include "featvid/camera.hpp"
#include "featvid/feature_field.hpp"
#include "featvid/image.hpp"
#include "featvid/mlp.hpp"
#include "featvid/occupancy.hpp"

namespace featvid {

template <typename Real>
struct RaySample {
  Real t = 0;
  Real delta = 0;
  Real density = 0;
  std::array<Real, kFeatureChannels> feature{};
};

template <typename Real>
struct Accumulated {
  std::array<Real, kFeatureChannels> feature{};
  Real opacity = 0;
};

/// f = sum_k T_k (1 - exp(-sigma_k delta_k)) f_k, T_k = exp(-sum_{j<k} sigma_j delta_j).
/// Transmittance is carried as a running optical depth. `weights`, when
/// given, receives the per-sample weights.
template <typename Real>
Accumulated<Real> accumulate(std::span<const RaySample<Real>> samples, std::vector<Real>* weights = nullptr) {
  Accumulated<Real> out;
  Real depth = 0;
  if (weights) weights->assign(samples.size(), Real(0));
  for (std::size_t k = 0; k < samples.size(); ++k) {
    const auto& s = samples[k];
    const Real tau = s.density * s.delta;
    const Real w = std::exp(-depth) * -std::expm1(-tau);
    depth += tau;
    if (weights) (*weights)[k] = w;
    out.opacity += w;
    for (int c = 0; c < kFeatureChannels; ++c) out.feature[std::size_t(c)] += w * s.feature[std::size_t(c)];
  }
  return out;
}

/// Parametric overlap of the ray with the unit cube, clipped to t >= 0.
inline std::optional<std::pair<double, double>> unit_cube_span(const Ray& ray) {
  double t0 = 0.0, t1 = std::numeric_limits<double>::infinity();
  for (int a = 0; a < 3; ++a) {
    const double o = ray.origin[a], d = ray.direction[a];
    if (std::abs(d) < 1e-15) {
      if (o < 0.0 || o > 1.0) return std::nullopt;
      continue;
    }
    double ta = (0.0 - o) / d, tb = (1.0 - o) / d;
    if (ta > tb) std::swap(ta, tb);
    t0 = std::max(t0, ta);
    t1 = std::min(t1, tb);
  }
  if (!(t1 > t0)) return std::nullopt;
  return std::make_pair(t0, t1);
}

/// Lower-corner vertex of the trilinear cell containing p (clamped inside).
inline std::array<int, 3> cell_base(const Grid3& g, Vec3 p) {
  const int dims[3] = {g.nx, g.ny, g.nz};
  std::array<int, 3> b{};
  for (int a = 0; a < 3; ++a) b[std::size_t(a)] = std::clamp(int(std::floor(p[a] * double(dims[a] - 1))), 0, dims[a] - 2);
  return b;
}

struct MarchStats {
  std::size_t tested = 0;
  std::size_t taken = 0;
};

/// Visits segment midpoints t_k = t_near + (k + 1/2) step (the final segment
/// truncated at the exit) whose trilinear support may be nonzero. With a
/// pyramid, a sample is dropped when every cell covering its 8 corner
/// vertices is clear at some level; jumps skip whole clear regions and the
/// landing sample is always re-tested, so nothing nonzero is ever skipped.
template <typename Fn>
void march_positions(const Grid3& grid, const OccupancyPyramid* pyr, const Ray& ray, double step, Fn&& visit,
                     MarchStats* stats = nullptr) {
  if (!(step > 0.0)) fail(Errc::range, "march step must be positive");
  const auto span = unit_cube_span(ray);
  if (!span) return;
  const auto [t_near, t_far] = *span;
  if (pyr && pyr->empty()) return;
  const double length = t_far - t_near;
  const auto count = std::size_t(std::ceil(length / step));
  const int dims[3] = {grid.nx, grid.ny, grid.nz};
  for (std::size_t k = 0; k < count;) {
    const double a = t_near + double(k) * step;
    const double b = std::min(t_far, a + step);
    const double t = 0.5 * (a + b);
    const Vec3 p = ray.origin + ray.direction * t;
    if (stats) ++stats->tested;
    if (pyr) {
      const auto lo = cell_base(grid, p);
      const std::array<int, 3> hi{lo[0] + 1, lo[1] + 1, lo[2] + 1};
      std::size_t clear_level = pyr->level_count();
      for (std::size_t lvl = pyr->level_count(); lvl-- > 0;) {
        if (pyr->box_clear(lvl, lo, hi)) {
          clear_level = lvl;
          break;
        }
      }
      if (clear_level != pyr->level_count()) {
        // Vertex-index box proven clear at clear_level; any sample whose
        // cell base stays in [box_lo, box_hi - 1] is clear too.
        double t_exit = std::numeric_limits<double>::infinity();
        for (int ax = 0; ax < 3; ++ax) {
          const int box_lo = (lo[std::size_t(ax)] >> clear_level) << clear_level;
          const int box_hi = std::min((((hi[std::size_t(ax)] >> clear_level) + 1) << clear_level) - 1, dims[ax] - 1);
          const double scale = double(dims[ax] - 1);
          const double d = ray.direction[ax] * scale;
          const double o = ray.origin[ax] * scale;
          if (d > 1e-15) t_exit = std::min(t_exit, (double(box_hi) - o) / d);
          else if (d < -1e-15) t_exit = std::min(t_exit, (double(box_lo) - o) / d);
        }
        std::size_t next = k + 1;
        if (std::isfinite(t_exit)) {
          const double kk = std::floor((t_exit - t_near) / step - 0.5);
          if (kk > double(next)) next = std::min(count, std::size_t(kk));
        } else {
          next = count;
        }
        k = next;
        continue;
      }
    }
    if (stats) ++stats->taken;
    visit(t, b - a, p);
    ++k;
  }
}

inline std::vector<RaySample<double>> march_ray(const ExpandedVolume& vol, const OccupancyPyramid* pyr, const Ray& ray,
                                                double step, MarchStats* stats = nullptr) {
  std::vector<RaySample<double>> out;
  march_positions(
      vol.grid, pyr, ray, step,
      [&](double t, double delta, Vec3 p) {
        const FieldSample s = sample(vol, p);
        RaySample<double> rs;
        rs.t = t;
        rs.delta = delta;
        rs.density = s.density;
        for (int c = 0; c < kFeatureChannels; ++c) rs.feature[std::size_t(c)] = s.feature[std::size_t(c)];
        out.push_back(rs);
      },
      stats);
  return out;
}

enum class Background { decoded, white };

inline std::string_view background_name(Background b) { return b == Background::white ? "white" : "decoded"; }

struct RenderOptions {
  double step = 0.0;  // 0 selects half a voxel edge
  Background background = Background::decoded;
  bool skip_empty = true;
  int frequencies = kEncodingFrequencies;
  unsigned workers = default_workers();
};

inline double default_step(const Grid3& g) { return 0.5 / double(std::max({g.nx, g.ny, g.nz}) - 1); }

/// Color of one ray: decode(accumulated feature, encoded direction), then
/// optional white compositing by accumulated opacity.
inline std::array<float, 4> shade_ray(const ExpandedVolume& vol, const OccupancyPyramid* pyr, const TinyMlp& mlp,
                                      const Ray& ray, double step, const RenderOptions& opt) {
  const auto samples = march_ray(vol, pyr, ray, step);
  const auto acc = accumulate<double>(samples);
  std::array<float, kFeatureChannels> feat{};
  for (int c = 0; c < kFeatureChannels; ++c) feat[std::size_t(c)] = float(acc.feature[std::size_t(c)]);
  const auto enc = positional_encode<float>(ray.direction, opt.frequencies);
  const auto rgb = decode<float>(mlp, feat, enc);
  const float alpha = float(acc.opacity);
  std::array<float, 4> out{rgb[0], rgb[1], rgb[2], alpha};
  if (opt.background == Background::white)
    for (int k = 0; k < 3; ++k) out[std::size_t(k)] = alpha * rgb[std::size_t(k)] + (1.0f - alpha);
  return out;
}

inline Image render_volume(const ExpandedVolume& vol, const OccupancyPyramid* pyr, const TinyMlp& mlp,
                           const Camera& cam, const RenderOptions& opt = {}) {
  cam.validate();
  mlp.check_shapes();
  const double step = opt.step > 0.0 ? opt.step : default_step(vol.grid);
  const OccupancyPyramid* skip = opt.skip_empty ? pyr : nullptr;
  Image img(cam.width, cam.height);
  parallel_for(img.pixel_count(), opt.workers, [&](std::size_t p) {
    const int u = int(p % std::size_t(cam.width)), v = int(p / std::size_t(cam.width));
    const auto c = shade_ray(vol, skip, mlp, cam.ray(u, v), step, opt);
    std::copy_n(c.begin(), 3, img.pixel(p));
    img.opacity[p] = c[3];
  });
  return img;
}

/// A group of frames ready to render: one mapping and skip pyramid shared by
/// all member frames.
struct LoadedGroup {
  int group_id = 0;
  int start_frame = 0;
  MappingTable map;
  OccupancyPyramid pyramid;
  std::vector<FeatureImage> frames;

  bool contains(int frame) const { return frame >= start_frame && frame < start_frame + int(frames.size()); }
};

inline Image render(std::span<const LoadedGroup> groups, const TinyMlp& mlp, const Camera& cam, int frame,
                    const RenderOptions& opt = {}, const DensityActivation& act = {}) {
  for (const auto& g : groups) {
    if (!g.contains(frame)) continue;
    const auto vol = expand(g.frames[std::size_t(frame - g.start_frame)], g.map, act, opt.workers);
    return render_volume(vol, &g.pyramid, mlp, cam, opt);
  }
  fail(Errc::load, "frame " + std::to_string(frame) + " is not inside a loaded group");
}

}  // namespace featvid
