#pragma once

// Deterministic animated scenes built from signed-distance primitives. Each
// frame yields a density volume (50 * max(0, -sdf)) and a feature volume from
// a seeded affine rule squashed to [0, 1].

#include "json.hpp"

#include "featvid/volume.hpp"

namespace featvid {

enum class PrimitiveKind { sphere, torus, box };

/// center(t) = origin + velocity * t + amplitude * sin(2 pi frequency t), t in frames.
struct CenterPath {
  Vec3 origin{0.5, 0.5, 0.5};
  Vec3 velocity{};
  Vec3 amplitude{};
  double frequency = 0.0;

  Vec3 at(double t) const {
    const double s = std::sin(6.283185307179586 * frequency * t);
    return origin + velocity * t + amplitude * s;
  }
};

struct Primitive {
  PrimitiveKind kind = PrimitiveKind::sphere;
  CenterPath center;
  double radius = 0.25;        // sphere radius, torus major radius
  double minor_radius = 0.05;  // torus tube radius
  Vec3 half_extent{0.1, 0.1, 0.1};

  /// Radius of a ball around the center that contains the primitive.
  double bound() const {
    switch (kind) {
      case PrimitiveKind::sphere: return radius;
      case PrimitiveKind::torus: return radius + minor_radius;
      case PrimitiveKind::box: return norm(half_extent);
    }
    return radius;
  }

  double sdf(Vec3 p, double t) const {
    const Vec3 q = p - center.at(t);
    switch (kind) {
      case PrimitiveKind::sphere: return norm(q) - radius;
      case PrimitiveKind::torus: {
        const double ring = std::sqrt(q.x * q.x + q.z * q.z) - radius;
        return std::sqrt(ring * ring + q.y * q.y) - minor_radius;
      }
      case PrimitiveKind::box: {
        const Vec3 d{std::abs(q.x) - half_extent.x, std::abs(q.y) - half_extent.y, std::abs(q.z) - half_extent.z};
        const Vec3 outside{std::max(d.x, 0.0), std::max(d.y, 0.0), std::max(d.z, 0.0)};
        return norm(outside) + std::min(std::max(d.x, std::max(d.y, d.z)), 0.0);
      }
    }
    return 1.0;
  }
};

/// Maps (position, time phase) to a feature vector in [0,1]^channels.
class FeatureRule {
 public:
  static constexpr int kInputs = 5;  // x, y, z, phase, bias

  FeatureRule(std::uint64_t seed, int channels) : channels_(channels), weights_(std::size_t(channels) * kInputs) {
    Rng rng(seed ^ 0xFEA7u);
    for (int c = 0; c < channels; ++c) {
      for (int i = 0; i < 3; ++i) weights_[std::size_t(c) * kInputs + i] = 3.0 * rng.normal();
      weights_[std::size_t(c) * kInputs + 3] = 1.0 * rng.normal();
      weights_[std::size_t(c) * kInputs + 4] = 0.5 * rng.normal();
    }
  }

  int channels() const { return channels_; }

  void eval(Vec3 p, double phase, std::span<float> out) const {
    const double in[kInputs] = {p.x - 0.5, p.y - 0.5, p.z - 0.5, phase, 1.0};
    for (int c = 0; c < channels_; ++c) {
      double a = 0.0;
      for (int i = 0; i < kInputs; ++i) a += weights_[std::size_t(c) * kInputs + i] * in[i];
      out[std::size_t(c)] = float(1.0 / (1.0 + std::exp(-a)));
    }
  }

 private:
  int channels_;
  std::vector<double> weights_;
};

struct SyntheticScene {
  int resolution = 64;
  int frame_count = 1;
  std::uint64_t seed = 0;
  int channels = kFeatureChannels;
  double density_scale = 50.0;
  std::vector<Primitive> primitives;

  Grid3 grid() const { return cube(resolution); }
  FeatureRule feature_rule() const { return FeatureRule(seed, channels); }
  double phase(int t) const { return std::sin(6.283185307179586 * double(t) / double(std::max(frame_count, 1))); }

  double sdf(Vec3 p, int t) const {
    double d = 1e9;
    for (const auto& prim : primitives) d = std::min(d, prim.sdf(p, double(t)));
    return d;
  }

  /// Throws when a primitive leaves the unit cube in any frame or the
  /// parameters are unusable.
  void validate() const {
    if (resolution < 2) fail(Errc::range, "scene resolution must be >= 2");
    if (frame_count < 1) fail(Errc::range, "scene needs at least one frame");
    for (std::size_t i = 0; i < primitives.size(); ++i) {
      const auto& p = primitives[i];
      const double b = p.bound();
      for (int t = 0; t < frame_count; ++t) {
        const Vec3 c = p.center.at(t);
        for (int a = 0; a < 3; ++a) {
          if (c[a] - b < 0.0 || c[a] + b > 1.0)
            fail(Errc::range, "primitive " + std::to_string(i) + " leaves the unit cube at frame " + std::to_string(t));
        }
      }
    }
  }
};

struct SceneFrame {
  DensityVolume density;
  FeatureVolume features;
};

inline SceneFrame generate_frame(const SyntheticScene& scene, int t) {
  if (t < 0 || t >= scene.frame_count)
    fail(Errc::range, "frame " + std::to_string(t) + " outside [0, " + std::to_string(scene.frame_count) + ")");
  const Grid3 g = scene.grid();
  SceneFrame f{DensityVolume(g), FeatureVolume(g, scene.channels)};
  const FeatureRule rule = scene.feature_rule();
  const double phase = scene.phase(t);
  for (int z = 0; z < g.nz; ++z)
    for (int y = 0; y < g.ny; ++y)
      for (int x = 0; x < g.nx; ++x) {
        const Vec3 p = vertex_position(g, x, y, z);
        const std::size_t v = g.index(x, y, z);
        f.density.values[v] = float(scene.density_scale * std::max(0.0, -scene.sdf(p, t)));
        rule.eval(p, phase, f.features.at(v));
      }
  return f;
}

// ---------------------------------------------------------------------------
// presets used by tests, benches and the CLI demo

inline Primitive sphere_at(Vec3 c, double r, Vec3 velocity = {}) {
  Primitive p;
  p.kind = PrimitiveKind::sphere;
  p.center.origin = c;
  p.center.velocity = velocity;
  p.radius = r;
  return p;
}

inline SyntheticScene static_sphere_scene(int resolution, double radius = 0.25, std::uint64_t seed = 1) {
  SyntheticScene s;
  s.resolution = resolution;
  s.seed = seed;
  s.primitives.push_back(sphere_at({0.5, 0.5, 0.5}, radius));
  return s;
}

/// Sphere moving along +x by `voxels_per_frame` voxel edges per frame,
/// centered on the cube's midpoint over the sequence.
inline SyntheticScene translating_sphere_scene(int resolution, int frames, double radius = 0.2,
                                               double voxels_per_frame = 1.0, std::uint64_t seed = 1) {
  SyntheticScene s;
  s.resolution = resolution;
  s.frame_count = frames;
  s.seed = seed;
  const double step = voxels_per_frame / double(resolution - 1);
  const double span = step * double(frames - 1);
  s.primitives.push_back(sphere_at({0.5 - span / 2.0, 0.5, 0.5}, radius, {step, 0.0, 0.0}));
  return s;
}

inline SyntheticScene mixed_scene(int resolution, int frames, std::uint64_t seed = 3) {
  SyntheticScene s;
  s.resolution = resolution;
  s.frame_count = frames;
  s.seed = seed;
  s.primitives.push_back(sphere_at({0.35, 0.55, 0.5}, 0.15));
  Primitive torus;
  torus.kind = PrimitiveKind::torus;
  torus.center.origin = {0.6, 0.4, 0.55};
  torus.center.amplitude = {0.0, 0.05, 0.0};
  torus.center.frequency = 1.0 / std::max(frames, 1);
  torus.radius = 0.18;
  torus.minor_radius = 0.06;
  s.primitives.push_back(torus);
  Primitive box;
  box.kind = PrimitiveKind::box;
  box.center.origin = {0.5, 0.75, 0.35};
  box.half_extent = {0.12, 0.06, 0.08};
  s.primitives.push_back(box);
  return s;
}

// ---------------------------------------------------------------------------
// scene description JSON

inline nlohmann::json vec_json(Vec3 v) { return nlohmann::json::array({v.x, v.y, v.z}); }

inline Vec3 json_vec(const nlohmann::json& j) {
  if (!j.is_array() || j.size() != 3) fail(Errc::format, "expected a 3-vector");
  return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

inline nlohmann::json scene_to_json(const SyntheticScene& s) {
  nlohmann::json prims = nlohmann::json::array();
  for (const auto& p : s.primitives) {
    nlohmann::json j;
    j["kind"] = p.kind == PrimitiveKind::sphere ? "sphere" : (p.kind == PrimitiveKind::torus ? "torus" : "box");
    j["center_path"] = {{"origin", vec_json(p.center.origin)},
                        {"velocity", vec_json(p.center.velocity)},
                        {"amplitude", vec_json(p.center.amplitude)},
                        {"frequency", p.center.frequency}};
    j["radius"] = p.radius;
    if (p.kind == PrimitiveKind::torus) j["minor_radius"] = p.minor_radius;
    if (p.kind == PrimitiveKind::box) j["half_extent"] = vec_json(p.half_extent);
    prims.push_back(j);
  }
  return {{"resolution", s.resolution},
          {"frames", s.frame_count},
          {"seed", s.seed},
          {"channels", s.channels},
          {"density_scale", s.density_scale},
          {"primitives", prims}};
}

inline SyntheticScene scene_from_json(const nlohmann::json& j) {
  SyntheticScene s;
  try {
    s.resolution = j.at("resolution").get<int>();
    s.frame_count = j.at("frames").get<int>();
    s.seed = j.value("seed", std::uint64_t{0});
    s.channels = j.value("channels", kFeatureChannels);
    s.density_scale = j.value("density_scale", 50.0);
    for (const auto& pj : j.at("primitives")) {
      Primitive p;
      const auto kind = pj.at("kind").get<std::string>();
      if (kind == "sphere") p.kind = PrimitiveKind::sphere;
      else if (kind == "torus") p.kind = PrimitiveKind::torus;
      else if (kind == "box") p.kind = PrimitiveKind::box;
      else fail(Errc::format, "unknown primitive kind '" + kind + "'");
      if (pj.contains("center_path")) {
        const auto& cp = pj["center_path"];
        p.center.origin = json_vec(cp.at("origin"));
        if (cp.contains("velocity")) p.center.velocity = json_vec(cp["velocity"]);
        if (cp.contains("amplitude")) p.center.amplitude = json_vec(cp["amplitude"]);
        p.center.frequency = cp.value("frequency", 0.0);
      }
      p.radius = pj.value("radius", p.radius);
      p.minor_radius = pj.value("minor_radius", p.minor_radius);
      if (pj.contains("half_extent")) p.half_extent = json_vec(pj["half_extent"]);
      s.primitives.push_back(p);
    }
  } catch (const nlohmann::json::exception& e) {
    fail(Errc::format, std::string("scene json: ") + e.what());
  }
  s.validate();
  return s;
}

}  // namespace featvid
