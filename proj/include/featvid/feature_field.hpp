#pragma once

// Feature images (channel 0 = raw density logit, channels 1..h = appearance
// feature) and the fetch / expand / sample paths over a mapping table.

#include "featvid/mapping.hpp"
#include "featvid/volume.hpp"

namespace featvid {

inline constexpr int kImageChannels = 1 + kFeatureChannels;

/// density = softplus(raw + shift). A raw value of 0 maps to ~0.018, so a
/// zero-initialized image starts nearly transparent.
struct DensityActivation {
  double shift = -4.0;

  template <typename Real>
  Real operator()(Real raw) const {
    const Real x = raw + Real(shift);
    return x > Real(20) ? x : Real(std::log1p(std::exp(x)));
  }
  /// d/draw of the activation, i.e. logistic(raw + shift).
  template <typename Real>
  Real derivative(Real raw) const {
    return Real(1) / (Real(1) + Real(std::exp(-(raw + Real(shift)))));
  }
  /// Raw value producing `density`, floored so zero density stays finite.
  double inverse(double density) const {
    constexpr double kRawFloor = -12.0;
    if (density <= 0.0) return kRawFloor;
    const double pre = density > 20.0 ? density : std::log(std::expm1(density));
    return std::max(kRawFloor, pre - shift);
  }
};

/// Pixel-interleaved storage: data[p * channels + c], p = v * width + u.
template <typename Real = float>
struct FeatureImageT {
  int width = 0;
  int height = 0;
  int channels = kImageChannels;
  int frame_index = 0;
  int group_id = 0;
  std::vector<Real> data;

  FeatureImageT() = default;
  FeatureImageT(int w, int h, int ch = kImageChannels)
      : width(w), height(h), channels(ch), data(std::size_t(w) * std::size_t(h) * std::size_t(ch), Real(0)) {}

  std::size_t pixel_count() const { return std::size_t(width) * std::size_t(height); }
  Real* pixel(std::size_t p) { return data.data() + p * std::size_t(channels); }
  const Real* pixel(std::size_t p) const { return data.data() + p * std::size_t(channels); }
  Real& at(int u, int v, int c) { return data[(std::size_t(v) * std::size_t(width) + std::size_t(u)) * std::size_t(channels) + std::size_t(c)]; }
  Real at(int u, int v, int c) const {
    return data[(std::size_t(v) * std::size_t(width) + std::size_t(u)) * std::size_t(channels) + std::size_t(c)];
  }

  template <typename Other>
  FeatureImageT<Other> cast() const {
    FeatureImageT<Other> out(width, height, channels);
    out.frame_index = frame_index;
    out.group_id = group_id;
    for (std::size_t i = 0; i < data.size(); ++i) out.data[i] = Other(data[i]);
    return out;
  }
  friend bool operator==(const FeatureImageT&, const FeatureImageT&) = default;
};

using FeatureImage = FeatureImageT<float>;

/// Dense vertex volume expanded from a feature image: activated density and
/// raw features at mapped vertices, exact zeros elsewhere.
struct ExpandedVolume {
  Grid3 grid;
  int channels = kFeatureChannels;
  std::vector<float> density;
  std::vector<float> features;  // vertex-interleaved

  ExpandedVolume() = default;
  ExpandedVolume(Grid3 g, int ch)
      : grid(g), channels(ch), density(g.count(), 0.0f), features(g.count() * std::size_t(ch), 0.0f) {}

  const float* feature(std::size_t v) const { return features.data() + v * std::size_t(channels); }
  friend bool operator==(const ExpandedVolume&, const ExpandedVolume&) = default;
};

struct FieldSample {
  float density = 0.0f;
  std::array<float, kFeatureChannels> feature{};
  friend bool operator==(const FieldSample&, const FieldSample&) = default;
};

/// Table lookups made by fetch() on this thread; fetch must stay O(1).
inline thread_local std::size_t fetch_lookups = 0;

inline void check_pairing(const FeatureImage& img, const MappingTable& map) {
  if (img.width != map.width() || img.height != map.height())
    fail(Errc::shape, "feature image size does not match its mapping table");
  if (img.channels != kImageChannels) fail(Errc::shape, "feature image must have 1 + h channels");
}

inline FieldSample fetch(const FeatureImage& img, const MappingTable& map, int x, int y, int z,
                         const DensityActivation& act = {}) {
  if (!map.grid().contains(x, y, z)) fail(Errc::range, "fetch: vertex outside the grid");
  ++fetch_lookups;
  const auto p = map.pixel_index(map.grid().index(x, y, z));
  FieldSample s;
  if (p == kEmpty) return s;
  const float* px = img.pixel(std::size_t(p));
  s.density = act(px[0]);
  std::copy(px + 1, px + kImageChannels, s.feature.begin());
  return s;
}

inline ExpandedVolume expand(const FeatureImage& img, const MappingTable& map, const DensityActivation& act = {},
                             unsigned workers = default_workers()) {
  check_pairing(img, map);
  ExpandedVolume vol(map.grid(), kFeatureChannels);
  // the mapping is a bijection, so pixel writes never collide
  parallel_for(img.pixel_count(), workers, [&](std::size_t p) {
    const auto v = map.vertex_index(p);
    if (v == kEmpty) return;
    const float* px = img.pixel(p);
    vol.density[std::size_t(v)] = act(px[0]);
    std::copy(px + 1, px + kImageChannels, vol.features.begin() + std::ptrdiff_t(std::size_t(v) * kFeatureChannels));
  });
  return vol;
}

/// Trilinear interpolation at a world point in [0,1]^3; zero outside.
inline FieldSample sample(const ExpandedVolume& vol, Vec3 p) {
  FieldSample s;
  const Grid3 g = vol.grid;
  if (p.x < 0.0 || p.y < 0.0 || p.z < 0.0 || p.x > 1.0 || p.y > 1.0 || p.z > 1.0) return s;
  int base[3];
  double frac[3];
  const int dims[3] = {g.nx, g.ny, g.nz};
  for (int a = 0; a < 3; ++a) {
    const double f = p[a] * double(dims[a] - 1);
    base[a] = std::min(int(std::floor(f)), dims[a] - 2);
    frac[a] = f - double(base[a]);
  }
  double density = 0.0;
  double feat[kFeatureChannels] = {};
  for (int corner = 0; corner < 8; ++corner) {
    const int dx = corner & 1, dy = (corner >> 1) & 1, dz = (corner >> 2) & 1;
    const double w = (dx ? frac[0] : 1.0 - frac[0]) * (dy ? frac[1] : 1.0 - frac[1]) * (dz ? frac[2] : 1.0 - frac[2]);
    if (w == 0.0) continue;
    const std::size_t v = g.index(base[0] + dx, base[1] + dy, base[2] + dz);
    density += w * double(vol.density[v]);
    const float* f = vol.feature(v);
    for (int c = 0; c < kFeatureChannels; ++c) feat[c] += w * double(f[c]);
  }
  s.density = float(density);
  for (int c = 0; c < kFeatureChannels; ++c) s.feature[std::size_t(c)] = float(feat[c]);
  return s;
}

// ---------------------------------------------------------------------------
// baking: per-vertex values scattered into the image through the forward map

/// `per_vertex` holds `channels` interleaved values per grid vertex.
inline FeatureImage scatter(const MappingTable& map, std::span<const float> per_vertex, int channels = kImageChannels) {
  if (per_vertex.size() != map.grid().count() * std::size_t(channels)) fail(Errc::shape, "scatter: volume size mismatch");
  FeatureImage img(map.width(), map.height(), channels);
  for (std::size_t p = 0; p < img.pixel_count(); ++p) {
    const auto v = map.vertex_index(p);
    if (v == kEmpty) continue;
    std::copy_n(per_vertex.begin() + std::ptrdiff_t(std::size_t(v) * std::size_t(channels)), channels, img.pixel(p));
  }
  return img;
}

/// Inverse of scatter on mapped vertices; unmapped vertices read as zero.
inline std::vector<float> gather(const FeatureImage& img, const MappingTable& map) {
  std::vector<float> out(map.grid().count() * std::size_t(img.channels), 0.0f);
  for (std::size_t p = 0; p < img.pixel_count(); ++p) {
    const auto v = map.vertex_index(p);
    if (v == kEmpty) continue;
    std::copy_n(img.pixel(p), img.channels, out.begin() + std::ptrdiff_t(std::size_t(v) * std::size_t(img.channels)));
  }
  return out;
}

/// Lossless bake of ground-truth volumes: channel 0 = inverse activation of
/// density, channels 1..h = features.
inline FeatureImage bake(const DensityVolume& density, const FeatureVolume& features, const MappingTable& map,
                         int frame_index = 0, int group_id = 0, const DensityActivation& act = {}) {
  if (!(density.grid == map.grid()) || !(features.grid == map.grid()) || features.channels != kFeatureChannels)
    fail(Errc::shape, "bake: volumes do not match the mapping grid");
  std::vector<float> stacked(map.grid().count() * kImageChannels);
  for (std::size_t v = 0; v < map.grid().count(); ++v) {
    if (map.pixel_index(v) == kEmpty) continue;
    stacked[v * kImageChannels] = float(act.inverse(density.values[v]));
    std::copy_n(features.at(v).begin(), kFeatureChannels, stacked.begin() + std::ptrdiff_t(v * kImageChannels + 1));
  }
  FeatureImage img = scatter(map, stacked);
  img.frame_index = frame_index;
  img.group_id = group_id;
  return img;
}

// VRFI: "VRFI", u32 width, height, channels, i32 frame_index, i32 group_id,
// then float32 planes (channel-major).

inline std::vector<std::uint8_t> encode_vrfi(const FeatureImage& img) {
  ByteWriter w;
  w.magic("VRFI");
  w.put<std::uint32_t>(std::uint32_t(img.width));
  w.put<std::uint32_t>(std::uint32_t(img.height));
  w.put<std::uint32_t>(std::uint32_t(img.channels));
  w.put<std::int32_t>(img.frame_index);
  w.put<std::int32_t>(img.group_id);
  for (int c = 0; c < img.channels; ++c)
    for (std::size_t p = 0; p < img.pixel_count(); ++p) w.put<float>(img.pixel(p)[c]);
  return w.take();
}

inline FeatureImage decode_vrfi(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  r.expect_magic("VRFI");
  const int w = int(r.get<std::uint32_t>());
  const int h = int(r.get<std::uint32_t>());
  const int ch = int(r.get<std::uint32_t>());
  FeatureImage img(w, h, ch);
  img.frame_index = r.get<std::int32_t>();
  img.group_id = r.get<std::int32_t>();
  for (int c = 0; c < ch; ++c)
    for (std::size_t p = 0; p < img.pixel_count(); ++p) img.pixel(p)[c] = r.get<float>();
  return img;
}

}  // namespace featvid
