#pragma once

#include "featvid/core.hpp"

namespace featvid {

/// Feature channels per vertex (appearance feature width).
inline constexpr int kFeatureChannels = 12;

/// Nonnegative density on the vertex lattice of the unit cube; vertex i along
/// an axis sits at i/(N-1).
struct DensityVolume {
  Grid3 grid;
  std::vector<float> values;

  DensityVolume() = default;
  explicit DensityVolume(Grid3 g) : grid(g), values(g.count(), 0.0f) {}

  float at(int x, int y, int z) const { return values[grid.index(x, y, z)]; }
  float& at(int x, int y, int z) { return values[grid.index(x, y, z)]; }
  friend bool operator==(const DensityVolume&, const DensityVolume&) = default;
};

/// Per-vertex feature vectors, vertex-interleaved: values[v * channels + c].
struct FeatureVolume {
  Grid3 grid;
  int channels = kFeatureChannels;
  std::vector<float> values;

  FeatureVolume() = default;
  FeatureVolume(Grid3 g, int ch) : grid(g), channels(ch), values(g.count() * std::size_t(ch), 0.0f) {}

  std::span<const float> at(std::size_t v) const {
    return {values.data() + v * std::size_t(channels), std::size_t(channels)};
  }
  std::span<float> at(std::size_t v) { return {values.data() + v * std::size_t(channels), std::size_t(channels)}; }
  friend bool operator==(const FeatureVolume&, const FeatureVolume&) = default;
};

inline Vec3 vertex_position(const Grid3& g, int x, int y, int z) {
  auto axis = [](int i, int n) { return n > 1 ? double(i) / double(n - 1) : 0.0; };
  return {axis(x, g.nx), axis(y, g.ny), axis(z, g.nz)};
}

// VRFV: "VRFV", u32 nx, ny, nz, then float32 payload. Density volumes carry one
// value per vertex; feature volumes carry `channels` interleaved values per
// vertex and the reader infers the channel count from the payload length.

inline std::vector<std::uint8_t> encode_vrfv(const Grid3& g, std::span<const float> payload) {
  ByteWriter w;
  w.magic("VRFV");
  w.put<std::uint32_t>(std::uint32_t(g.nx));
  w.put<std::uint32_t>(std::uint32_t(g.ny));
  w.put<std::uint32_t>(std::uint32_t(g.nz));
  for (float v : payload) w.put<float>(v);
  return w.take();
}

inline std::pair<Grid3, std::vector<float>> decode_vrfv(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  r.expect_magic("VRFV");
  Grid3 g;
  g.nx = int(r.get<std::uint32_t>());
  g.ny = int(r.get<std::uint32_t>());
  g.nz = int(r.get<std::uint32_t>());
  if (g.count() == 0 || r.remaining() % (4 * g.count()) != 0) fail(Errc::format, "VRFV payload size mismatch");
  std::vector<float> v(r.remaining() / 4);
  for (auto& x : v) x = r.get<float>();
  return {g, std::move(v)};
}

inline void save_density(const std::filesystem::path& p, const DensityVolume& v) {
  write_file(p, encode_vrfv(v.grid, v.values));
}

inline DensityVolume load_density(const std::filesystem::path& p) {
  auto [g, vals] = decode_vrfv(read_file(p));
  if (vals.size() != g.count()) fail(Errc::format, "density volume must have one channel: " + p.string());
  DensityVolume v;
  v.grid = g;
  v.values = std::move(vals);
  return v;
}

inline void save_features(const std::filesystem::path& p, const FeatureVolume& v) {
  write_file(p, encode_vrfv(v.grid, v.values));
}

inline FeatureVolume load_features(const std::filesystem::path& p) {
  auto [g, vals] = decode_vrfv(read_file(p));
  FeatureVolume v;
  v.grid = g;
  v.channels = int(vals.size() / g.count());
  v.values = std::move(vals);
  return v;
}

}  // namespace featvid
