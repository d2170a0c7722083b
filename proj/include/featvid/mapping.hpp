#pragma once

// Mapping tables between occupied voxel vertices and feature-image pixels.
//
// Morton-block layout: occupied vertices are sorted by 3D Morton code and cut
// into chunks of 64. Chunk i fills 8x8 block i (blocks enumerated row-major),
// the k-th element of a chunk going to the pixel whose in-block (u, v) has 2D
// Morton rank k. A trailing partial chunk takes the lowest ranks.

#include <algorithm>
#include <numeric>
#include <optional>

#include "featvid/morton.hpp"
#include "featvid/occupancy.hpp"
#include "featvid/png.hpp"

namespace featvid {

inline constexpr int kBlockSize = 8;
inline constexpr std::int32_t kEmpty = -1;

enum class Layout { morton_block, row_major };

struct Pixel {
  int u = 0;
  int v = 0;
  friend bool operator==(const Pixel&, const Pixel&) = default;
};

class MappingTable {
 public:
  MappingTable() = default;
  MappingTable(Grid3 grid, int width, int height)
      : grid_(grid),
        width_(width),
        height_(height),
        pixel_of_vertex_(grid.count(), kEmpty),
        vertex_of_pixel_(std::size_t(width) * std::size_t(height), kEmpty) {}

  const Grid3& grid() const { return grid_; }
  int width() const { return width_; }
  int height() const { return height_; }
  std::size_t pixel_count() const { return vertex_of_pixel_.size(); }
  std::size_t occupied_pixels() const { return occupied_; }

  /// Linear pixel index (v * width + u) of a vertex, or kEmpty.
  std::int32_t pixel_index(std::size_t vertex) const { return pixel_of_vertex_[vertex]; }
  /// Linear vertex index stored at a pixel, or kEmpty.
  std::int32_t vertex_index(std::size_t pixel) const { return vertex_of_pixel_[pixel]; }

  std::optional<Pixel> forward(int x, int y, int z) const {
    const auto p = pixel_of_vertex_[grid_.index(x, y, z)];
    if (p == kEmpty) return std::nullopt;
    return Pixel{int(p % width_), int(p / width_)};
  }
  std::optional<std::array<int, 3>> inverse(Pixel p) const {
    const auto v = vertex_of_pixel_[std::size_t(p.v) * std::size_t(width_) + std::size_t(p.u)];
    if (v == kEmpty) return std::nullopt;
    return grid_.coords(std::size_t(v));
  }

  void assign(std::size_t vertex, std::size_t pixel) {
    if (pixel_of_vertex_[vertex] != kEmpty || vertex_of_pixel_[pixel] != kEmpty)
      fail(Errc::format, "mapping: vertex or pixel assigned twice");
    pixel_of_vertex_[vertex] = std::int32_t(pixel);
    vertex_of_pixel_[pixel] = std::int32_t(vertex);
    ++occupied_;
  }

  friend bool operator==(const MappingTable& a, const MappingTable& b) {
    return a.grid_ == b.grid_ && a.width_ == b.width_ && a.height_ == b.height_ &&
           a.pixel_of_vertex_ == b.pixel_of_vertex_ && a.vertex_of_pixel_ == b.vertex_of_pixel_;
  }

 private:
  Grid3 grid_;
  int width_ = 0;
  int height_ = 0;
  std::vector<std::int32_t> pixel_of_vertex_;
  std::vector<std::int32_t> vertex_of_pixel_;
  std::size_t occupied_ = 0;
};

/// In-block pixel offset of 2D Morton rank k (0..63).
inline Pixel block_offset(int rank) {
  const auto uv = morton2_decode(MortonCode{std::uint64_t(rank)});
  return {int(uv[0]), int(uv[1])};
}

inline MappingTable build_mapping(const OccupancyGrid& occ, int width, int height,
                                  Layout layout = Layout::morton_block) {
  if (width <= 0 || height <= 0 || width % kBlockSize != 0 || height % kBlockSize != 0)
    fail(Errc::shape, "feature image size must be a positive multiple of 8");
  const std::size_t capacity = std::size_t(width) * std::size_t(height);
  if (occ.occupied_count() > capacity)
    fail(Errc::capacity, std::to_string(occ.occupied_count()) + " occupied vertices exceed the " +
                             std::to_string(capacity) + "-pixel feature image");
  const Grid3 g = occ.grid();
  MappingTable map(g, width, height);

  std::vector<std::size_t> vertices;
  vertices.reserve(occ.occupied_count());
  for (std::size_t i = 0; i < occ.size(); ++i)
    if (occ.test(i)) vertices.push_back(i);

  if (layout == Layout::row_major) {
    for (std::size_t k = 0; k < vertices.size(); ++k) map.assign(vertices[k], k);
    return map;
  }

  std::vector<std::pair<std::uint64_t, std::size_t>> keyed(vertices.size());
  for (std::size_t k = 0; k < vertices.size(); ++k) {
    const auto c = g.coords(vertices[k]);
    keyed[k] = {morton3_encode(std::uint32_t(c[0]), std::uint32_t(c[1]), std::uint32_t(c[2])).value, vertices[k]};
  }
  std::sort(keyed.begin(), keyed.end());

  const int blocks_per_row = width / kBlockSize;
  for (std::size_t k = 0; k < keyed.size(); ++k) {
    const std::size_t block = k / 64;
    const Pixel off = block_offset(int(k % 64));
    const int u = int(block % std::size_t(blocks_per_row)) * kBlockSize + off.u;
    const int v = int(block / std::size_t(blocks_per_row)) * kBlockSize + off.v;
    map.assign(keyed[k].second, std::size_t(v) * std::size_t(width) + std::size_t(u));
  }
  return map;
}

/// Mean 2D distance between the pixels of 6-adjacent mapped vertex pairs.
inline double mean_adjacent_distance(const MappingTable& map) {
  const Grid3 g = map.grid();
  double sum = 0.0;
  std::size_t pairs = 0;
  for (int z = 0; z < g.nz; ++z)
    for (int y = 0; y < g.ny; ++y)
      for (int x = 0; x < g.nx; ++x) {
        const auto a = map.forward(x, y, z);
        if (!a) continue;
        const int nb[3][3] = {{x + 1, y, z}, {x, y + 1, z}, {x, y, z + 1}};
        for (const auto& n : nb) {
          if (!g.contains(n[0], n[1], n[2])) continue;
          const auto b = map.forward(n[0], n[1], n[2]);
          if (!b) continue;
          sum += std::hypot(double(a->u - b->u), double(a->v - b->v));
          ++pairs;
        }
      }
  return pairs ? sum / double(pairs) : 0.0;
}

// ---------------------------------------------------------------------------
// 2D-to-3D RGB serialization

/// Pixel (u, v) holds the (x, y, z) of its vertex; empty pixels hold the
/// all-ones sentinel and a cleared bit in `mask` (bit-packed, row-major,
/// LSB first), since the sentinel coordinate itself may be legal.
struct InverseRgb {
  PngImage rgb;
  std::vector<std::uint8_t> mask;
};

inline bool mask_bit(std::span<const std::uint8_t> mask, std::size_t i) { return (mask[i / 8] >> (i % 8)) & 1u; }

inline InverseRgb serialize_inverse_rgb(const MappingTable& map, int bit_depth = 8) {
  if (bit_depth != 8 && bit_depth != 16) fail(Errc::depth, "bit depth must be 8 or 16");
  const Grid3 g = map.grid();
  const int max_coord = std::max({g.nx, g.ny, g.nz}) - 1;
  const int limit = bit_depth == 8 ? 255 : 65535;
  if (max_coord > limit)
    fail(Errc::depth, "vertex coordinate " + std::to_string(max_coord) + " does not fit " +
                          std::to_string(bit_depth) + "-bit channels; use 16-bit");
  InverseRgb out;
  out.rgb = PngImage{map.width(), map.height(), 3, bit_depth,
                     std::vector<std::uint16_t>(map.pixel_count() * 3, std::uint16_t(limit))};
  out.mask.assign((map.pixel_count() + 7) / 8, 0);
  for (std::size_t p = 0; p < map.pixel_count(); ++p) {
    const auto v = map.vertex_index(p);
    if (v == kEmpty) continue;
    const auto c = g.coords(std::size_t(v));
    for (int k = 0; k < 3; ++k) out.rgb.samples[p * 3 + std::size_t(k)] = std::uint16_t(c[std::size_t(k)]);
    out.mask[p / 8] |= std::uint8_t(1u << (p % 8));
  }
  return out;
}

/// Picks 8-bit channels when every coordinate fits, 16-bit otherwise.
inline InverseRgb serialize_inverse_rgb_auto(const MappingTable& map) {
  const Grid3 g = map.grid();
  return serialize_inverse_rgb(map, std::max({g.nx, g.ny, g.nz}) - 1 <= 255 ? 8 : 16);
}

inline MappingTable deserialize_inverse_rgb(const InverseRgb& in, Grid3 grid) {
  const auto& img = in.rgb;
  if (img.channels != 3) fail(Errc::format, "mapping image must be RGB");
  const std::size_t pixels = std::size_t(img.width) * std::size_t(img.height);
  if (in.mask.size() != (pixels + 7) / 8) fail(Errc::format, "mapping mask size mismatch");
  MappingTable map(grid, img.width, img.height);
  for (std::size_t p = 0; p < pixels; ++p) {
    if (!mask_bit(in.mask, p)) continue;
    const int x = img.samples[p * 3], y = img.samples[p * 3 + 1], z = img.samples[p * 3 + 2];
    if (!grid.contains(x, y, z)) fail(Errc::format, "mapping image references a vertex outside the grid");
    map.assign(grid.index(x, y, z), p);
  }
  return map;
}

/// Single-file form for the player: RGBA where alpha is full scale on mapped
/// pixels and 0 on empty ones.
inline std::vector<std::uint8_t> encode_mapping_png(const MappingTable& map) {
  const InverseRgb inv = serialize_inverse_rgb_auto(map);
  const std::uint16_t full = inv.rgb.bit_depth == 8 ? 255 : 65535;
  PngImage rgba{inv.rgb.width, inv.rgb.height, 4, inv.rgb.bit_depth, {}};
  rgba.samples.resize(map.pixel_count() * 4);
  for (std::size_t p = 0; p < map.pixel_count(); ++p) {
    for (int k = 0; k < 3; ++k) rgba.samples[p * 4 + std::size_t(k)] = inv.rgb.samples[p * 3 + std::size_t(k)];
    rgba.samples[p * 4 + 3] = mask_bit(inv.mask, p) ? full : 0;
  }
  return encode_png(rgba);
}

inline MappingTable decode_mapping_png(std::span<const std::uint8_t> bytes, Grid3 grid) {
  const PngImage rgba = decode_png(bytes);
  if (rgba.channels != 4) fail(Errc::format, "mapping png must be RGBA");
  InverseRgb inv;
  inv.rgb = PngImage{rgba.width, rgba.height, 3, rgba.bit_depth, {}};
  const std::size_t pixels = std::size_t(rgba.width) * std::size_t(rgba.height);
  inv.rgb.samples.resize(pixels * 3);
  inv.mask.assign((pixels + 7) / 8, 0);
  for (std::size_t p = 0; p < pixels; ++p) {
    for (int k = 0; k < 3; ++k) inv.rgb.samples[p * 3 + std::size_t(k)] = rgba.samples[p * 4 + std::size_t(k)];
    if (rgba.samples[p * 4 + 3] != 0) inv.mask[p / 8] |= std::uint8_t(1u << (p % 8));
  }
  return deserialize_inverse_rgb(inv, grid);
}

// .vrfm: "VRFM", u32 version, u32 nx, ny, nz, u32 png_len, png, u32 mask_len, mask.

inline std::vector<std::uint8_t> encode_vrfm(const MappingTable& map) {
  const InverseRgb inv = serialize_inverse_rgb_auto(map);
  const auto png = encode_png(inv.rgb);
  ByteWriter w;
  w.magic("VRFM");
  w.put<std::uint32_t>(1);
  w.put<std::uint32_t>(std::uint32_t(map.grid().nx));
  w.put<std::uint32_t>(std::uint32_t(map.grid().ny));
  w.put<std::uint32_t>(std::uint32_t(map.grid().nz));
  w.put<std::uint32_t>(std::uint32_t(png.size()));
  w.bytes(png);
  w.put<std::uint32_t>(std::uint32_t(inv.mask.size()));
  w.bytes(inv.mask);
  return w.take();
}

inline MappingTable decode_vrfm(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  r.expect_magic("VRFM");
  if (r.get<std::uint32_t>() != 1) fail(Errc::format, "unsupported VRFM version");
  Grid3 g;
  g.nx = int(r.get<std::uint32_t>());
  g.ny = int(r.get<std::uint32_t>());
  g.nz = int(r.get<std::uint32_t>());
  InverseRgb inv;
  inv.rgb = decode_png(r.bytes(r.get<std::uint32_t>()));
  auto mask = r.bytes(r.get<std::uint32_t>());
  inv.mask.assign(mask.begin(), mask.end());
  return deserialize_inverse_rgb(inv, g);
}

}  // namespace featvid
