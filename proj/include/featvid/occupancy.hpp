#pragma once

// Occupancy grids over voxel vertices, unions, greedy group-of-frames
// planning under a pixel budget, and the max-pooled skip pyramid.

#include "featvid/png.hpp"
#include "featvid/volume.hpp"

namespace featvid {

/// Density threshold for occupancy.
inline constexpr double kDefaultGamma = 0.003;
/// Pixel budget of a 512x512 feature image.
inline constexpr std::size_t kDefaultTheta = 512u * 512u;

class OccupancyGrid {
 public:
  OccupancyGrid() = default;
  explicit OccupancyGrid(Grid3 g) : grid_(g), bits_(g.count(), 0) {}

  const Grid3& grid() const { return grid_; }
  std::size_t occupied_count() const { return occupied_; }
  std::size_t size() const { return bits_.size(); }

  bool test(std::size_t i) const { return bits_[i] != 0; }
  bool test(int x, int y, int z) const { return bits_[grid_.index(x, y, z)] != 0; }

  void set(std::size_t i, bool on = true) {
    if (bool(bits_[i]) == on) return;
    bits_[i] = on ? 1 : 0;
    occupied_ += on ? 1 : std::size_t(-1);
  }
  void set(int x, int y, int z, bool on = true) { set(grid_.index(x, y, z), on); }

  friend bool operator==(const OccupancyGrid& a, const OccupancyGrid& b) {
    return a.grid_ == b.grid_ && a.bits_ == b.bits_;
  }

 private:
  Grid3 grid_;
  std::vector<std::uint8_t> bits_;
  std::size_t occupied_ = 0;
};

inline OccupancyGrid threshold_occupancy(const DensityVolume& vol, double gamma = kDefaultGamma) {
  if (gamma < 0.0) fail(Errc::range, "gamma must be nonnegative");
  OccupancyGrid g(vol.grid);
  for (std::size_t i = 0; i < vol.values.size(); ++i)
    if (double(vol.values[i]) > gamma) g.set(i);
  return g;
}

inline OccupancyGrid union_of(std::span<const OccupancyGrid> grids) {
  if (grids.empty()) fail(Errc::shape, "union of zero grids");
  OccupancyGrid out(grids.front().grid());
  for (const auto& g : grids) {
    if (!(g.grid() == out.grid())) fail(Errc::shape, "union: grid resolutions differ");
    for (std::size_t i = 0; i < g.size(); ++i)
      if (g.test(i)) out.set(i);
  }
  return out;
}

inline OccupancyGrid union_of(const OccupancyGrid& a, const OccupancyGrid& b) {
  const OccupancyGrid both[] = {a, b};
  return union_of(std::span<const OccupancyGrid>(both));
}

// ---------------------------------------------------------------------------
// group-of-frames planning

struct FrameGroup {
  int start_frame = 0;
  int end_frame = 0;  // inclusive
  OccupancyGrid union_occupancy;

  int frame_count() const { return end_frame - start_frame + 1; }
  bool contains(int t) const { return t >= start_frame && t <= end_frame; }
};

struct GroupPlan {
  std::vector<FrameGroup> groups;

  int frame_count() const { return groups.empty() ? 0 : groups.back().end_frame + 1; }
  std::size_t group_of(int t) const {
    for (std::size_t g = 0; g < groups.size(); ++g)
      if (groups[g].contains(t)) return g;
    fail(Errc::load, "frame " + std::to_string(t) + " is outside every group");
  }
};

/// Greedy left-to-right: each group is the longest run of frames whose union
/// occupancy stays within `theta` vertices.
inline GroupPlan plan_groups(std::span<const OccupancyGrid> grids, std::size_t theta = kDefaultTheta) {
  if (theta < 1) fail(Errc::range, "theta must be >= 1");
  if (grids.empty()) fail(Errc::range, "plan_groups needs at least one frame");
  const Grid3 g = grids.front().grid();
  GroupPlan plan;
  int t = 0;
  const int frames = int(grids.size());
  while (t < frames) {
    if (!(grids[std::size_t(t)].grid() == g)) fail(Errc::shape, "frame grids differ in resolution");
    if (grids[std::size_t(t)].occupied_count() > theta)
      fail(Errc::overflow, "frame " + std::to_string(t) + " occupies " +
                               std::to_string(grids[std::size_t(t)].occupied_count()) +
                               " vertices, more than theta=" + std::to_string(theta) +
                               "; raise theta or lower the grid resolution");
    FrameGroup group{t, t, grids[std::size_t(t)]};
    int next = t + 1;
    while (next < frames) {
      const auto& cand = grids[std::size_t(next)];
      if (!(cand.grid() == g)) fail(Errc::shape, "frame grids differ in resolution");
      std::size_t added = 0;
      for (std::size_t i = 0; i < cand.size(); ++i)
        if (cand.test(i) && !group.union_occupancy.test(i)) ++added;
      if (group.union_occupancy.occupied_count() + added > theta) break;
      for (std::size_t i = 0; i < cand.size(); ++i)
        if (cand.test(i)) group.union_occupancy.set(i);
      group.end_frame = next++;
    }
    plan.groups.push_back(std::move(group));
    t = next;
  }
  return plan;
}

// ---------------------------------------------------------------------------
// skip pyramid

class OccupancyPyramid {
 public:
  OccupancyPyramid() = default;
  explicit OccupancyPyramid(std::vector<OccupancyGrid> levels) : levels_(std::move(levels)) {}

  std::size_t level_count() const { return levels_.size(); }
  const OccupancyGrid& level(std::size_t i) const { return levels_[i]; }
  const std::vector<OccupancyGrid>& levels() const { return levels_; }
  bool empty() const { return levels_.empty() || levels_.back().occupied_count() == 0; }

  /// True when no vertex in the inclusive level-0 box [lo, hi] is occupied,
  /// decided at `level` (cells covering the box are all clear).
  bool box_clear(std::size_t level, const std::array<int, 3>& lo, const std::array<int, 3>& hi) const {
    const auto& g = levels_[level];
    for (int z = lo[2] >> level; z <= (hi[2] >> level); ++z)
      for (int y = lo[1] >> level; y <= (hi[1] >> level); ++y)
        for (int x = lo[0] >> level; x <= (hi[0] >> level); ++x)
          if (g.test(x, y, z)) return false;
    return true;
  }

  friend bool operator==(const OccupancyPyramid&, const OccupancyPyramid&) = default;

 private:
  std::vector<OccupancyGrid> levels_;
};

inline OccupancyGrid max_pool2(const OccupancyGrid& fine) {
  const Grid3 f = fine.grid();
  const Grid3 c{(f.nx + 1) / 2, (f.ny + 1) / 2, (f.nz + 1) / 2};
  OccupancyGrid coarse(c);
  for (int z = 0; z < f.nz; ++z)
    for (int y = 0; y < f.ny; ++y)
      for (int x = 0; x < f.nx; ++x)
        if (fine.test(x, y, z)) coarse.set(x / 2, y / 2, z / 2);
  return coarse;
}

/// Halves the resolution by 2x max-pooling while the next level keeps every
/// axis at 8 or more (288 -> ... -> 9). Always at least two levels.
inline OccupancyPyramid build_pyramid(const OccupancyGrid& grid) {
  const Grid3 g = grid.grid();
  if (std::min({g.nx, g.ny, g.nz}) < 2) fail(Errc::range, "pyramid needs every axis >= 2");
  std::vector<OccupancyGrid> levels{grid};
  while (true) {
    const Grid3 cur = levels.back().grid();
    const int cur_min = std::min({cur.nx, cur.ny, cur.nz});
    if (cur_min <= 1) break;
    if (levels.size() >= 2 && (cur_min + 1) / 2 < 8) break;
    levels.push_back(max_pool2(levels.back()));
  }
  return OccupancyPyramid(std::move(levels));
}

// ---------------------------------------------------------------------------
// serialization: "VRFO", u32 nx, ny, nz, then each x-row packed LSB-first
// into ceil(nx/8) bytes, rows in (y, z) order. Pyramids concatenate levels.

inline void append_vrfo(ByteWriter& w, const OccupancyGrid& grid) {
  const Grid3 g = grid.grid();
  w.magic("VRFO");
  w.put<std::uint32_t>(std::uint32_t(g.nx));
  w.put<std::uint32_t>(std::uint32_t(g.ny));
  w.put<std::uint32_t>(std::uint32_t(g.nz));
  const std::size_t row_bytes = (std::size_t(g.nx) + 7) / 8;
  for (int z = 0; z < g.nz; ++z)
    for (int y = 0; y < g.ny; ++y) {
      std::vector<std::uint8_t> row(row_bytes, 0);
      for (int x = 0; x < g.nx; ++x)
        if (grid.test(x, y, z)) row[std::size_t(x) / 8] |= std::uint8_t(1u << (x % 8));
      w.bytes(row);
    }
}

inline OccupancyGrid read_vrfo(ByteReader& r) {
  r.expect_magic("VRFO");
  Grid3 g;
  g.nx = int(r.get<std::uint32_t>());
  g.ny = int(r.get<std::uint32_t>());
  g.nz = int(r.get<std::uint32_t>());
  OccupancyGrid grid(g);
  const std::size_t row_bytes = (std::size_t(g.nx) + 7) / 8;
  for (int z = 0; z < g.nz; ++z)
    for (int y = 0; y < g.ny; ++y) {
      auto row = r.bytes(row_bytes);
      for (int x = 0; x < g.nx; ++x)
        if (row[std::size_t(x) / 8] & (1u << (x % 8))) grid.set(x, y, z);
    }
  return grid;
}

inline std::vector<std::uint8_t> encode_occupancy(const OccupancyGrid& grid) {
  ByteWriter w;
  append_vrfo(w, grid);
  return w.take();
}

inline OccupancyGrid decode_occupancy(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  return read_vrfo(r);
}

inline std::vector<std::uint8_t> encode_pyramid(const OccupancyPyramid& pyr) {
  ByteWriter w;
  for (const auto& level : pyr.levels()) append_vrfo(w, level);
  return w.take();
}

inline OccupancyPyramid decode_pyramid(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  std::vector<OccupancyGrid> levels;
  while (r.remaining() > 0) levels.push_back(read_vrfo(r));
  if (levels.empty()) fail(Errc::format, "empty pyramid");
  return OccupancyPyramid(std::move(levels));
}

/// One monochrome PNG per z slice (255 = occupied).
inline std::vector<std::vector<std::uint8_t>> occupancy_png_slices(const OccupancyGrid& grid) {
  const Grid3 g = grid.grid();
  std::vector<std::vector<std::uint8_t>> slices;
  for (int z = 0; z < g.nz; ++z) {
    PngImage img{g.nx, g.ny, 1, 8, std::vector<std::uint16_t>(std::size_t(g.nx) * std::size_t(g.ny), 0)};
    for (int y = 0; y < g.ny; ++y)
      for (int x = 0; x < g.nx; ++x)
        if (grid.test(x, y, z)) img.at(x, y, 0) = 255;
    slices.push_back(encode_png(img));
  }
  return slices;
}

}  // namespace featvid
