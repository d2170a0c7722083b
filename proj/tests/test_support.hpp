#pragma once

// Generators and independent reference implementations shared by the unit
// and acceptance suites. Nothing here calls the code path it checks.

#include <cmath>
#include <set>
#include <vector>

#include "featvid/codec.hpp"
#include "featvid/occupancy.hpp"

namespace featvid::testing {

inline OccupancyGrid random_grid(Rng& rng, Grid3 g, double p) {
  OccupancyGrid out(g);
  for (std::size_t i = 0; i < g.count(); ++i)
    if (rng.uniform() < p) out.set(i);
  return out;
}

/// Connected (6-neighborhood) set grown from a random seed vertex.
inline OccupancyGrid random_connected_set(Rng& rng, Grid3 g, std::size_t target) {
  OccupancyGrid out(g);
  std::vector<std::size_t> members;
  const std::size_t seed = rng.below(g.count());
  out.set(seed);
  members.push_back(seed);
  std::size_t attempts = 0;
  while (out.occupied_count() < target && attempts < target * 64) {
    ++attempts;
    const auto c = g.coords(members[rng.below(members.size())]);
    const int dir = int(rng.below(6));
    int x = c[0], y = c[1], z = c[2];
    (dir / 2 == 0 ? x : dir / 2 == 1 ? y : z) += (dir % 2) ? 1 : -1;
    if (!g.contains(x, y, z) || out.test(x, y, z)) continue;
    out.set(x, y, z);
    members.push_back(g.index(x, y, z));
  }
  return out;
}

/// Occupancy of a ball with a hand-rolled distance test.
inline OccupancyGrid ball_grid(Grid3 g, double cx, double cy, double cz, double r) {
  OccupancyGrid out(g);
  for (int z = 0; z < g.nz; ++z)
    for (int y = 0; y < g.ny; ++y)
      for (int x = 0; x < g.nx; ++x) {
        const double px = double(x) / (g.nx - 1) - cx, py = double(y) / (g.ny - 1) - cy, pz = double(z) / (g.nz - 1) - cz;
        if (px * px + py * py + pz * pz < r * r) out.set(x, y, z);
      }
  return out;
}

/// O(T^2) planner: for each start frame, recompute the union of every prefix
/// from scratch and keep the longest one within theta.
inline std::vector<std::pair<int, int>> reference_plan(const std::vector<OccupancyGrid>& frames, std::size_t theta) {
  std::vector<std::pair<int, int>> out;
  int start = 0;
  const int n = int(frames.size());
  while (start < n) {
    int best = start;
    for (int end = start; end < n; ++end) {
      std::set<std::size_t> uni;
      for (int t = start; t <= end; ++t)
        for (std::size_t i = 0; i < frames[std::size_t(t)].size(); ++i)
          if (frames[std::size_t(t)].test(i)) uni.insert(i);
      if (uni.size() <= theta) best = end;
      else break;
    }
    out.emplace_back(start, best);
    start = best + 1;
  }
  return out;
}

inline std::uint64_t interleave_bits(std::initializer_list<std::uint32_t> coords) {
  std::uint64_t out = 0;
  const std::size_t dims = coords.size();
  std::size_t axis = 0;
  for (std::uint32_t c : coords) {
    for (std::size_t bit = 0; bit * dims + axis < 64 && bit < 32; ++bit)
      if ((c >> bit) & 1u) out |= std::uint64_t(1) << (bit * dims + axis);
    ++axis;
  }
  return out;
}

// Smooth drifting pattern plus a little noise; stands in for a fitted group.
inline std::vector<QuantizedFrame> test_gof(int w, int h, int ch, int frames, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<QuantizedFrame> out;
  for (int t = 0; t < frames; ++t) {
    QuantizedFrame f(w, h, ch);
    for (int c = 0; c < ch; ++c)
      for (int v = 0; v < h; ++v)
        for (int u = 0; u < w; ++u) {
          const double s = 128 + 80 * std::sin(0.21 * u + 0.13 * v + 0.5 * c + 0.1 * t) + rng.uniform(-6, 6);
          f.plane(c)[std::size_t(v) * std::size_t(w) + std::size_t(u)] = std::uint8_t(std::clamp(std::lround(s), 0L, 255L));
        }
    out.push_back(std::move(f));
  }
  return out;
}

inline QuantizationProfile unit_profile(int ch) {
  QuantizationProfile p;
  p.min.assign(std::size_t(ch), 0.0f);
  p.max.assign(std::size_t(ch), 1.0f);
  return p;
}

inline int max_abs_error(const std::vector<QuantizedFrame>& a, const std::vector<QuantizedFrame>& b) {
  int m = 0;
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t p = 0; p < a[i].planes.size(); ++p) m = std::max(m, std::abs(int(a[i].planes[p]) - int(b[i].planes[p])));
  return m;
}

}  // namespace featvid::testing
