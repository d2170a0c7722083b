#pragma once

// 2D and 3D Morton (Z-order) codes. Bit i of x lands on bit 3i, y on 3i+1,
// z on 3i+2; in 2D, u on 2i and v on 2i+1.

#include <cstdint>
#include <string>

#include "featvid/core.hpp"

namespace featvid {

struct MortonCode {
  std::uint64_t value = 0;
  friend auto operator<=>(const MortonCode&, const MortonCode&) = default;
};

inline constexpr std::uint32_t kMorton3MaxCoord = (1u << 21) - 1;

namespace detail {

constexpr std::uint64_t spread3(std::uint64_t v) {
  v &= 0x1FFFFF;
  v = (v | (v << 32)) & 0x1F00000000FFFFull;
  v = (v | (v << 16)) & 0x1F0000FF0000FFull;
  v = (v | (v << 8)) & 0x100F00F00F00F00Full;
  v = (v | (v << 4)) & 0x10C30C30C30C30C3ull;
  v = (v | (v << 2)) & 0x1249249249249249ull;
  return v;
}

constexpr std::uint32_t compact3(std::uint64_t v) {
  v &= 0x1249249249249249ull;
  v = (v ^ (v >> 2)) & 0x10C30C30C30C30C3ull;
  v = (v ^ (v >> 4)) & 0x100F00F00F00F00Full;
  v = (v ^ (v >> 8)) & 0x1F0000FF0000FFull;
  v = (v ^ (v >> 16)) & 0x1F00000000FFFFull;
  v = (v ^ (v >> 32)) & 0x1FFFFF;
  return std::uint32_t(v);
}

constexpr std::uint64_t spread2(std::uint64_t v) {
  v &= 0xFFFFFFFFull;
  v = (v | (v << 16)) & 0x0000FFFF0000FFFFull;
  v = (v | (v << 8)) & 0x00FF00FF00FF00FFull;
  v = (v | (v << 4)) & 0x0F0F0F0F0F0F0F0Full;
  v = (v | (v << 2)) & 0x3333333333333333ull;
  v = (v | (v << 1)) & 0x5555555555555555ull;
  return v;
}

constexpr std::uint32_t compact2(std::uint64_t v) {
  v &= 0x5555555555555555ull;
  v = (v ^ (v >> 1)) & 0x3333333333333333ull;
  v = (v ^ (v >> 2)) & 0x0F0F0F0F0F0F0F0Full;
  v = (v ^ (v >> 4)) & 0x00FF00FF00FF00FFull;
  v = (v ^ (v >> 8)) & 0x0000FFFF0000FFFFull;
  v = (v ^ (v >> 16)) & 0x00000000FFFFFFFFull;
  return std::uint32_t(v);
}

}  // namespace detail

inline MortonCode morton3_encode(std::uint32_t x, std::uint32_t y, std::uint32_t z) {
  if (x > kMorton3MaxCoord || y > kMorton3MaxCoord || z > kMorton3MaxCoord)
    fail(Errc::range, "morton3 coordinate exceeds 21 bits");
  return {detail::spread3(x) | (detail::spread3(y) << 1) | (detail::spread3(z) << 2)};
}

inline std::array<std::uint32_t, 3> morton3_decode(MortonCode c) {
  return {detail::compact3(c.value), detail::compact3(c.value >> 1), detail::compact3(c.value >> 2)};
}

constexpr MortonCode morton2_encode(std::uint32_t u, std::uint32_t v) {
  return {detail::spread2(u) | (detail::spread2(v) << 1)};
}

constexpr std::array<std::uint32_t, 2> morton2_decode(MortonCode c) {
  return {detail::compact2(c.value), detail::compact2(c.value >> 1)};
}

}  // namespace featvid
