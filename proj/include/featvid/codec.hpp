#pragma once

// uint8 quantization of feature images and a small video codec: 8x8 block
// DCT with JPEG-style run/size symbols, intra frames at group starts and
// closed-loop residual inter frames, all entropy coded with the adaptive
// range coder. A lossless mode replaces the DCT with exact prediction.

#include <zlib.h>

#include "featvid/feature_field.hpp"
#include "featvid/range_coder.hpp"

namespace featvid {

// ---------------------------------------------------------------------------
// quantization

struct QuantizationProfile {
  std::vector<float> min;
  std::vector<float> max;

  int channels() const { return int(min.size()); }
  friend bool operator==(const QuantizationProfile&, const QuantizationProfile&) = default;
};

/// Per-channel range over every pixel of every frame. A constant channel is
/// widened to [v, v + 1] so the profile is never degenerate.
inline QuantizationProfile compute_profile(std::span<const FeatureImage> frames) {
  if (frames.empty()) fail(Errc::shape, "compute_profile: no frames");
  const int ch = frames[0].channels;
  QuantizationProfile prof;
  prof.min.assign(std::size_t(ch), std::numeric_limits<float>::infinity());
  prof.max.assign(std::size_t(ch), -std::numeric_limits<float>::infinity());
  for (const auto& f : frames) {
    if (f.channels != ch) fail(Errc::shape, "compute_profile: channel count differs between frames");
    for (std::size_t p = 0; p < f.pixel_count(); ++p)
      for (int c = 0; c < ch; ++c) {
        const float v = f.pixel(p)[c];
        if (!std::isfinite(v)) fail(Errc::range, "compute_profile: non-finite feature value");
        prof.min[std::size_t(c)] = std::min(prof.min[std::size_t(c)], v);
        prof.max[std::size_t(c)] = std::max(prof.max[std::size_t(c)], v);
      }
  }
  for (int c = 0; c < ch; ++c)
    if (!(prof.max[std::size_t(c)] > prof.min[std::size_t(c)])) prof.max[std::size_t(c)] = prof.min[std::size_t(c)] + 1.0f;
  return prof;
}

/// round(255 * clamp((v - lo) / (hi - lo), 0, 1)), halves away from zero.
inline std::uint8_t quantize_value(double v, double lo, double hi) {
  if (!(hi > lo)) fail(Errc::range, "quantize: degenerate range");
  const double t = std::clamp((v - lo) / (hi - lo), 0.0, 1.0);
  return std::uint8_t(std::round(255.0 * t));
}

inline double dequantize_value(std::uint8_t q, double lo, double hi) { return lo + (hi - lo) * double(q) / 255.0; }

/// Planar 8-bit frame: planes[c * width * height + v * width + u].
struct QuantizedFrame {
  int width = 0;
  int height = 0;
  int channels = 0;
  std::vector<std::uint8_t> planes;

  QuantizedFrame() = default;
  QuantizedFrame(int w, int h, int ch)
      : width(w), height(h), channels(ch), planes(std::size_t(w) * std::size_t(h) * std::size_t(ch), 0) {}
  std::size_t plane_size() const { return std::size_t(width) * std::size_t(height); }
  std::uint8_t* plane(int c) { return planes.data() + std::size_t(c) * plane_size(); }
  const std::uint8_t* plane(int c) const { return planes.data() + std::size_t(c) * plane_size(); }
  friend bool operator==(const QuantizedFrame&, const QuantizedFrame&) = default;
};

inline QuantizedFrame quantize(const FeatureImage& img, const QuantizationProfile& prof) {
  if (prof.channels() != img.channels) fail(Errc::shape, "quantize: profile channel count mismatch");
  QuantizedFrame q(img.width, img.height, img.channels);
  for (int c = 0; c < img.channels; ++c) {
    std::uint8_t* dst = q.plane(c);
    for (std::size_t p = 0; p < img.pixel_count(); ++p)
      dst[p] = quantize_value(img.pixel(p)[c], prof.min[std::size_t(c)], prof.max[std::size_t(c)]);
  }
  return q;
}

inline FeatureImage dequantize(const QuantizedFrame& q, const QuantizationProfile& prof, int frame_index = 0,
                               int group_id = 0) {
  if (prof.channels() != q.channels) fail(Errc::shape, "dequantize: profile channel count mismatch");
  FeatureImage img(q.width, q.height, q.channels);
  img.frame_index = frame_index;
  img.group_id = group_id;
  for (int c = 0; c < q.channels; ++c) {
    const std::uint8_t* src = q.plane(c);
    for (std::size_t p = 0; p < img.pixel_count(); ++p)
      img.pixel(p)[c] = float(dequantize_value(src[p], prof.min[std::size_t(c)], prof.max[std::size_t(c)]));
  }
  return img;
}

// ---------------------------------------------------------------------------
// 8x8 transform

inline constexpr std::array<int, 64> kLumaTable = {
    16, 11, 10, 16, 24,  40,  51,  61,  12, 12, 14, 19, 26,  58,  60,  55,  14, 13, 16, 24, 40,  57,
    69, 56, 14, 17, 22,  29,  51,  87,  80, 62, 18, 22, 37,  56,  68,  109, 103, 77, 24, 35, 55,  64,
    81, 104, 113, 92, 49, 64, 78, 87, 103, 121, 120, 101, 72, 92,  95,  98, 112, 100, 103, 99};

inline constexpr std::array<int, 64> kZigzag = {
    0,  1,  8,  16, 9,  2,  3,  10, 17, 24, 32, 25, 18, 11, 4,  5,  12, 19, 26, 33, 40, 48,
    41, 34, 27, 20, 13, 6,  7,  14, 21, 28, 35, 42, 49, 56, 57, 50, 43, 36, 29, 22, 15, 23,
    30, 37, 44, 51, 58, 59, 52, 45, 38, 31, 39, 46, 53, 60, 61, 54, 47, 55, 62, 63};

/// Orthonormal DCT-II basis: basis[k][n].
inline const std::array<std::array<double, 8>, 8>& dct_basis() {
  static const auto basis = [] {
    std::array<std::array<double, 8>, 8> b{};
    for (int k = 0; k < 8; ++k)
      for (int n = 0; n < 8; ++n)
        b[std::size_t(k)][std::size_t(n)] =
            (k == 0 ? std::sqrt(0.125) : 0.5) * std::cos((2.0 * n + 1.0) * k * 3.141592653589793 / 16.0);
    return b;
  }();
  return basis;
}

/// Row-major 8x8 in, row-major coefficients out (index = v * 8 + u).
inline std::array<double, 64> dct8x8(const std::array<double, 64>& x) {
  const auto& b = dct_basis();
  std::array<double, 64> tmp{}, out{};
  for (int r = 0; r < 8; ++r)
    for (int k = 0; k < 8; ++k) {
      double s = 0.0;
      for (int n = 0; n < 8; ++n) s += b[std::size_t(k)][std::size_t(n)] * x[std::size_t(r * 8 + n)];
      tmp[std::size_t(r * 8 + k)] = s;
    }
  for (int k = 0; k < 8; ++k)
    for (int c = 0; c < 8; ++c) {
      double s = 0.0;
      for (int n = 0; n < 8; ++n) s += b[std::size_t(k)][std::size_t(n)] * tmp[std::size_t(n * 8 + c)];
      out[std::size_t(k * 8 + c)] = s;
    }
  return out;
}

inline std::array<double, 64> idct8x8(const std::array<double, 64>& f) {
  const auto& b = dct_basis();
  std::array<double, 64> tmp{}, out{};
  for (int n = 0; n < 8; ++n)
    for (int c = 0; c < 8; ++c) {
      double s = 0.0;
      for (int k = 0; k < 8; ++k) s += b[std::size_t(k)][std::size_t(n)] * f[std::size_t(k * 8 + c)];
      tmp[std::size_t(n * 8 + c)] = s;
    }
  for (int r = 0; r < 8; ++r)
    for (int n = 0; n < 8; ++n) {
      double s = 0.0;
      for (int k = 0; k < 8; ++k) s += b[std::size_t(k)][std::size_t(n)] * tmp[std::size_t(r * 8 + k)];
      out[std::size_t(r * 8 + n)] = s;
    }
  return out;
}

// ---------------------------------------------------------------------------
// coefficient symbols

inline int magnitude_category(int v) { return v == 0 ? 0 : std::bit_width(unsigned(std::abs(v))); }

inline std::uint32_t magnitude_bits(int v, int cat) {
  return v >= 0 ? std::uint32_t(v) : std::uint32_t(v + (1 << cat) - 1);
}

inline int from_magnitude_bits(std::uint32_t bits, int cat) {
  if (cat == 0) return 0;
  return (bits >> (cat - 1)) & 1u ? int(bits) : int(bits) - (1 << cat) + 1;
}

struct BlockModels {
  BitTreeModel<4> dc;
  BitTreeModel<8> ac;
};

/// Adaptive state shared by every frame of one group of frames.
struct GofModels {
  std::uint16_t zero_frame = kProbInit;
  BlockModels blocks[2][2];  // [inter][feature channel]
  BitTreeModel<8> lossless[2][2];
};

inline constexpr std::uint8_t kEndOfBlock = 0x00;
inline constexpr std::uint8_t kZeroRun16 = 0xF0;
inline constexpr int kMaxCategory = 15;

inline void encode_block(RangeEncoder& rc, BlockModels& m, const std::array<int, 64>& zz, int& prev_dc) {
  const int diff = zz[0] - prev_dc;
  prev_dc = zz[0];
  const int dc_cat = magnitude_category(diff);
  if (dc_cat > kMaxCategory) fail(Errc::overflow, "DC difference out of range");
  m.dc.encode(rc, std::uint32_t(dc_cat));
  rc.encode_direct(magnitude_bits(diff, dc_cat), dc_cat);
  int last = 63;
  while (last > 0 && zz[std::size_t(last)] == 0) --last;
  int run = 0;
  for (int k = 1; k <= last; ++k) {
    const int v = zz[std::size_t(k)];
    if (v == 0) {
      ++run;
      continue;
    }
    while (run > 15) {
      m.ac.encode(rc, kZeroRun16);
      run -= 16;
    }
    const int cat = magnitude_category(v);
    if (cat > 10) fail(Errc::overflow, "AC coefficient out of range");
    m.ac.encode(rc, std::uint32_t((run << 4) | cat));
    rc.encode_direct(magnitude_bits(v, cat), cat);
    run = 0;
  }
  if (last < 63) m.ac.encode(rc, kEndOfBlock);
}

inline std::array<int, 64> decode_block(RangeDecoder& rc, BlockModels& m, int& prev_dc) {
  std::array<int, 64> zz{};
  const int dc_cat = int(m.dc.decode(rc));
  prev_dc += from_magnitude_bits(rc.decode_direct(dc_cat), dc_cat);
  zz[0] = prev_dc;
  int k = 1;
  while (k < 64) {
    const auto sym = m.ac.decode(rc);
    if (sym == kEndOfBlock) break;
    if (sym == kZeroRun16) {
      k += 16;
      continue;
    }
    const int run = int(sym >> 4), cat = int(sym & 15u);
    if (cat == 0 || cat > 10) fail(Errc::format, "invalid AC symbol");
    k += run;
    if (k > 63) fail(Errc::format, "AC run past end of block");
    zz[std::size_t(k)] = from_magnitude_bits(rc.decode_direct(cat), cat);
    ++k;
  }
  return zz;
}

// ---------------------------------------------------------------------------
// frame coding

struct CodecSettings {
  int q = 1;
  bool lossless = false;

  friend bool operator==(const CodecSettings&, const CodecSettings&) = default;
  void validate() const {
    if (q < 1) fail(Errc::range, "quantizer q must be >= 1");
  }
};

namespace detail {

/// Quantized coefficients (zigzag) of every block of every channel, plus the
/// reconstruction the decoder will produce from them.
struct LossyFrame {
  std::vector<std::array<int, 64>> blocks;  // channel-major, then raster block order
  QuantizedFrame recon;
  bool all_zero = true;
};

inline int blocks_x(const QuantizedFrame& f) { return (f.width + 7) / 8; }
inline int blocks_y(const QuantizedFrame& f) { return (f.height + 7) / 8; }

/// Forward path for intra (prev == nullptr) or inter frames.
inline LossyFrame lossy_analyze(const QuantizedFrame& cur, const QuantizedFrame* prev, int q) {
  LossyFrame out;
  out.recon = QuantizedFrame(cur.width, cur.height, cur.channels);
  const int bx = blocks_x(cur), by = blocks_y(cur);
  for (int c = 0; c < cur.channels; ++c)
    for (int yb = 0; yb < by; ++yb)
      for (int xb = 0; xb < bx; ++xb) {
        std::array<double, 64> x{};
        for (int j = 0; j < 8; ++j)
          for (int i = 0; i < 8; ++i) {
            // edge replication for partial blocks
            const int u = std::min(xb * 8 + i, cur.width - 1), v = std::min(yb * 8 + j, cur.height - 1);
            const std::size_t p = std::size_t(v) * std::size_t(cur.width) + std::size_t(u);
            const double base = prev ? double(prev->plane(c)[p]) : 128.0;
            x[std::size_t(j * 8 + i)] = double(cur.plane(c)[p]) - base;
          }
        const auto f = dct8x8(x);
        std::array<int, 64> zz{};
        std::array<double, 64> deq{};
        for (int k = 0; k < 64; ++k) {
          const int idx = kZigzag[std::size_t(k)];
          const double step = double(q) * kLumaTable[std::size_t(idx)];
          const int level = int(std::round(f[std::size_t(idx)] / step));
          zz[std::size_t(k)] = level;
          deq[std::size_t(idx)] = double(level) * step;
          if (level != 0) out.all_zero = false;
        }
        out.blocks.push_back(zz);
        const auto rec = idct8x8(deq);
        for (int j = 0; j < 8; ++j)
          for (int i = 0; i < 8; ++i) {
            const int u = xb * 8 + i, v = yb * 8 + j;
            if (u >= cur.width || v >= cur.height) continue;
            const std::size_t p = std::size_t(v) * std::size_t(cur.width) + std::size_t(u);
            const double base = prev ? double(prev->plane(c)[p]) : 128.0;
            out.recon.plane(c)[p] = std::uint8_t(std::clamp(std::lround(base + rec[std::size_t(j * 8 + i)]), 0L, 255L));
          }
      }
  return out;
}

inline QuantizedFrame lossy_reconstruct(const std::vector<std::array<int, 64>>& blocks, int w, int h, int ch,
                                        const QuantizedFrame* prev, int q) {
  QuantizedFrame out(w, h, ch);
  const int bx = (w + 7) / 8, by = (h + 7) / 8;
  std::size_t b = 0;
  for (int c = 0; c < ch; ++c)
    for (int yb = 0; yb < by; ++yb)
      for (int xb = 0; xb < bx; ++xb, ++b) {
        std::array<double, 64> deq{};
        for (int k = 0; k < 64; ++k) {
          const int idx = kZigzag[std::size_t(k)];
          deq[std::size_t(idx)] = double(blocks[b][std::size_t(k)]) * double(q) * kLumaTable[std::size_t(idx)];
        }
        const auto rec = idct8x8(deq);
        for (int j = 0; j < 8; ++j)
          for (int i = 0; i < 8; ++i) {
            const int u = xb * 8 + i, v = yb * 8 + j;
            if (u >= w || v >= h) continue;
            const std::size_t p = std::size_t(v) * std::size_t(w) + std::size_t(u);
            const double base = prev ? double(prev->plane(c)[p]) : 128.0;
            out.plane(c)[p] = std::uint8_t(std::clamp(std::lround(base + rec[std::size_t(j * 8 + i)]), 0L, 255L));
          }
      }
  return out;
}

/// Median edge detector prediction from left, up and up-left neighbors.
inline int med_predict(const std::uint8_t* plane, int w, int u, int v) {
  const int a = u > 0 ? plane[std::size_t(v) * std::size_t(w) + std::size_t(u - 1)] : (v > 0 ? plane[std::size_t(v - 1) * std::size_t(w)] : 0);
  const int b = v > 0 ? plane[std::size_t(v - 1) * std::size_t(w) + std::size_t(u)] : a;
  const int c = (u > 0 && v > 0) ? plane[std::size_t(v - 1) * std::size_t(w) + std::size_t(u - 1)] : b;
  if (c >= std::max(a, b)) return std::min(a, b);
  if (c <= std::min(a, b)) return std::max(a, b);
  return a + b - c;
}

}  // namespace detail

/// Codes one frame into its own flushed range-coder stream. Returns the
/// stream and the decoder-side reconstruction.
inline std::pair<std::vector<std::uint8_t>, QuantizedFrame> encode_frame(const QuantizedFrame& cur,
                                                                         const QuantizedFrame* prev,
                                                                         const CodecSettings& s, GofModels& models) {
  RangeEncoder rc;
  const int inter = prev ? 1 : 0;
  if (prev && (prev->width != cur.width || prev->height != cur.height || prev->channels != cur.channels))
    fail(Errc::shape, "encode: frame size differs within the group");
  if (s.lossless) {
    const bool zero = prev && prev->planes == cur.planes;
    rc.encode_bit(models.zero_frame, zero ? 1 : 0);
    if (!zero) {
      for (int c = 0; c < cur.channels; ++c) {
        auto& model = models.lossless[inter][c > 0 ? 1 : 0];
        const std::uint8_t* plane = cur.plane(c);
        for (int v = 0; v < cur.height; ++v)
          for (int u = 0; u < cur.width; ++u) {
            const std::size_t p = std::size_t(v) * std::size_t(cur.width) + std::size_t(u);
            const int pred = prev ? prev->plane(c)[p] : detail::med_predict(plane, cur.width, u, v);
            model.encode(rc, std::uint8_t(plane[p] - pred));
          }
      }
    }
    return {rc.finish(), cur};
  }
  auto a = detail::lossy_analyze(cur, prev, s.q);
  const bool zero = prev && a.all_zero;
  rc.encode_bit(models.zero_frame, zero ? 1 : 0);
  if (!zero) {
    const std::size_t per_channel = a.blocks.size() / std::size_t(cur.channels);
    for (int c = 0; c < cur.channels; ++c) {
      int prev_dc = 0;
      auto& m = models.blocks[inter][c > 0 ? 1 : 0];
      for (std::size_t b = 0; b < per_channel; ++b)
        encode_block(rc, m, a.blocks[std::size_t(c) * per_channel + b], prev_dc);
    }
  }
  return {rc.finish(), std::move(a.recon)};
}

inline QuantizedFrame decode_frame(std::span<const std::uint8_t> stream, int w, int h, int ch,
                                   const QuantizedFrame* prev, const CodecSettings& s, GofModels& models) {
  RangeDecoder rc(stream);
  const int inter = prev ? 1 : 0;
  const bool zero = rc.decode_bit(models.zero_frame) == 1;
  if (zero) {
    if (!prev) fail(Errc::format, "zero-residual marker on an intra frame");
    return *prev;
  }
  if (s.lossless) {
    QuantizedFrame out(w, h, ch);
    for (int c = 0; c < ch; ++c) {
      auto& model = models.lossless[inter][c > 0 ? 1 : 0];
      std::uint8_t* plane = out.plane(c);
      for (int v = 0; v < h; ++v)
        for (int u = 0; u < w; ++u) {
          const std::size_t p = std::size_t(v) * std::size_t(w) + std::size_t(u);
          const int pred = prev ? prev->plane(c)[p] : detail::med_predict(plane, w, u, v);
          plane[p] = std::uint8_t(model.decode(rc) + std::uint32_t(pred));
        }
    }
    return out;
  }
  const std::size_t per_channel = std::size_t((w + 7) / 8) * std::size_t((h + 7) / 8);
  std::vector<std::array<int, 64>> blocks;
  blocks.reserve(per_channel * std::size_t(ch));
  for (int c = 0; c < ch; ++c) {
    int prev_dc = 0;
    auto& m = models.blocks[inter][c > 0 ? 1 : 0];
    for (std::size_t b = 0; b < per_channel; ++b) blocks.push_back(decode_block(rc, m, prev_dc));
  }
  return detail::lossy_reconstruct(blocks, w, h, ch, prev, s.q);
}

// ---------------------------------------------------------------------------
// groups of frames

struct EncodedGof {
  int group_id = 0;
  int first_frame = 0;
  int width = 0;
  int height = 0;
  int channels = 0;
  CodecSettings settings;
  QuantizationProfile profile;
  std::vector<std::vector<std::uint8_t>> frames;  // frame 0 intra, the rest inter

  int frame_count() const { return int(frames.size()); }
  std::size_t keyframe_bytes() const { return frames.empty() ? 0 : frames[0].size(); }
  std::size_t inter_bytes() const {
    std::size_t s = 0;
    for (std::size_t i = 1; i < frames.size(); ++i) s += frames[i].size();
    return s;
  }
  std::size_t payload_bytes() const { return keyframe_bytes() + inter_bytes(); }
};

inline EncodedGof encode_gof(std::span<const QuantizedFrame> frames, const CodecSettings& s,
                             const QuantizationProfile& profile, int group_id = 0, int first_frame = 0) {
  s.validate();
  if (frames.empty()) fail(Errc::shape, "encode_gof: no frames");
  EncodedGof g;
  g.group_id = group_id;
  g.first_frame = first_frame;
  g.width = frames[0].width;
  g.height = frames[0].height;
  g.channels = frames[0].channels;
  g.settings = s;
  g.profile = profile;
  if (profile.channels() != g.channels) fail(Errc::shape, "encode_gof: profile channel count mismatch");
  GofModels models;
  QuantizedFrame recon;
  for (std::size_t i = 0; i < frames.size(); ++i) {
    const auto& f = frames[i];
    if (f.width != g.width || f.height != g.height || f.channels != g.channels)
      fail(Errc::shape, "encode_gof: frame " + std::to_string(first_frame + int(i)) + " differs in size");
    auto [bytes, rec] = encode_frame(f, i == 0 ? nullptr : &recon, s, models);
    g.frames.push_back(std::move(bytes));
    recon = std::move(rec);
  }
  return g;
}

inline std::vector<QuantizedFrame> decode_gof(const EncodedGof& g) {
  std::vector<QuantizedFrame> out;
  GofModels models;
  for (std::size_t i = 0; i < g.frames.size(); ++i)
    out.push_back(decode_frame(g.frames[i], g.width, g.height, g.channels, i == 0 ? nullptr : &out.back(),
                               g.settings, models));
  return out;
}

// ---------------------------------------------------------------------------
// serialization: GOF chunk = u32 crc32(body) + body; body = descriptor +
// per-frame (u32 length + stream). The chunk alone is decodable.

inline std::uint32_t crc32_of(std::span<const std::uint8_t> bytes) {
  return std::uint32_t(::crc32(::crc32(0L, Z_NULL, 0), bytes.data(), uInt(bytes.size())));
}

inline void write_gof_descriptor(ByteWriter& w, const EncodedGof& g) {
  w.put<std::int32_t>(g.group_id);
  w.put<std::uint32_t>(std::uint32_t(g.first_frame));
  w.put<std::uint32_t>(std::uint32_t(g.frame_count()));
  w.put<std::uint32_t>(std::uint32_t(g.width));
  w.put<std::uint32_t>(std::uint32_t(g.height));
  w.put<std::uint32_t>(std::uint32_t(g.channels));
  w.put<std::uint32_t>(std::uint32_t(g.settings.q));
  w.put<std::uint8_t>(g.settings.lossless ? 1 : 0);
  for (int c = 0; c < g.channels; ++c) {
    w.put<float>(g.profile.min[std::size_t(c)]);
    w.put<float>(g.profile.max[std::size_t(c)]);
  }
}

/// Reads a descriptor; frame streams are left empty (frame_count recorded in `count`).
inline EncodedGof read_gof_descriptor(ByteReader& r, std::uint32_t& count) {
  EncodedGof g;
  g.group_id = r.get<std::int32_t>();
  g.first_frame = int(r.get<std::uint32_t>());
  count = r.get<std::uint32_t>();
  g.width = int(r.get<std::uint32_t>());
  g.height = int(r.get<std::uint32_t>());
  g.channels = int(r.get<std::uint32_t>());
  g.settings.q = int(r.get<std::uint32_t>());
  g.settings.lossless = r.get<std::uint8_t>() != 0;
  if (g.width <= 0 || g.height <= 0 || g.channels <= 0 || g.channels > 64 || g.settings.q < 1 ||
      std::size_t(g.width) * std::size_t(g.height) > (std::size_t(1) << 28))
    fail(Errc::format, "GOF descriptor out of range");
  for (int c = 0; c < g.channels; ++c) {
    g.profile.min.push_back(r.get<float>());
    g.profile.max.push_back(r.get<float>());
  }
  return g;
}

inline std::vector<std::uint8_t> serialize_gof(const EncodedGof& g) {
  ByteWriter body;
  write_gof_descriptor(body, g);
  for (const auto& f : g.frames) {
    body.put<std::uint32_t>(std::uint32_t(f.size()));
    body.bytes(f);
  }
  auto b = body.take();
  ByteWriter w;
  w.put<std::uint32_t>(crc32_of(b));
  w.bytes(b);
  return w.take();
}

inline EncodedGof parse_gof(std::span<const std::uint8_t> chunk) {
  if (chunk.size() < 4) fail(Errc::format, "GOF chunk too short");
  ByteReader head(chunk);
  const auto crc = head.get<std::uint32_t>();
  const auto body = chunk.subspan(4);
  if (crc32_of(body) != crc) fail(Errc::checksum, "GOF chunk checksum mismatch");
  ByteReader r(body);
  std::uint32_t count = 0;
  EncodedGof g = read_gof_descriptor(r, count);
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto len = r.get<std::uint32_t>();
    const auto s = r.bytes(len);
    g.frames.emplace_back(s.begin(), s.end());
  }
  return g;
}

// .vrfs: "VRFS", u32 version, u32 max width, u32 max height, u32 channels,
// u32 gof count, then per GOF {descriptor, u64 chunk offset, u64 chunk
// length}, then the chunks. Offsets are absolute.

struct VrfsEntry {
  EncodedGof descriptor;  // frames empty
  int frame_count = 0;
  std::uint64_t offset = 0;
  std::uint64_t length = 0;
};

struct VrfsIndex {
  int width = 0;
  int height = 0;
  int channels = 0;
  std::vector<VrfsEntry> gofs;
  std::uint64_t header_bytes = 0;
};

inline constexpr std::uint32_t kVrfsVersion = 1;

inline std::vector<std::uint8_t> write_vrfs(std::span<const EncodedGof> gofs) {
  if (gofs.empty()) fail(Errc::shape, "write_vrfs: no groups");
  std::vector<std::vector<std::uint8_t>> chunks;
  int w = 0, h = 0;
  for (const auto& g : gofs) {
    chunks.push_back(serialize_gof(g));
    w = std::max(w, g.width);
    h = std::max(h, g.height);
    if (g.channels != gofs[0].channels) fail(Errc::shape, "write_vrfs: channel count differs between groups");
  }
  auto header = [&](const std::vector<std::uint64_t>& offsets) {
    ByteWriter hw;
    hw.magic("VRFS");
    hw.put<std::uint32_t>(kVrfsVersion);
    hw.put<std::uint32_t>(std::uint32_t(w));
    hw.put<std::uint32_t>(std::uint32_t(h));
    hw.put<std::uint32_t>(std::uint32_t(gofs[0].channels));
    hw.put<std::uint32_t>(std::uint32_t(gofs.size()));
    for (std::size_t i = 0; i < gofs.size(); ++i) {
      write_gof_descriptor(hw, gofs[i]);
      hw.put<std::uint64_t>(offsets[i]);
      hw.put<std::uint64_t>(chunks[i].size());
    }
    return hw.take();
  };
  std::vector<std::uint64_t> offsets(gofs.size(), 0);
  const std::uint64_t head = header(offsets).size();
  std::uint64_t at = head;
  for (std::size_t i = 0; i < chunks.size(); ++i) {
    offsets[i] = at;
    at += chunks[i].size();
  }
  auto out = header(offsets);
  for (const auto& c : chunks) out.insert(out.end(), c.begin(), c.end());
  return out;
}

/// Parses the header only; `bytes` may be just a prefix of the file.
inline VrfsIndex read_vrfs_index(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  r.expect_magic("VRFS");
  if (r.get<std::uint32_t>() != kVrfsVersion) fail(Errc::format, "unsupported VRFS version");
  VrfsIndex idx;
  idx.width = int(r.get<std::uint32_t>());
  idx.height = int(r.get<std::uint32_t>());
  idx.channels = int(r.get<std::uint32_t>());
  const auto n = r.get<std::uint32_t>();
  if (n > 1u << 20) fail(Errc::format, "VRFS: implausible group count");
  for (std::uint32_t i = 0; i < n; ++i) {
    VrfsEntry e;
    std::uint32_t count = 0;
    e.descriptor = read_gof_descriptor(r, count);
    e.frame_count = int(count);
    e.offset = r.get<std::uint64_t>();
    e.length = r.get<std::uint64_t>();
    idx.gofs.push_back(std::move(e));
  }
  idx.header_bytes = r.position();
  return idx;
}

/// Decodes group `i` from the full file or from any buffer holding at least
/// its chunk at the recorded offset.
inline EncodedGof read_vrfs_gof(std::span<const std::uint8_t> file, const VrfsIndex& idx, std::size_t i) {
  if (i >= idx.gofs.size()) fail(Errc::range, "VRFS: no group " + std::to_string(i));
  const auto& e = idx.gofs[i];
  if (e.offset + e.length > file.size()) fail(Errc::format, "VRFS: chunk extends past the data");
  return parse_gof(file.subspan(std::size_t(e.offset), std::size_t(e.length)));
}

// ---------------------------------------------------------------------------
// whole-sequence helpers

struct EncodedStream {
  std::vector<EncodedGof> gofs;

  std::size_t total_payload() const {
    std::size_t s = 0;
    for (const auto& g : gofs) s += g.payload_bytes();
    return s;
  }
  std::size_t keyframe_bytes() const {
    std::size_t s = 0;
    for (const auto& g : gofs) s += g.keyframe_bytes();
    return s;
  }
  std::size_t inter_bytes() const {
    std::size_t s = 0;
    for (const auto& g : gofs) s += g.inter_bytes();
    return s;
  }
};

/// `frames[t]` belongs to group `group_of[t]`; groups are consecutive runs.
inline EncodedStream encode_stream(std::span<const FeatureImage> frames, const CodecSettings& s,
                                   unsigned workers = default_workers()) {
  std::vector<std::pair<std::size_t, std::size_t>> runs;
  for (std::size_t t = 0; t < frames.size(); ++t) {
    if (runs.empty() || frames[t].group_id != frames[runs.back().first].group_id) runs.emplace_back(t, t);
    runs.back().second = t + 1;
  }
  EncodedStream out;
  out.gofs.resize(runs.size());
  // groups are independent; parallel over groups
  parallel_for(runs.size(), workers, [&](std::size_t i) {
    const auto [b, e] = runs[i];
    const auto group = frames.subspan(b, e - b);
    const auto prof = compute_profile(group);
    std::vector<QuantizedFrame> q;
    for (const auto& f : group) q.push_back(quantize(f, prof));
    out.gofs[i] = encode_gof(q, s, prof, group[0].group_id, group[0].frame_index);
  });
  return out;
}

inline std::vector<FeatureImage> decode_stream(const EncodedStream& s) {
  std::vector<FeatureImage> out;
  for (const auto& g : s.gofs) {
    const auto frames = decode_gof(g);
    for (std::size_t i = 0; i < frames.size(); ++i)
      out.push_back(dequantize(frames[i], g.profile, g.first_frame + int(i), g.group_id));
  }
  return out;
}

}  // namespace featvid
