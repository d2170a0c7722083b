#pragma once

#include <limits>

#include "featvid/png.hpp"

namespace featvid {

/// Float RGB render target with per-pixel accumulated opacity.
struct Image {
  int width = 0;
  int height = 0;
  std::vector<float> rgb;      // interleaved, 3 per pixel
  std::vector<float> opacity;  // 1 per pixel

  Image() = default;
  Image(int w, int h)
      : width(w), height(h), rgb(std::size_t(w) * std::size_t(h) * 3, 0.0f), opacity(std::size_t(w) * std::size_t(h), 0.0f) {}

  std::size_t pixel_count() const { return std::size_t(width) * std::size_t(height); }
  float* pixel(std::size_t p) { return rgb.data() + p * 3; }
  const float* pixel(std::size_t p) const { return rgb.data() + p * 3; }
  friend bool operator==(const Image&, const Image&) = default;
};

inline double mse(const Image& a, const Image& b) {
  if (a.width != b.width || a.height != b.height) fail(Errc::shape, "mse: image sizes differ");
  double s = 0.0;
  for (std::size_t i = 0; i < a.rgb.size(); ++i) {
    const double d = double(a.rgb[i]) - double(b.rgb[i]);
    s += d * d;
  }
  return s / double(a.rgb.size());
}

/// Peak 1.0. Identical images give +infinity.
inline double psnr(const Image& a, const Image& b) {
  const double m = mse(a, b);
  if (m == 0.0) return std::numeric_limits<double>::infinity();
  return -10.0 * std::log10(m);
}

inline double psnr_from_mse(double m) {
  return m == 0.0 ? std::numeric_limits<double>::infinity() : -10.0 * std::log10(m);
}

inline PngImage to_png(const Image& img) {
  PngImage out{img.width, img.height, 3, 8, std::vector<std::uint16_t>(img.rgb.size())};
  for (std::size_t i = 0; i < img.rgb.size(); ++i)
    out.samples[i] = std::uint16_t(std::lround(std::clamp(double(img.rgb[i]), 0.0, 1.0) * 255.0));
  return out;
}

}  // namespace featvid
