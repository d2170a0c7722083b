#pragma once

// Regularizers and the photometric loss. Each returns the unweighted loss
// value; when a gradient buffer is given, `scale * dL/dx` is added into it.
// Subgradients of |x| at 0 are taken as 0.

#include "featvid/feature_field.hpp"
#include "featvid/image.hpp"

namespace featvid {

template <typename Real>
Real signum(Real x) {
  return Real((x > Real(0)) - (x < Real(0)));
}

/// Mean over pixels and channels of |right - here| + |down - here|, unit
/// pixel spacing; boundary pixels omit the missing neighbor.
template <typename Real>
double loss_spatial(const FeatureImageT<Real>& img, std::vector<Real>* grad = nullptr, double scale = 1.0) {
  const int w = img.width, h = img.height, ch = img.channels;
  const double n = double(img.pixel_count()) * double(ch);
  if (n == 0.0) return 0.0;
  if (grad && grad->size() != img.data.size()) fail(Errc::shape, "loss_spatial: gradient size mismatch");
  const Real g_scale = Real(scale / n);
  double sum = 0.0;
  for (int v = 0; v < h; ++v)
    for (int u = 0; u < w; ++u) {
      const std::size_t p = std::size_t(v) * std::size_t(w) + std::size_t(u);
      const Real* here = img.pixel(p);
      for (int dir = 0; dir < 2; ++dir) {
        if (dir == 0 ? u + 1 >= w : v + 1 >= h) continue;
        const std::size_t q = dir == 0 ? p + 1 : p + std::size_t(w);
        const Real* there = img.pixel(q);
        for (int c = 0; c < ch; ++c) {
          const Real d = there[c] - here[c];
          sum += std::abs(double(d));
          if (grad) {
            const Real g = g_scale * signum(d);
            (*grad)[q * std::size_t(ch) + std::size_t(c)] += g;
            (*grad)[p * std::size_t(ch) + std::size_t(c)] -= g;
          }
        }
      }
    }
  return sum / n;
}

/// L1 distance to the predecessor frame; the predecessor is held fixed.
template <typename Real>
double loss_temporal(const FeatureImageT<Real>& img, const FeatureImageT<Real>& prev, std::vector<Real>* grad = nullptr,
                     double scale = 1.0) {
  if (img.width != prev.width || img.height != prev.height || img.channels != prev.channels)
    fail(Errc::shape, "loss_temporal: frames differ in shape");
  if (grad && grad->size() != img.data.size()) fail(Errc::shape, "loss_temporal: gradient size mismatch");
  double sum = 0.0;
  for (std::size_t i = 0; i < img.data.size(); ++i) {
    const Real d = img.data[i] - prev.data[i];
    sum += std::abs(double(d));
    if (grad) (*grad)[i] += Real(scale) * signum(d);
  }
  return sum;
}

inline constexpr double kTvEpsilon = 1e-8;

/// Mean over voxels of sqrt(dx^2 + dy^2 + dz^2 + eps) with forward
/// differences; differences past the last vertex are omitted.
template <typename Real>
double loss_tv3d(const Grid3& g, std::span<const Real> values, std::span<Real> grad = {}, double scale = 1.0) {
  if (values.size() != g.count()) fail(Errc::shape, "loss_tv3d: volume size mismatch");
  if (!grad.empty() && grad.size() != g.count()) fail(Errc::shape, "loss_tv3d: gradient size mismatch");
  const double n = double(g.count());
  if (n == 0.0) return 0.0;
  const std::size_t stride[3] = {1, std::size_t(g.nx), std::size_t(g.nx) * std::size_t(g.ny)};
  double sum = 0.0;
  for (int z = 0; z < g.nz; ++z)
    for (int y = 0; y < g.ny; ++y)
      for (int x = 0; x < g.nx; ++x) {
        const std::size_t i = g.index(x, y, z);
        const bool has[3] = {x + 1 < g.nx, y + 1 < g.ny, z + 1 < g.nz};
        double d[3] = {0.0, 0.0, 0.0};
        double sq = kTvEpsilon;
        for (int a = 0; a < 3; ++a)
          if (has[a]) {
            d[a] = double(values[i + stride[a]]) - double(values[i]);
            sq += d[a] * d[a];
          }
        const double r = std::sqrt(sq);
        sum += r;
        if (grad.empty()) continue;
        const double k = scale / (n * r);
        for (int a = 0; a < 3; ++a)
          if (has[a]) {
            grad[i + stride[a]] += Real(k * d[a]);
            grad[i] -= Real(k * d[a]);
          }
      }
  return sum / n;
}

/// Sum over the listed pixels of the squared RGB error.
inline double loss_photometric(const Image& pred, const Image& truth, std::span<const std::size_t> pixels) {
  if (pred.width != truth.width || pred.height != truth.height) fail(Errc::shape, "loss_photometric: size mismatch");
  double sum = 0.0;
  for (std::size_t p : pixels) {
    if (p >= pred.pixel_count()) fail(Errc::range, "loss_photometric: pixel out of range");
    for (int c = 0; c < 3; ++c) {
      const double d = double(pred.pixel(p)[c]) - double(truth.pixel(p)[c]);
      sum += d * d;
    }
  }
  return sum;
}

inline double loss_photometric(const Image& pred, const Image& truth) {
  std::vector<std::size_t> all(pred.pixel_count());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  return loss_photometric(pred, truth, all);
}

}  // namespace featvid
