#pragma once

// The shared tiny decoder: one ReLU hidden layer of 16 units mapping an
// accumulated ray feature plus an encoded view direction to sigmoid RGB.

#include <iostream>

#include "json.hpp"

#include "featvid/core.hpp"
#include "featvid/volume.hpp"

namespace featvid {

inline constexpr int kHiddenUnits = 16;
inline constexpr int kEncodingFrequencies = 4;

constexpr int encoding_dim(int frequencies) { return 3 + 6 * frequencies; }

/// (d, sin(2^0 pi d), cos(2^0 pi d), ..., sin(2^(F-1) pi d), cos(2^(F-1) pi d)).
template <typename Real = double>
std::vector<Real> positional_encode(Vec3 d, int frequencies = kEncodingFrequencies) {
  const double n = norm(d);
  if (std::abs(n - 1.0) > 1e-6) {
    if (n == 0.0) fail(Errc::range, "positional_encode: zero direction");
    std::clog << "warning: positional_encode normalizing a direction of length " << n << "\n";
    d = d * (1.0 / n);
  }
  std::vector<Real> enc;
  enc.reserve(std::size_t(encoding_dim(frequencies)));
  for (int a = 0; a < 3; ++a) enc.push_back(Real(d[a]));
  double scale = 3.141592653589793;
  for (int f = 0; f < frequencies; ++f, scale *= 2.0) {
    for (int a = 0; a < 3; ++a) enc.push_back(Real(std::sin(scale * d[a])));
    for (int a = 0; a < 3; ++a) enc.push_back(Real(std::cos(scale * d[a])));
  }
  return enc;
}

template <typename Real>
Real sigmoid(Real x) {
  return Real(1) / (Real(1) + std::exp(-x));
}

template <typename Real = float>
struct TinyMlpT {
  int inputs = kFeatureChannels + encoding_dim(kEncodingFrequencies);
  int hidden = kHiddenUnits;
  std::vector<Real> w1;  // hidden x inputs, row-major
  std::vector<Real> b1;  // hidden
  std::vector<Real> w2;  // 3 x hidden, row-major
  std::vector<Real> b2;  // 3

  TinyMlpT() : TinyMlpT(kFeatureChannels + encoding_dim(kEncodingFrequencies)) {}
  explicit TinyMlpT(int in, int hid = kHiddenUnits)
      : inputs(in),
        hidden(hid),
        w1(std::size_t(hid) * std::size_t(in), Real(0)),
        b1(std::size_t(hid), Real(0)),
        w2(std::size_t(3) * std::size_t(hid), Real(0)),
        b2(3, Real(0)) {}

  std::size_t parameter_count() const { return w1.size() + b1.size() + w2.size() + b2.size(); }

  /// Flat view order: w1, b1, w2, b2. Used by optimizers and gradient checks.
  template <typename Fn>
  void for_each_tensor(Fn&& fn) {
    fn(w1);
    fn(b1);
    fn(w2);
    fn(b2);
  }

  void check_shapes() const {
    if (w1.size() != std::size_t(hidden) * std::size_t(inputs) || b1.size() != std::size_t(hidden) ||
        w2.size() != std::size_t(3) * std::size_t(hidden) || b2.size() != 3)
      fail(Errc::shape, "tiny mlp tensor shapes are inconsistent");
  }

  template <typename Other>
  TinyMlpT<Other> cast() const {
    TinyMlpT<Other> out(inputs, hidden);
    auto conv = [](const std::vector<Real>& a, std::vector<Other>& b) {
      for (std::size_t i = 0; i < a.size(); ++i) b[i] = Other(a[i]);
    };
    conv(w1, out.w1);
    conv(b1, out.b1);
    conv(w2, out.w2);
    conv(b2, out.b2);
    return out;
  }
  friend bool operator==(const TinyMlpT&, const TinyMlpT&) = default;
};

using TinyMlp = TinyMlpT<float>;

/// Hidden pre-activations kept for the backward pass.
template <typename Real>
struct MlpTrace {
  std::vector<Real> input;
  std::vector<Real> hidden_pre;
  std::array<Real, 3> logits{};
  std::array<Real, 3> rgb{};
};

template <typename Real>
std::array<Real, 3> decode(const TinyMlpT<Real>& mlp, std::span<const Real> feature, std::span<const Real> enc,
                           MlpTrace<Real>* trace = nullptr) {
  if (feature.size() + enc.size() != std::size_t(mlp.inputs))
    fail(Errc::shape, "decode: feature + encoding width " + std::to_string(feature.size() + enc.size()) +
                          " != mlp inputs " + std::to_string(mlp.inputs));
  const int in = mlp.inputs, hid = mlp.hidden;
  Real x_local[128];
  std::vector<Real> x_heap;
  Real* x = x_local;
  if (in > 128) {
    x_heap.resize(std::size_t(in));
    x = x_heap.data();
  }
  std::copy(feature.begin(), feature.end(), x);
  std::copy(enc.begin(), enc.end(), x + feature.size());
  Real h_local[64];
  std::vector<Real> h_heap;
  Real* h = h_local;
  if (hid > 64) {
    h_heap.resize(std::size_t(hid));
    h = h_heap.data();
  }
  for (int j = 0; j < hid; ++j) {
    Real a = mlp.b1[std::size_t(j)];
    const Real* row = mlp.w1.data() + std::size_t(j) * std::size_t(in);
    for (int i = 0; i < in; ++i) a += row[i] * x[i];
    h[j] = a;
  }
  std::array<Real, 3> logits{};
  for (int k = 0; k < 3; ++k) {
    Real a = mlp.b2[std::size_t(k)];
    const Real* row = mlp.w2.data() + std::size_t(k) * std::size_t(hid);
    for (int j = 0; j < hid; ++j) a += row[j] * std::max(h[j], Real(0));
    logits[std::size_t(k)] = a;
  }
  std::array<Real, 3> rgb{sigmoid(logits[0]), sigmoid(logits[1]), sigmoid(logits[2])};
  if (trace) {
    trace->input.assign(x, x + in);
    trace->hidden_pre.assign(h, h + hid);
    trace->logits = logits;
    trace->rgb = rgb;
  }
  return rgb;
}

/// Backpropagates dL/drgb through a traced decode. Accumulates parameter
/// gradients into `grad` (same shapes as the mlp) when non-null and writes
/// dL/dinput into `d_input` when non-empty.
template <typename Real>
void decode_backward(const TinyMlpT<Real>& mlp, const MlpTrace<Real>& trace, const std::array<Real, 3>& d_rgb,
                     TinyMlpT<Real>* grad, std::span<Real> d_input) {
  const int in = mlp.inputs, hid = mlp.hidden;
  Real d_logit[3];
  for (int k = 0; k < 3; ++k) {
    const Real s = trace.rgb[std::size_t(k)];
    d_logit[k] = d_rgb[std::size_t(k)] * s * (Real(1) - s);
  }
  Real dh_local[64];
  std::vector<Real> dh_heap;
  Real* dh = dh_local;
  if (hid > 64) {
    dh_heap.resize(std::size_t(hid));
    dh = dh_heap.data();
  }
  for (int j = 0; j < hid; ++j) {
    const Real pre = trace.hidden_pre[std::size_t(j)];
    Real acc = 0;
    for (int k = 0; k < 3; ++k) acc += d_logit[k] * mlp.w2[std::size_t(k) * std::size_t(hid) + std::size_t(j)];
    dh[j] = pre > Real(0) ? acc : Real(0);
  }
  if (grad) {
    for (int k = 0; k < 3; ++k) {
      grad->b2[std::size_t(k)] += d_logit[k];
      for (int j = 0; j < hid; ++j)
        grad->w2[std::size_t(k) * std::size_t(hid) + std::size_t(j)] +=
            d_logit[k] * std::max(trace.hidden_pre[std::size_t(j)], Real(0));
    }
    for (int j = 0; j < hid; ++j) {
      if (dh[j] == Real(0)) continue;
      grad->b1[std::size_t(j)] += dh[j];
      Real* row = grad->w1.data() + std::size_t(j) * std::size_t(in);
      for (int i = 0; i < in; ++i) row[i] += dh[j] * trace.input[std::size_t(i)];
    }
  }
  if (!d_input.empty()) {
    std::fill(d_input.begin(), d_input.end(), Real(0));
    const std::size_t n = std::min(d_input.size(), std::size_t(in));
    for (int j = 0; j < hid; ++j) {
      if (dh[j] == Real(0)) continue;
      const Real* row = mlp.w1.data() + std::size_t(j) * std::size_t(in);
      for (std::size_t i = 0; i < n; ++i) d_input[i] += dh[j] * row[i];
    }
  }
}

/// Fixed decoder used to render ground-truth reference images.
inline TinyMlp reference_mlp(std::uint64_t seed = 7) {
  TinyMlp m;
  Rng rng(seed ^ 0x5EEDull);
  const int feat = kFeatureChannels;
  for (int j = 0; j < m.hidden; ++j) {
    for (int i = 0; i < m.inputs; ++i) {
      const double scale = i < feat ? 2.0 : 0.3;
      m.w1[std::size_t(j) * std::size_t(m.inputs) + std::size_t(i)] = float(scale * rng.normal());
    }
    m.b1[std::size_t(j)] = float(0.2 * rng.normal());
  }
  for (auto& w : m.w2) w = float(0.6 * rng.normal());
  for (auto& b : m.b2) b = float(0.3 * rng.normal());
  return m;
}

/// Small uniform initialization for a trainable decoder.
inline TinyMlp init_mlp(std::uint64_t seed) {
  TinyMlp m;
  Rng rng(seed ^ 0x1417ull);
  const double a1 = std::sqrt(6.0 / double(m.inputs + m.hidden));
  const double a2 = std::sqrt(6.0 / double(m.hidden + 3));
  for (auto& w : m.w1) w = float(rng.uniform(-a1, a1));
  for (auto& w : m.w2) w = float(rng.uniform(-a2, a2));
  for (auto& b : m.b1) b = 0.05f;
  return m;
}

inline nlohmann::json mlp_to_json(const TinyMlp& m) {
  return {{"inputs", m.inputs}, {"hidden", m.hidden}, {"outputs", 3}, {"activation", "relu"},
          {"output_activation", "sigmoid"}, {"w1", m.w1}, {"b1", m.b1}, {"w2", m.w2}, {"b2", m.b2}};
}

inline TinyMlp mlp_from_json(const nlohmann::json& j) {
  try {
    TinyMlp m(j.at("inputs").get<int>(), j.at("hidden").get<int>());
    m.w1 = j.at("w1").get<std::vector<float>>();
    m.b1 = j.at("b1").get<std::vector<float>>();
    m.w2 = j.at("w2").get<std::vector<float>>();
    m.b2 = j.at("b2").get<std::vector<float>>();
    m.check_shapes();
    return m;
  } catch (const nlohmann::json::exception& e) {
    fail(Errc::format, std::string("mlp json: ") + e.what());
  }
}

}  // namespace featvid
