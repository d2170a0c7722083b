#pragma once

// Sequential per-group fitting of feature images and the shared decoder
// against reference renders, with analytic gradients through decode,
// accumulation, trilinear sampling and the density activation.

#include <cstdio>

#include "featvid/losses.hpp"
#include "featvid/reference_render.hpp"
#include "featvid/sequence.hpp"

namespace featvid {

struct LossWeights {
  double lambda_s = 0.0001;
  double lambda_t = 0.0001;
  double lambda_tv = 0.000016;

  void validate() const {
    if (!(lambda_s >= 0.0) || !(lambda_t >= 0.0) || !(lambda_tv >= 0.0))
      fail(Errc::range, "loss weights must be nonnegative");
  }
};

struct FitConfig {
  int iterations = 2000;  // per frame
  double lr_image = 0.05;
  double lr_image_final = 0.0005;  // exponential decay over each frame's iterations
  double lr_mlp = 0.002;
  LossWeights weights;
  int rays_per_batch = 1024;
  std::uint64_t seed = 1;
  bool train_mlp_after_first_group = false;
  int views = 8;
  int view_size = 64;
  double init_noise = 0.01;
  unsigned workers = default_workers();

  void validate() const {
    weights.validate();
    if (iterations < 0) fail(Errc::range, "iterations must be nonnegative");
    if (!(lr_image > 0.0) || !(lr_mlp > 0.0) || !(lr_image_final > 0.0)) fail(Errc::range, "learning rates must be positive");
    if (rays_per_batch <= 0 || views <= 0 || view_size <= 0) fail(Errc::range, "batch, views and view size must be positive");
  }
};

inline nlohmann::json fit_config_to_json(const FitConfig& c) {
  return {{"iterations", c.iterations},
          {"lr_image", c.lr_image},
          {"lr_image_final", c.lr_image_final},
          {"lr_mlp", c.lr_mlp},
          {"lambda_s", c.weights.lambda_s},
          {"lambda_t", c.weights.lambda_t},
          {"lambda_tv", c.weights.lambda_tv},
          {"rays_per_batch", c.rays_per_batch},
          {"seed", c.seed},
          {"train_mlp_after_first_group", c.train_mlp_after_first_group},
          {"views", c.views},
          {"view_size", c.view_size},
          {"init_noise", c.init_noise}};
}

/// Missing keys keep their defaults.
inline FitConfig fit_config_from_json(const nlohmann::json& j) {
  FitConfig c;
  try {
    c.iterations = j.value("iterations", c.iterations);
    c.lr_image = j.value("lr_image", c.lr_image);
    c.lr_image_final = j.value("lr_image_final", c.lr_image_final);
    c.lr_mlp = j.value("lr_mlp", c.lr_mlp);
    c.weights.lambda_s = j.value("lambda_s", c.weights.lambda_s);
    c.weights.lambda_t = j.value("lambda_t", c.weights.lambda_t);
    c.weights.lambda_tv = j.value("lambda_tv", c.weights.lambda_tv);
    c.rays_per_batch = j.value("rays_per_batch", c.rays_per_batch);
    c.seed = j.value("seed", c.seed);
    c.train_mlp_after_first_group = j.value("train_mlp_after_first_group", c.train_mlp_after_first_group);
    c.views = j.value("views", c.views);
    c.view_size = j.value("view_size", c.view_size);
    c.init_noise = j.value("init_noise", c.init_noise);
  } catch (const nlohmann::json::exception& e) {
    fail(Errc::format, std::string("fit config: ") + e.what());
  }
  c.validate();
  return c;
}

// ---------------------------------------------------------------------------
// ray cache: sample geometry of every training ray, fixed per group

struct CachedSample {
  std::uint32_t base_vertex = 0;
  float frac[3] = {0, 0, 0};
  float delta = 0;
};

struct CachedRay {
  Vec3 direction;
  std::uint32_t first = 0;
  std::uint32_t count = 0;
};

struct RayCache {
  Grid3 grid;
  std::vector<CachedRay> rays;  // view-major, then pixel order
  std::vector<CachedSample> samples;
  std::vector<std::uint32_t> active;  // rays with at least one sample
};

/// Samples are the renderer's own march positions over the group pyramid, so
/// the fitted forward pass matches render_volume up to float rounding.
inline RayCache build_ray_cache(const Grid3& grid, const OccupancyPyramid* pyr, std::span<const Camera> cams,
                                double step = 0.0) {
  if (step <= 0.0) step = default_step(grid);
  RayCache cache;
  cache.grid = grid;
  const int dims[3] = {grid.nx, grid.ny, grid.nz};
  for (const auto& cam : cams) {
    cam.validate();
    for (int v = 0; v < cam.height; ++v)
      for (int u = 0; u < cam.width; ++u) {
        const Ray ray = cam.ray(u, v);
        CachedRay cr;
        cr.direction = ray.direction;
        cr.first = std::uint32_t(cache.samples.size());
        march_positions(grid, pyr, ray, step, [&](double, double delta, Vec3 p) {
          if (p.x < 0.0 || p.y < 0.0 || p.z < 0.0 || p.x > 1.0 || p.y > 1.0 || p.z > 1.0) return;
          CachedSample s;
          int base[3];
          for (int a = 0; a < 3; ++a) {
            const double f = p[a] * double(dims[a] - 1);
            base[a] = std::min(int(std::floor(f)), dims[a] - 2);
            s.frac[a] = float(f - double(base[a]));
          }
          s.base_vertex = std::uint32_t(grid.index(base[0], base[1], base[2]));
          s.delta = float(delta);
          cache.samples.push_back(s);
        });
        cr.count = std::uint32_t(cache.samples.size()) - cr.first;
        if (cr.count) cache.active.push_back(std::uint32_t(cache.rays.size()));
        cache.rays.push_back(cr);
      }
  }
  return cache;
}

// ---------------------------------------------------------------------------
// photometric loss with analytic backward

/// Per-pixel activated density and its derivative, computed once per pass.
template <typename Real>
struct ActivatedDensity {
  std::vector<Real> sigma;
  std::vector<Real> dsigma;

  ActivatedDensity(const FeatureImageT<Real>& img, const DensityActivation& act) {
    sigma.resize(img.pixel_count());
    dsigma.resize(img.pixel_count());
    for (std::size_t p = 0; p < img.pixel_count(); ++p) {
      sigma[p] = act(img.pixel(p)[0]);
      dsigma[p] = act.derivative(img.pixel(p)[0]);
    }
  }
};

template <typename Real>
struct PhotometricContext {
  const FeatureImageT<Real>& img;
  const MappingTable& map;
  const TinyMlpT<Real>& mlp;
  const RayCache& cache;
  std::span<const float> truth;  // 3 per cached ray
  DensityActivation act;
  int frequencies = kEncodingFrequencies;
};

template <typename Real>
struct GradientBuffers {
  std::vector<Real> image;
  TinyMlpT<Real> mlp;
  bool want_image = true;
  bool want_mlp = true;

  GradientBuffers(std::size_t image_size, const TinyMlpT<Real>& shape)
      : image(image_size, Real(0)), mlp(shape.inputs, shape.hidden) {}
  void clear() {
    std::fill(image.begin(), image.end(), Real(0));
    mlp.for_each_tensor([](auto& t) { std::fill(t.begin(), t.end(), Real(0)); });
  }
};

namespace detail {

template <typename Real>
struct RayScratch {
  std::vector<std::array<std::int32_t, 8>> pixels;
  std::vector<std::array<Real, 8>> corner_w;
  std::vector<Real> sigma, weight, trans_after;
  std::vector<std::array<Real, kFeatureChannels>> feature;
};

/// Loss of one ray; when `grad` is set, accumulates its gradient.
template <typename Real>
double ray_loss(const PhotometricContext<Real>& ctx, const ActivatedDensity<Real>& dens, std::uint32_t ray_id,
                RayScratch<Real>& sc, GradientBuffers<Real>* grad) {
  const CachedRay& ray = ctx.cache.rays[ray_id];
  const Grid3& g = ctx.cache.grid;
  const std::size_t sx = 1, sy = std::size_t(g.nx), sz = std::size_t(g.nx) * std::size_t(g.ny);
  const std::size_t n = ray.count;
  const int ch = ctx.img.channels;
  sc.pixels.resize(n);
  sc.corner_w.resize(n);
  sc.sigma.resize(n);
  sc.weight.resize(n);
  sc.trans_after.resize(n);
  sc.feature.resize(n);

  std::array<Real, kFeatureChannels> acc{};
  Real alpha = 0;
  Real depth = 0;
  for (std::size_t k = 0; k < n; ++k) {
    const CachedSample& s = ctx.cache.samples[ray.first + k];
    const Real fx = Real(s.frac[0]), fy = Real(s.frac[1]), fz = Real(s.frac[2]);
    Real sigma = 0;
    std::array<Real, kFeatureChannels> f{};
    for (int c = 0; c < 8; ++c) {
      const int dx = c & 1, dy = (c >> 1) & 1, dz = (c >> 2) & 1;
      const std::size_t v = s.base_vertex + std::size_t(dx) * sx + std::size_t(dy) * sy + std::size_t(dz) * sz;
      const auto p = ctx.map.pixel_index(v);
      const Real w = (dx ? fx : Real(1) - fx) * (dy ? fy : Real(1) - fy) * (dz ? fz : Real(1) - fz);
      sc.pixels[k][std::size_t(c)] = p;
      sc.corner_w[k][std::size_t(c)] = w;
      if (p == kEmpty || w == Real(0)) continue;
      sigma += w * dens.sigma[std::size_t(p)];
      const Real* px = ctx.img.pixel(std::size_t(p)) + 1;
      for (int j = 0; j < kFeatureChannels; ++j) f[std::size_t(j)] += w * px[j];
    }
    const Real tau = sigma * Real(s.delta);
    const Real w = std::exp(-depth) * -std::expm1(-tau);
    depth += tau;
    sc.sigma[k] = sigma;
    sc.weight[k] = w;
    sc.trans_after[k] = std::exp(-depth);
    sc.feature[k] = f;
    alpha += w;
    for (int j = 0; j < kFeatureChannels; ++j) acc[std::size_t(j)] += w * f[std::size_t(j)];
  }

  const auto enc = positional_encode<Real>(ray.direction, ctx.frequencies);
  MlpTrace<Real> trace;
  const auto rgb = decode<Real>(ctx.mlp, acc, enc, grad ? &trace : nullptr);
  const float* truth = ctx.truth.data() + std::size_t(ray_id) * 3;
  Real g_out[3];
  double loss = 0.0;
  for (int c = 0; c < 3; ++c) {
    const Real out = alpha * rgb[std::size_t(c)] + (Real(1) - alpha);
    const Real d = out - Real(truth[c]);
    loss += double(d) * double(d);
    g_out[c] = Real(2) * d;
  }
  if (!grad) return loss;

  std::array<Real, 3> g_rgb{};
  Real g_alpha = 0;
  for (int c = 0; c < 3; ++c) {
    g_rgb[std::size_t(c)] = alpha * g_out[c];
    g_alpha += g_out[c] * (rgb[std::size_t(c)] - Real(1));
  }
  std::vector<Real> g_in(std::size_t(ctx.mlp.inputs));
  decode_backward<Real>(ctx.mlp, trace, g_rgb, grad->want_mlp ? &grad->mlp : nullptr, g_in);
  if (!grad->want_image) return loss;

  // dL/dsigma_k = delta_k (s_k T_{k+1} - sum_{i>k} w_i s_i), s_i = g_F . f_i + g_alpha
  Real suffix = 0;
  for (std::size_t k = n; k-- > 0;) {
    Real s_k = g_alpha;
    for (int j = 0; j < kFeatureChannels; ++j) s_k += g_in[std::size_t(j)] * sc.feature[k][std::size_t(j)];
    const Real d_sigma = Real(ctx.cache.samples[ray.first + k].delta) * (s_k * sc.trans_after[k] - suffix);
    suffix += sc.weight[k] * s_k;
    const Real wk = sc.weight[k];
    for (int c = 0; c < 8; ++c) {
      const auto p = sc.pixels[k][std::size_t(c)];
      const Real cw = sc.corner_w[k][std::size_t(c)];
      if (p == kEmpty || cw == Real(0)) continue;
      Real* gp = grad->image.data() + std::size_t(p) * std::size_t(ch);
      gp[0] += cw * dens.dsigma[std::size_t(p)] * d_sigma;
      const Real fw = cw * wk;
      for (int j = 0; j < kFeatureChannels; ++j) gp[1 + j] += fw * g_in[std::size_t(j)];
    }
  }
  return loss;
}

}  // namespace detail

/// Number of fixed reduction chunks; results do not depend on worker count.
inline constexpr std::size_t kGradientChunks = 16;

/// Sum over `ray_ids` of the squared error of the white-composited color.
/// Gradients are summed into `grad` (not cleared here) when given.
template <typename Real>
double photometric_loss(const PhotometricContext<Real>& ctx, std::span<const std::uint32_t> ray_ids,
                        GradientBuffers<Real>* grad = nullptr, unsigned workers = 1) {
  if (ctx.img.width != ctx.map.width() || ctx.img.height != ctx.map.height() || ctx.img.channels != kImageChannels)
    fail(Errc::shape, "photometric: feature image does not match its mapping table");
  if (ctx.truth.size() != ctx.cache.rays.size() * 3) fail(Errc::shape, "photometric: truth size mismatch");
  const ActivatedDensity<Real> dens(ctx.img, ctx.act);
  const std::size_t chunks = std::min<std::size_t>(kGradientChunks, std::max<std::size_t>(1, ray_ids.size()));
  std::vector<double> losses(chunks, 0.0);
  std::vector<std::optional<GradientBuffers<Real>>> partial(chunks);
  for_each_chunk(ray_ids.size(), chunks, workers, [&](std::size_t chunk, std::size_t b, std::size_t e) {
    detail::RayScratch<Real> sc;
    GradientBuffers<Real>* g = nullptr;
    if (grad) {
      partial[chunk].emplace(grad->image.size(), ctx.mlp);
      partial[chunk]->want_image = grad->want_image;
      partial[chunk]->want_mlp = grad->want_mlp;
      g = &*partial[chunk];
    }
    double sum = 0.0;
    for (std::size_t i = b; i < e; ++i) sum += detail::ray_loss(ctx, dens, ray_ids[i], sc, g);
    losses[chunk] = sum;
  });
  double total = 0.0;
  for (std::size_t c = 0; c < chunks; ++c) {
    total += losses[c];
    if (!grad || !partial[c]) continue;
    for (std::size_t i = 0; i < grad->image.size(); ++i) grad->image[i] += partial[c]->image[i];
    auto dst = std::array{&grad->mlp.w1, &grad->mlp.b1, &grad->mlp.w2, &grad->mlp.b2};
    auto src = std::array{&partial[c]->mlp.w1, &partial[c]->mlp.b1, &partial[c]->mlp.w2, &partial[c]->mlp.b2};
    for (std::size_t t = 0; t < 4; ++t)
      for (std::size_t i = 0; i < dst[t]->size(); ++i) (*dst[t])[i] += (*src[t])[i];
  }
  return total;
}

/// TV of the activated density volume, chained back to the raw density
/// channel of mapped pixels.
template <typename Real>
double density_tv(const FeatureImageT<Real>& img, const MappingTable& map, const DensityActivation& act,
                  std::vector<Real>* grad = nullptr, double scale = 1.0) {
  const Grid3 g = map.grid();
  std::vector<Real> vol(g.count(), Real(0));
  for (std::size_t p = 0; p < img.pixel_count(); ++p) {
    const auto v = map.vertex_index(p);
    if (v != kEmpty) vol[std::size_t(v)] = act(img.pixel(p)[0]);
  }
  if (!grad) return loss_tv3d<Real>(g, vol);
  std::vector<Real> gv(g.count(), Real(0));
  const double loss = loss_tv3d<Real>(g, vol, gv, scale);
  for (std::size_t p = 0; p < img.pixel_count(); ++p) {
    const auto v = map.vertex_index(p);
    if (v != kEmpty) (*grad)[p * std::size_t(img.channels)] += gv[std::size_t(v)] * act.derivative(img.pixel(p)[0]);
  }
  return loss;
}

// ---------------------------------------------------------------------------
// optimizer

struct Adam {
  double lr = 0.05;
  double beta1 = 0.9;
  double beta2 = 0.999;
  // small enough that weak regularizer-only gradients still move parameters
  double eps = 1e-12;
  std::vector<float> m, v;
  long step_count = 0;

  Adam() = default;
  Adam(std::size_t n, double learning_rate) : lr(learning_rate), m(n, 0.0f), v(n, 0.0f) {}

  void step(std::span<float> params, std::span<const float> grad) {
    if (params.size() != m.size() || grad.size() != m.size()) fail(Errc::shape, "adam: size mismatch");
    ++step_count;
    const double c1 = 1.0 - std::pow(beta1, double(step_count));
    const double c2 = 1.0 - std::pow(beta2, double(step_count));
    for (std::size_t i = 0; i < params.size(); ++i) {
      const double g = grad[i];
      const double mi = beta1 * m[i] + (1.0 - beta1) * g;
      const double vi = beta2 * v[i] + (1.0 - beta2) * g * g;
      m[i] = float(mi);
      v[i] = float(vi);
      params[i] -= float(lr * (mi / c1) / (std::sqrt(vi / c2) + eps));
    }
  }
};

/// Adam over the four decoder tensors as one flat vector.
struct MlpAdam {
  Adam inner;
  MlpAdam() = default;
  MlpAdam(const TinyMlp& m, double lr) : inner(m.parameter_count(), lr) {}

  void step(TinyMlp& mlp, TinyMlp& grad) {
    std::vector<float> p, g;
    mlp.for_each_tensor([&](auto& t) { p.insert(p.end(), t.begin(), t.end()); });
    grad.for_each_tensor([&](auto& t) { g.insert(g.end(), t.begin(), t.end()); });
    inner.step(p, g);
    std::size_t off = 0;
    mlp.for_each_tensor([&](auto& t) {
      std::copy_n(p.begin() + std::ptrdiff_t(off), t.size(), t.begin());
      off += t.size();
    });
  }
};

// ---------------------------------------------------------------------------
// sequential fitting

struct FrameStats {
  int frame = 0;
  int group_id = 0;
  double photometric = 0.0;  // last batch
  double spatial = 0.0;
  double temporal = 0.0;
  double tv = 0.0;
  double train_psnr = 0.0;   // full training views, renderer path
  bool mlp_trained = false;
};

struct FitResult {
  std::vector<FeatureImage> frames;  // indexed by frame
  TinyMlp mlp;
  std::vector<FrameStats> stats;
};

/// Reference images for every training view, flattened in ray-cache order.
inline std::vector<float> reference_truth(const SyntheticScene& scene, int t, std::span<const Camera> cams,
                                          unsigned workers = default_workers()) {
  std::vector<float> out;
  RenderOptions opt = reference_options();
  opt.workers = workers;
  for (const auto& cam : cams) {
    const auto img = reference_render(scene, t, cam, reference_mlp(), opt);
    out.insert(out.end(), img.rgb.begin(), img.rgb.end());
  }
  return out;
}

inline std::vector<Camera> training_cameras(const FitConfig& cfg) { return orbit_rig(cfg.views, cfg.view_size, cfg.view_size); }

inline RenderOptions fit_render_options(unsigned workers = default_workers()) {
  RenderOptions opt;
  opt.background = Background::white;
  opt.workers = workers;
  return opt;
}

/// Mean PSNR of the renderer output over the given views.
inline double view_psnr(const FeatureImage& img, const PreparedGroup& g, const TinyMlp& mlp,
                        std::span<const Camera> cams, std::span<const float> truth, unsigned workers = default_workers()) {
  const auto vol = expand(img, g.map, {}, workers);
  double total_mse = 0.0;
  std::size_t off = 0;
  for (const auto& cam : cams) {
    const auto pred = render_volume(vol, &g.pyramid, mlp, cam, fit_render_options(workers));
    Image ref(cam.width, cam.height);
    std::copy_n(truth.begin() + std::ptrdiff_t(off), ref.rgb.size(), ref.rgb.begin());
    off += ref.rgb.size();
    total_mse += mse(pred, ref);
  }
  return psnr_from_mse(total_mse / double(cams.size()));
}

/// Hooks for progress reporting; called after each iteration and frame.
struct FitObserver {
  std::function<void(int frame, int iteration, double loss)> on_iteration;
  std::function<void(const FrameStats&, const FeatureImage&)> on_frame;
};

namespace detail {

inline void fill_noise(FeatureImage& img, Rng& rng, double amplitude, bool density_too) {
  for (std::size_t p = 0; p < img.pixel_count(); ++p)
    for (int c = density_too ? 0 : 1; c < img.channels; ++c) img.pixel(p)[c] = float(rng.uniform(-amplitude, amplitude));
}

/// Initial image for frame t: density from the ground-truth bake; features
/// from the previous frame (through vertex correspondence across groups) or
/// small noise.
inline FeatureImage initial_image(const PreparedSequence& seq, int t, const FeatureImage* prev,
                                  const PreparedGroup* prev_group, Rng& rng, double noise) {
  const auto& g = seq.group_for(t);
  const FeatureImage baked = bake_frame(seq, t);
  FeatureImage img(g.map.width(), g.map.height());
  img.frame_index = t;
  img.group_id = g.group_id;
  fill_noise(img, rng, noise, false);
  if (prev && prev_group) {
    if (prev_group->group_id == g.group_id) {
      img.data = prev->data;
    } else {
      for (std::size_t p = 0; p < img.pixel_count(); ++p) {
        const auto v = g.map.vertex_index(p);
        if (v == kEmpty) continue;
        const auto q = prev_group->map.pixel_index(std::size_t(v));
        if (q != kEmpty) std::copy_n(prev->pixel(std::size_t(q)) + 1, kFeatureChannels, img.pixel(p) + 1);
      }
    }
  }
  for (std::size_t p = 0; p < img.pixel_count(); ++p) img.pixel(p)[0] = baked.pixel(p)[0];
  return img;
}

}  // namespace detail

/// Fits every frame in order. Frame t only ever writes its own image.
inline FitResult fit_sequence(const PreparedSequence& seq, const FitConfig& cfg, const FitObserver& obs = {}) {
  cfg.validate();
  const auto cams = training_cameras(cfg);
  const DensityActivation act;
  FitResult result;
  result.mlp = init_mlp(cfg.seed);
  result.frames.resize(std::size_t(seq.frame_count()));
  MlpAdam mlp_opt(result.mlp, cfg.lr_mlp);

  const PreparedGroup* prev_group = nullptr;
  for (std::size_t gi = 0; gi < seq.groups.size(); ++gi) {
    const auto& group = seq.groups[gi];
    const bool train_mlp = gi == 0 || cfg.train_mlp_after_first_group;
    const RayCache cache = build_ray_cache(group.map.grid(), &group.pyramid, cams);
    for (int t = group.frames.start_frame; t <= group.frames.end_frame; ++t) {
      Rng rng(cfg.seed * 0x9E3779B97F4A7C15ull + std::uint64_t(t) + 1);
      const FeatureImage* prev = t > 0 ? &result.frames[std::size_t(t - 1)] : nullptr;
      FeatureImage img = detail::initial_image(seq, t, prev, prev_group, rng, cfg.init_noise);
      const bool temporal = t > group.frames.start_frame;
      const auto truth = reference_truth(seq.scene, t, cams, cfg.workers);

      Adam img_opt(img.data.size(), cfg.lr_image);
      GradientBuffers<float> grad(img.data.size(), result.mlp);
      grad.want_mlp = train_mlp;
      std::vector<std::uint32_t> batch(std::size_t(cfg.rays_per_batch));
      FrameStats st;
      st.frame = t;
      st.group_id = group.group_id;
      st.mlp_trained = train_mlp;
      for (int it = 0; it < cfg.iterations && !cache.active.empty(); ++it) {
        for (auto& r : batch) r = cache.active[rng.below(cache.active.size())];
        grad.clear();
        const PhotometricContext<float> ctx{img, group.map, result.mlp, cache, truth, act, kEncodingFrequencies};
        st.photometric = photometric_loss<float>(ctx, batch, &grad, cfg.workers);
        st.spatial = cfg.weights.lambda_s > 0 ? loss_spatial(img, &grad.image, cfg.weights.lambda_s) : 0.0;
        st.temporal = temporal && cfg.weights.lambda_t > 0
                          ? loss_temporal(img, result.frames[std::size_t(t - 1)], &grad.image, cfg.weights.lambda_t)
                          : 0.0;
        st.tv = cfg.weights.lambda_tv > 0 ? density_tv(img, group.map, act, &grad.image, cfg.weights.lambda_tv) : 0.0;
        const double total = st.photometric + cfg.weights.lambda_s * st.spatial + cfg.weights.lambda_t * st.temporal +
                             cfg.weights.lambda_tv * st.tv;
        if (!std::isfinite(total))
          fail(Errc::divergence, "loss is not finite at frame " + std::to_string(t) + ", iteration " +
                                     std::to_string(it) + " (photometric " + std::to_string(st.photometric) + ")");
        img_opt.lr = cfg.lr_image * std::pow(cfg.lr_image_final / cfg.lr_image, double(it) / double(cfg.iterations));
        img_opt.step(img.data, grad.image);
        if (train_mlp) mlp_opt.step(result.mlp, grad.mlp);
        if (obs.on_iteration) obs.on_iteration(t, it, total);
      }
      st.spatial = loss_spatial(img);
      st.temporal = temporal ? loss_temporal(img, result.frames[std::size_t(t - 1)]) : 0.0;
      st.tv = density_tv(img, group.map, act);
      st.train_psnr = view_psnr(img, group, result.mlp, cams, truth, cfg.workers);
      if (obs.on_frame) obs.on_frame(st, img);
      result.frames[std::size_t(t)] = std::move(img);
      result.stats.push_back(st);
    }
    prev_group = &group;
  }
  return result;
}

// ---------------------------------------------------------------------------
// VRFC checkpoint: "VRFC", u32 version, u32 inputs, u32 hidden, float32
// w1 b1 w2 b2, u32 image count, then per image u64 length + VRFI bytes.

inline std::vector<std::uint8_t> encode_checkpoint(const FitResult& r) {
  ByteWriter w;
  w.magic("VRFC");
  w.put<std::uint32_t>(1);
  w.put<std::uint32_t>(std::uint32_t(r.mlp.inputs));
  w.put<std::uint32_t>(std::uint32_t(r.mlp.hidden));
  auto mlp = r.mlp;
  mlp.for_each_tensor([&](auto& t) {
    for (float x : t) w.put<float>(x);
  });
  w.put<std::uint32_t>(std::uint32_t(r.frames.size()));
  for (const auto& f : r.frames) {
    const auto b = encode_vrfi(f);
    w.put<std::uint64_t>(b.size());
    w.bytes(b);
  }
  return w.take();
}

inline FitResult decode_checkpoint(std::span<const std::uint8_t> bytes) {
  ByteReader r(bytes);
  r.expect_magic("VRFC");
  if (r.get<std::uint32_t>() != 1) fail(Errc::format, "unsupported VRFC version");
  FitResult out;
  const int inputs = int(r.get<std::uint32_t>());
  const int hidden = int(r.get<std::uint32_t>());
  if (inputs <= 0 || hidden <= 0 || inputs > 4096 || hidden > 4096) fail(Errc::format, "VRFC: bad decoder shape");
  out.mlp = TinyMlp(inputs, hidden);
  out.mlp.for_each_tensor([&](auto& t) {
    for (auto& x : t) x = r.get<float>();
  });
  const auto n = r.get<std::uint32_t>();
  for (std::uint32_t i = 0; i < n; ++i) {
    const auto len = r.get<std::uint64_t>();
    if (len > r.remaining()) fail(Errc::format, "VRFC: truncated image");
    out.frames.push_back(decode_vrfi(r.bytes(std::size_t(len))));
  }
  return out;
}

}  // namespace featvid
