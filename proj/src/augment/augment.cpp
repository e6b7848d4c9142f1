#include "augment/augment.hpp"

#include <algorithm>
#include <cmath>

namespace dynacl {

void AugmentationPolicy::validate() const {
  if (strength < 0.0 || strength > 1.0)
    throw ConfigError("augment: strength must lie in [0,1]");
  if (out_height < 1 || out_width < 1)
    throw ConfigError("augment: output size must be positive");
  if (flip_probability < 0.0 || flip_probability > 1.0)
    throw ConfigError("augment: flip probability must lie in [0,1]");
}

static const double kLumaR = 0.299, kLumaG = 0.587, kLumaB = 0.114;

// ---------------------------------------------------------------------------
// Parameter sampling
// ---------------------------------------------------------------------------

TransformParams sample_params(const AugmentationPolicy& policy, Rng& rng,
                              int src_height, int src_width) {
  policy.validate();
  contract(src_height >= 1 && src_width >= 1, "augment: empty source image");

  TransformParams p;
  p.src_height = src_height;
  p.src_width = src_width;
  p.out_height = policy.out_height;
  p.out_width = policy.out_width;

  const double area = double(src_height) * double(src_width);
  const double scale_min = policy.crop_scale_min();

  if (scale_min >= 1.0) {
    // s == 0: the crop is always the full image.
    p.crop_top = 0;
    p.crop_left = 0;
    p.crop_height = src_height;
    p.crop_width = src_width;
  } else {
    const double log_ratio_lo = std::log(3.0 / 4.0);
    const double log_ratio_hi = std::log(4.0 / 3.0);
    bool found = false;
    for (int attempt = 0; attempt < 10 && !found; ++attempt) {
      double target_area = rng.uniform(scale_min, 1.0) * area;
      double aspect = std::exp(rng.uniform(log_ratio_lo, log_ratio_hi));
      int w = int(std::lround(std::sqrt(target_area * aspect)));
      int h = int(std::lround(std::sqrt(target_area / aspect)));
      if (w >= 1 && h >= 1 && w <= src_width && h <= src_height) {
        p.crop_width = w;
        p.crop_height = h;
        p.crop_top = rng.uniform_int(0, src_height - h);
        p.crop_left = rng.uniform_int(0, src_width - w);
        found = true;
      }
    }
    if (!found) {
      // Center-crop fallback at the nearest feasible area, preserving the
      // source aspect ratio.
      double target_area = std::clamp(rng.uniform(scale_min, 1.0) * area, 1.0, area);
      double r = std::sqrt(target_area / area);
      int h = std::clamp(int(std::lround(src_height * r)), 1, src_height);
      int w = std::clamp(int(std::lround(src_width * r)), 1, src_width);
      p.crop_height = h;
      p.crop_width = w;
      p.crop_top = (src_height - h) / 2;
      p.crop_left = (src_width - w) / 2;
    }
  }

  p.flip = rng.bernoulli(policy.flip_probability);

  p.jitter = rng.bernoulli(policy.jitter_probability());
  const double mb = policy.jitter_brightness();
  const double mc = policy.jitter_contrast();
  const double ms = policy.jitter_saturation();
  const double mh = policy.jitter_hue();
  // Factors are drawn unconditionally so the stream layout does not depend on
  // the jitter flag.
  p.brightness = rng.uniform(std::max(0.0, 1.0 - mb), 1.0 + mb);
  p.contrast = rng.uniform(std::max(0.0, 1.0 - mc), 1.0 + mc);
  p.saturation = rng.uniform(std::max(0.0, 1.0 - ms), 1.0 + ms);
  p.hue_shift = rng.uniform(-mh, mh);
  for (int i = 3; i > 0; --i)
    std::swap(p.jitter_order[size_t(i)], p.jitter_order[size_t(rng.uniform_int(0, i))]);

  p.grayscale = rng.bernoulli(policy.grayscale_probability());
  return p;
}

// ---------------------------------------------------------------------------
// Pixel ops
// ---------------------------------------------------------------------------

static inline double clamp01(double v) { return std::clamp(v, 0.0, 1.0); }

// Bilinear sample of a crop rectangle into dst (per channel plane).
static void crop_resize(const double* src, int channels, int src_h, int src_w,
                        int top, int left, int crop_h, int crop_w, double* dst,
                        int out_h, int out_w) {
  const double scale_y = double(crop_h) / double(out_h);
  const double scale_x = double(crop_w) / double(out_w);
  for (int c = 0; c < channels; ++c) {
    const double* plane = src + size_t(c) * src_h * src_w;
    double* out = dst + size_t(c) * out_h * out_w;
    for (int y = 0; y < out_h; ++y) {
      double sy = (y + 0.5) * scale_y - 0.5;
      sy = std::clamp(sy, 0.0, double(crop_h - 1));
      int y0 = int(sy);
      int y1 = std::min(y0 + 1, crop_h - 1);
      double fy = sy - y0;
      for (int x = 0; x < out_w; ++x) {
        double sx = (x + 0.5) * scale_x - 0.5;
        sx = std::clamp(sx, 0.0, double(crop_w - 1));
        int x0 = int(sx);
        int x1 = std::min(x0 + 1, crop_w - 1);
        double fx = sx - x0;
        const double* row0 = plane + size_t(top + y0) * src_w + left;
        const double* row1 = plane + size_t(top + y1) * src_w + left;
        double v = (1 - fy) * ((1 - fx) * row0[x0] + fx * row0[x1]) +
                   fy * ((1 - fx) * row1[x0] + fx * row1[x1]);
        out[size_t(y) * out_w + x] = v;
      }
    }
  }
}

static void flip_horizontal(double* img, int channels, int h, int w) {
  for (int c = 0; c < channels; ++c) {
    double* plane = img + size_t(c) * h * w;
    for (int y = 0; y < h; ++y) {
      double* row = plane + size_t(y) * w;
      for (int x = 0; x < w / 2; ++x) std::swap(row[x], row[w - 1 - x]);
    }
  }
}

static void rgb_to_hsv(double r, double g, double b, double& h, double& s,
                       double& v) {
  double mx = std::max({r, g, b});
  double mn = std::min({r, g, b});
  double d = mx - mn;
  v = mx;
  s = mx > 0.0 ? d / mx : 0.0;
  if (d <= 0.0) {
    h = 0.0;
    return;
  }
  if (mx == r)
    h = (g - b) / d;
  else if (mx == g)
    h = 2.0 + (b - r) / d;
  else
    h = 4.0 + (r - g) / d;
  h /= 6.0;
  if (h < 0.0) h += 1.0;
}

static void hsv_to_rgb(double h, double s, double v, double& r, double& g,
                       double& b) {
  if (s <= 0.0) {
    r = g = b = v;
    return;
  }
  h = h - std::floor(h);
  double hh = h * 6.0;
  int sector = std::min(5, int(hh));
  double f = hh - sector;
  double p = v * (1.0 - s);
  double q = v * (1.0 - s * f);
  double t = v * (1.0 - s * (1.0 - f));
  switch (sector) {
    case 0: r = v; g = t; b = p; break;
    case 1: r = q; g = v; b = p; break;
    case 2: r = p; g = v; b = t; break;
    case 3: r = p; g = q; b = v; break;
    case 4: r = t; g = p; b = v; break;
    default: r = v; g = p; b = q; break;
  }
}

static void adjust_brightness(double* img, size_t pixels_per_plane, double f) {
  for (size_t i = 0; i < 3 * pixels_per_plane; ++i) img[i] = clamp01(img[i] * f);
}

static void adjust_contrast(double* img, size_t n, double f) {
  const double* r = img;
  const double* g = img + n;
  const double* b = img + 2 * n;
  double mean = 0.0;
  for (size_t i = 0; i < n; ++i)
    mean += kLumaR * r[i] + kLumaG * g[i] + kLumaB * b[i];
  mean /= double(n);
  for (size_t i = 0; i < 3 * n; ++i)
    img[i] = clamp01(f * img[i] + (1.0 - f) * mean);
}

static void adjust_saturation(double* img, size_t n, double f) {
  double* r = img;
  double* g = img + n;
  double* b = img + 2 * n;
  for (size_t i = 0; i < n; ++i) {
    double luma = kLumaR * r[i] + kLumaG * g[i] + kLumaB * b[i];
    r[i] = clamp01(f * r[i] + (1.0 - f) * luma);
    g[i] = clamp01(f * g[i] + (1.0 - f) * luma);
    b[i] = clamp01(f * b[i] + (1.0 - f) * luma);
  }
}

static void adjust_hue(double* img, size_t n, double shift) {
  double* r = img;
  double* g = img + n;
  double* b = img + 2 * n;
  for (size_t i = 0; i < n; ++i) {
    double h, s, v;
    rgb_to_hsv(r[i], g[i], b[i], h, s, v);
    hsv_to_rgb(h + shift, s, v, r[i], g[i], b[i]);
    r[i] = clamp01(r[i]);
    g[i] = clamp01(g[i]);
    b[i] = clamp01(b[i]);
  }
}

static void to_grayscale(double* img, size_t n) {
  double* r = img;
  double* g = img + n;
  double* b = img + 2 * n;
  for (size_t i = 0; i < n; ++i) {
    double luma = kLumaR * r[i] + kLumaG * g[i] + kLumaB * b[i];
    r[i] = luma;
    g[i] = luma;
    b[i] = luma;
  }
}

void apply_raw(const double* src, int channels, int height, int width,
               const TransformParams& params, double* dst) {
  contract(channels == 3, "augment: apply expects 3-channel images");
  contract(height == params.src_height && width == params.src_width,
           "augment: params were sampled for a different image shape");
  contract(params.crop_top >= 0 && params.crop_left >= 0 &&
               params.crop_top + params.crop_height <= height &&
               params.crop_left + params.crop_width <= width &&
               params.crop_height >= 1 && params.crop_width >= 1,
           "augment: crop rectangle outside source image");

  const size_t out_n = size_t(params.out_height) * params.out_width;
  crop_resize(src, channels, height, width, params.crop_top, params.crop_left,
              params.crop_height, params.crop_width, dst, params.out_height,
              params.out_width);
  if (params.flip) flip_horizontal(dst, channels, params.out_height, params.out_width);
  if (params.jitter) {
    for (int op : params.jitter_order) {
      switch (op) {
        case 0: adjust_brightness(dst, out_n, params.brightness); break;
        case 1: adjust_contrast(dst, out_n, params.contrast); break;
        case 2: adjust_saturation(dst, out_n, params.saturation); break;
        default: adjust_hue(dst, out_n, params.hue_shift); break;
      }
    }
  }
  if (params.grayscale) to_grayscale(dst, out_n);
  for (size_t i = 0; i < 3 * out_n; ++i) dst[i] = clamp01(dst[i]);
}

Tensor apply(const Tensor& image, const TransformParams& params) {
  contract(image.ndim() == 3, "augment: apply expects a (C,H,W) image");
  Tensor out(std::vector<int>{image.dim(0), params.out_height, params.out_width});
  apply_raw(image.data(), image.dim(0), image.dim(1), image.dim(2), params,
            out.data());
  return out;
}

// ---------------------------------------------------------------------------
// Batch views
// ---------------------------------------------------------------------------

static void augment_into(const ImageBatch& batch, const AugmentationPolicy& policy,
                         uint64_t seed, int view, ImageBatch& out) {
  const int n = batch.count();
#pragma omp parallel for schedule(static)
  for (int i = 0; i < n; ++i) {
    Rng rng(Rng::derive({seed, uint64_t(i), uint64_t(view)}));
    TransformParams p =
        sample_params(policy, rng, batch.height(), batch.width());
    apply_raw(batch.image(i), batch.channels(), batch.height(), batch.width(),
              p, out.image(i));
  }
  out.labels = batch.labels;
}

std::pair<ImageBatch, ImageBatch> augment_views(const ImageBatch& batch,
                                                const AugmentationPolicy& policy,
                                                uint64_t seed) {
  batch.validate();
  policy.validate();
  ImageBatch v1(batch.count(), batch.channels(), policy.out_height, policy.out_width);
  ImageBatch v2(batch.count(), batch.channels(), policy.out_height, policy.out_width);
  augment_into(batch, policy, seed, 0, v1);
  augment_into(batch, policy, seed, 1, v2);
  return {std::move(v1), std::move(v2)};
}

std::pair<ImageBatch, ImageBatch> augment_views(const ImageBatch& batch,
                                                const AugmentationPolicy& policy,
                                                Rng& rng) {
  return augment_views(batch, policy, rng.next_u64());
}

ImageBatch augment_once(const ImageBatch& batch, const AugmentationPolicy& policy,
                        uint64_t seed) {
  batch.validate();
  policy.validate();
  ImageBatch out(batch.count(), batch.channels(), policy.out_height, policy.out_width);
  augment_into(batch, policy, seed, 0, out);
  return out;
}

}  // namespace dynacl
