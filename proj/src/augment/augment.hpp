#pragma once

#include <array>
#include <cstdint>
#include <utility>

#include "core/rng.hpp"
#include "data/image.hpp"

namespace dynacl {

// Strength-parameterized stochastic transform family. All derived parameters
// scale linearly with s; at s=0 only the horizontal flip remains.
struct AugmentationPolicy {
  double strength = 1.0;   // s in [0,1]
  int out_height = 32;
  int out_width = 32;
  double flip_probability = 0.5;

  double crop_scale_min() const { return 1.0 - 0.9 * strength; }
  double jitter_brightness() const { return 0.4 * strength; }
  double jitter_contrast() const { return 0.4 * strength; }
  double jitter_saturation() const { return 0.4 * strength; }
  double jitter_hue() const { return 0.1 * strength; }
  double jitter_probability() const { return 0.8 * strength; }
  double grayscale_probability() const { return 0.2 * strength; }

  void validate() const;
};

// One concrete realization of the stochastic draw; apply() replays it
// deterministically.
struct TransformParams {
  int src_height = 0, src_width = 0;  // shape the draw was made for
  int crop_top = 0, crop_left = 0, crop_height = 0, crop_width = 0;
  bool flip = false;
  bool jitter = false;
  double brightness = 1.0;  // multiplier
  double contrast = 1.0;    // multiplier
  double saturation = 1.0;  // multiplier
  double hue_shift = 0.0;   // fraction of the hue circle, in [-0.5, 0.5]
  std::array<int, 4> jitter_order = {0, 1, 2, 3};  // indices into {b,c,s,h}
  bool grayscale = false;
  int out_height = 0, out_width = 0;
};

// Draws every stochastic choice for one image. Identical rng state yields
// identical params.
TransformParams sample_params(const AugmentationPolicy& policy, Rng& rng,
                              int src_height, int src_width);

// Deterministic replay: crop+resize -> flip -> jitter -> grayscale.
// Input (C,H,W) with C==3; output (C, out_height, out_width) in [0,1].
Tensor apply(const Tensor& image, const TransformParams& params);

// Raw-pointer core used by batch paths.
void apply_raw(const double* src, int channels, int height, int width,
               const TransformParams& params, double* dst);

// Two independently augmented views per source image, order-aligned with the
// batch. Per-sample draws derive from (seed, sample, view), so the result is
// independent of iteration order and safe to parallelize.
std::pair<ImageBatch, ImageBatch> augment_views(const ImageBatch& batch,
                                                const AugmentationPolicy& policy,
                                                uint64_t seed);

// Spec-shaped convenience: consumes one value from rng to derive the seed.
std::pair<ImageBatch, ImageBatch> augment_views(const ImageBatch& batch,
                                                const AugmentationPolicy& policy,
                                                Rng& rng);

// Augments every image once (used by the diagnostics sweeps).
ImageBatch augment_once(const ImageBatch& batch, const AugmentationPolicy& policy,
                        uint64_t seed);

}  // namespace dynacl
