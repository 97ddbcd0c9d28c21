#pragma once

#include <utility>
#include <vector>

#include "omnifd/core/rng.hpp"
#include "omnifd/core/tensor.hpp"

namespace omnifd::synth {

// Renderer parameters for one procedural face. Everything a frame needs is
// captured here so videos can drift parameters smoothly over time.
struct FaceParams {
  double bg_top[3], bg_bottom[3];
  double skin[3];
  double cx, cy;          // face center, relative [0,1]
  double ax, ay;          // face half-axes, relative
  double eye_dx, eye_dy;  // eye offsets from center, relative
  double eye_r;           // eye radius, relative
  double eye_open;        // 0..1 vertical openness
  double iris[3];
  double mouth_dy, mouth_w, mouth_open;
  double mouth_color[3];
  double brow_drop;  // eyebrow vertical offset
  std::uint64_t noise_seed;
  double noise_amp;
};

FaceParams face_params_from_seed(std::uint64_t seed);
Tensor render_face(const FaceParams& p, long h, long w);

// Deterministic per seed; values in [0,1], shape {H,W,3}.
Tensor gen_real_face(std::uint64_t seed, long h, long w);

struct ForgeResult {
  Tensor image;  // {H,W,3}
  Tensor mask;   // {H,W} in {0,1}: pixels that changed, morphologically closed
};

// One manipulation drawn from {color-shift, warp, splice, blur}; the mask
// covers between 1% and 60% of the pixels (enforced by resampling the
// manipulation parameters).
ForgeResult forge_image(const Tensor& image, std::uint64_t seed);

// Manipulation parameters, exposed so video forgery can hold them fixed
// across the frames of a segment.
struct Manipulation {
  int kind = 0;  // 0 color-shift, 1 warp, 2 splice, 3 blur
  double cx, cy, rx, ry;
  double delta[3];      // color-shift
  double warp_dx, warp_dy, warp_mag;
  std::uint64_t donor_seed;  // splice
  double donor_off_x, donor_off_y;
  int blur_radius = 1;
};
Manipulation sample_manipulation(Rng& rng, long h, long w);
Tensor apply_manipulation(const Tensor& image, const Manipulation& m);
Tensor change_mask(const Tensor& original, const Tensor& forged);  // diff > 1e-3, closed

// Smoothly animated face clip, {T,H,W,3}; frame 0 equals
// gen_real_face(derive_seed(seed, "frame-base")).
Tensor gen_video(std::uint64_t seed, long t_frames, double fps, long h, long w);

struct VideoForgeResult {
  Tensor video;                                    // {T,H,W,3}
  std::vector<std::pair<double, double>> segments;  // seconds, disjoint
  std::vector<Tensor> frame_masks;                 // T masks {H,W}
};

// 1-3 disjoint forged segments covering 10-70% of the clip; one fixed
// manipulation per segment applied to every frame inside it.
VideoForgeResult forge_video(const Tensor& video, std::uint64_t seed, double fps);

struct AugmentConfig {
  double flip_prob = 0.5;
  double min_crop_scale = 0.8;
  double compress_prob = 0.5;
  double color_jitter = 0.1;
};

struct AugmentedSample {
  Tensor pixels;               // image {H,W,3} or video {T,H,W,3}
  std::vector<Tensor> masks;   // empty, or 1 (image) / T (video) masks
};

// Geometric transforms hit pixels and masks jointly; photometric
// perturbations hit pixels only. Temporal segments are untouched by
// spatial augments, so callers keep them as-is.
AugmentedSample augment(const Tensor& pixels, const std::vector<Tensor>& masks, std::uint64_t seed,
                        const AugmentConfig& cfg = {});

}  // namespace omnifd::synth
