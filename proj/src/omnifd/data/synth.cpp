#include "omnifd/data/synth.hpp"

#include <algorithm>
#include <cmath>

#include "omnifd/core/image.hpp"

namespace omnifd::synth {

namespace {

double clamp01(double v) { return std::min(1.0, std::max(0.0, v)); }

// smooth ellipse membership with a soft edge of roughly one pixel
double ellipse_alpha(double x, double y, double cx, double cy, double rx, double ry, double softness = 0.08) {
  const double dx = (x - cx) / rx;
  const double dy = (y - cy) / ry;
  const double d = std::sqrt(dx * dx + dy * dy);
  if (d <= 1.0 - softness) return 1.0;
  if (d >= 1.0 + softness) return 0.0;
  return (1.0 + softness - d) / (2.0 * softness);
}

void blend(double* px, const double* color, double alpha) {
  for (int c = 0; c < 3; ++c) px[c] = (1 - alpha) * px[c] + alpha * color[c];
}

}  // namespace

FaceParams face_params_from_seed(std::uint64_t seed) {
  Rng rng(derive_seed(seed, "face-params"));
  FaceParams p{};
  for (int c = 0; c < 3; ++c) {
    p.bg_top[c] = rng.uniform(0.05, 0.45);
    p.bg_bottom[c] = rng.uniform(0.3, 0.8);
  }
  const double tone = rng.uniform(0.45, 0.85);
  p.skin[0] = clamp01(tone + rng.uniform(0.05, 0.15));
  p.skin[1] = clamp01(tone * rng.uniform(0.75, 0.9));
  p.skin[2] = clamp01(tone * rng.uniform(0.55, 0.75));
  p.cx = rng.uniform(0.42, 0.58);
  p.cy = rng.uniform(0.42, 0.58);
  p.ax = rng.uniform(0.28, 0.38);
  p.ay = rng.uniform(0.34, 0.44);
  p.eye_dx = rng.uniform(0.12, 0.17);
  p.eye_dy = rng.uniform(0.08, 0.14);
  p.eye_r = rng.uniform(0.045, 0.07);
  p.eye_open = rng.uniform(0.7, 1.0);
  p.iris[0] = rng.uniform(0.05, 0.3);
  p.iris[1] = rng.uniform(0.1, 0.4);
  p.iris[2] = rng.uniform(0.15, 0.55);
  p.mouth_dy = rng.uniform(0.16, 0.24);
  p.mouth_w = rng.uniform(0.1, 0.16);
  p.mouth_open = rng.uniform(0.2, 0.8);
  p.mouth_color[0] = rng.uniform(0.45, 0.7);
  p.mouth_color[1] = rng.uniform(0.1, 0.25);
  p.mouth_color[2] = rng.uniform(0.15, 0.3);
  p.brow_drop = rng.uniform(0.05, 0.09);
  p.noise_seed = rng.next_u64();
  p.noise_amp = rng.uniform(0.01, 0.03);
  return p;
}

Tensor render_face(const FaceParams& p, long h, long w) {
  Tensor out({h, w, 3});
  Rng noise(p.noise_seed);
  // face interior is slightly darker toward the rim for a shading cue
  for (long i = 0; i < h; ++i) {
    const double v = static_cast<double>(i) / static_cast<double>(h - 1);
    for (long j = 0; j < w; ++j) {
      const double u = static_cast<double>(j) / static_cast<double>(w - 1);
      double* px = out.data() + (i * w + j) * 3;
      for (int c = 0; c < 3; ++c) px[c] = (1 - v) * p.bg_top[c] + v * p.bg_bottom[c];

      const double face_a = ellipse_alpha(u, v, p.cx, p.cy, p.ax, p.ay);
      if (face_a > 0) {
        const double dx = (u - p.cx) / p.ax, dy = (v - p.cy) / p.ay;
        const double shade = 1.0 - 0.25 * (dx * dx + dy * dy);
        double skin[3] = {p.skin[0] * shade, p.skin[1] * shade, p.skin[2] * shade};
        blend(px, skin, face_a);
      }
      for (int side = -1; side <= 1; side += 2) {
        const double ex = p.cx + side * p.eye_dx;
        const double ey = p.cy - p.eye_dy;
        const double open_r = p.eye_r * std::max(0.08, p.eye_open);
        const double white_a = ellipse_alpha(u, v, ex, ey, p.eye_r * 1.35, open_r);
        if (white_a > 0) {
          double white[3] = {0.92, 0.92, 0.9};
          blend(px, white, white_a);
        }
        const double iris_a = ellipse_alpha(u, v, ex, ey, p.eye_r * 0.65, open_r * 0.9);
        if (iris_a > 0) blend(px, p.iris, iris_a);
        const double brow_a = ellipse_alpha(u, v, ex, ey - p.brow_drop, p.eye_r * 1.5, p.eye_r * 0.35);
        if (brow_a > 0) {
          double brow[3] = {0.15, 0.1, 0.08};
          blend(px, brow, brow_a);
        }
      }
      const double mouth_a =
          ellipse_alpha(u, v, p.cx, p.cy + p.mouth_dy, p.mouth_w, 0.015 + 0.035 * p.mouth_open);
      if (mouth_a > 0) blend(px, p.mouth_color, mouth_a);
    }
  }
  // texture noise, fixed by noise_seed
  for (long i = 0; i < h * w * 3; ++i) out[i] = clamp01(out[i] + noise.uniform(-1.0, 1.0) * p.noise_amp);
  return out;
}

Tensor gen_real_face(std::uint64_t seed, long h, long w) {
  if (h < 16 || w < 16) throw Error(errc::BadConfig, "face resolution too small");
  return render_face(face_params_from_seed(seed), h, w);
}

Manipulation sample_manipulation(Rng& rng, long h, long w) {
  Manipulation m;
  m.kind = static_cast<int>(rng.uniform_int(0, 3));
  m.cx = rng.uniform(0.3, 0.7);
  m.cy = rng.uniform(0.3, 0.7);
  m.rx = rng.uniform(0.12, 0.3);
  m.ry = rng.uniform(0.12, 0.3);
  for (int c = 0; c < 3; ++c) {
    const double mag = rng.uniform(0.1, 0.3);
    m.delta[c] = rng.bernoulli(0.5) ? mag : -mag;
  }
  m.warp_dx = rng.uniform(-1.0, 1.0);
  m.warp_dy = rng.uniform(-1.0, 1.0);
  m.warp_mag = rng.uniform(1.5, 3.5) / static_cast<double>(std::min(h, w));
  m.donor_seed = rng.next_u64();
  m.donor_off_x = rng.uniform(-0.08, 0.08);
  m.donor_off_y = rng.uniform(-0.08, 0.08);
  m.blur_radius = static_cast<int>(rng.uniform_int(1, 2));
  return m;
}

Tensor apply_manipulation(const Tensor& image, const Manipulation& m) {
  const long h = image.dim(0), w = image.dim(1);
  Tensor out = image;
  Tensor donor;
  if (m.kind == 2) donor = gen_real_face(m.donor_seed, h, w);

  for (long i = 0; i < h; ++i) {
    const double v = static_cast<double>(i) / static_cast<double>(h - 1);
    for (long j = 0; j < w; ++j) {
      const double u = static_cast<double>(j) / static_cast<double>(w - 1);
      const double a = ellipse_alpha(u, v, m.cx, m.cy, m.rx, m.ry, 0.15);
      if (a <= 0) continue;
      double* px = out.data() + (i * w + j) * 3;
      switch (m.kind) {
        case 0: {  // region color shift
          for (int c = 0; c < 3; ++c) px[c] = clamp01(px[c] + a * m.delta[c]);
          break;
        }
        case 1: {  // local warp: sample from a displaced source position
          const double amp = a * m.warp_mag * static_cast<double>(std::min(h, w));
          double sy = static_cast<double>(i) + amp * m.warp_dy * std::sin(6.2831853 * u * 2.0 + 1.3);
          double sx = static_cast<double>(j) + amp * m.warp_dx * std::sin(6.2831853 * v * 2.0 + 0.7);
          sy = std::min(std::max(sy, 0.0), static_cast<double>(h - 1));
          sx = std::min(std::max(sx, 0.0), static_cast<double>(w - 1));
          const long y0 = static_cast<long>(sy), x0 = static_cast<long>(sx);
          const long y1 = std::min(y0 + 1, h - 1), x1 = std::min(x0 + 1, w - 1);
          const double fy = sy - y0, fx = sx - x0;
          for (int c = 0; c < 3; ++c) {
            const double s = (1 - fy) * ((1 - fx) * image[(y0 * w + x0) * 3 + c] + fx * image[(y0 * w + x1) * 3 + c]) +
                             fy * ((1 - fx) * image[(y1 * w + x0) * 3 + c] + fx * image[(y1 * w + x1) * 3 + c]);
            px[c] = (1 - a) * px[c] + a * s;
          }
          break;
        }
        case 2: {  // splice from a donor face at a small offset
          long sy = i + static_cast<long>(std::lround(m.donor_off_y * h));
          long sx = j + static_cast<long>(std::lround(m.donor_off_x * w));
          sy = std::min(std::max(sy, 0L), h - 1);
          sx = std::min(std::max(sx, 0L), w - 1);
          for (int c = 0; c < 3; ++c) px[c] = (1 - a) * px[c] + a * donor[(sy * w + sx) * 3 + c];
          break;
        }
        case 3: {  // blur blending
          const int r = m.blur_radius;
          for (int c = 0; c < 3; ++c) {
            double acc = 0;
            int cnt = 0;
            for (long di = -r; di <= r; ++di)
              for (long dj = -r; dj <= r; ++dj) {
                const long y = std::min(std::max(i + di, 0L), h - 1);
                const long x = std::min(std::max(j + dj, 0L), w - 1);
                acc += image[(y * w + x) * 3 + c];
                ++cnt;
              }
            px[c] = (1 - a) * px[c] + a * (acc / cnt);
          }
          break;
        }
      }
    }
  }
  return out;
}

Tensor change_mask(const Tensor& original, const Tensor& forged) {
  Tensor diff = img::abs_diff_map(original, forged);
  Tensor mask({diff.dim(0), diff.dim(1)});
  for (long i = 0; i < mask.numel(); ++i) mask[i] = diff[i] > 1e-3 ? 1.0 : 0.0;
  return img::morph_close3(mask);
}

ForgeResult forge_image(const Tensor& image, std::uint64_t seed) {
  const long h = image.dim(0), w = image.dim(1);
  const double total = static_cast<double>(h * w);
  for (int attempt = 0; attempt < 64; ++attempt) {
    Rng rng(derive_seed(seed, "forge", static_cast<std::uint64_t>(attempt)));
    Manipulation m = sample_manipulation(rng, h, w);
    Tensor forged = apply_manipulation(image, m);
    Tensor mask = change_mask(image, forged);
    const double frac = mask.sum() / total;
    if (frac >= 0.01 && frac <= 0.6) return {std::move(forged), std::move(mask)};
  }
  throw Error(errc::BadConfig, "forge_image: could not satisfy mask-fraction bounds");
}

namespace {
FaceParams drift_params(const FaceParams& base, double t_seconds) {
  FaceParams p = base;
  // all offsets vanish at t = 0 so frame 0 matches the still generator
  const double sway = std::sin(6.2831853 * 0.35 * t_seconds);
  const double nod = std::sin(6.2831853 * 0.22 * t_seconds + 0.4) - std::sin(0.4);
  p.cx = base.cx + 0.015 * sway;
  p.cy = base.cy + 0.01 * nod;
  const double mouth_cycle = 0.5 - 0.5 * std::cos(6.2831853 * 0.6 * t_seconds);
  p.mouth_open = clamp01(base.mouth_open + 0.35 * mouth_cycle);
  // periodic blink: a sharp dip in eye openness away from t = 0
  const double blink_phase = std::fmod(t_seconds + 0.9, 1.8);
  const double blink = std::max(0.0, 1.0 - std::fabs(blink_phase - 0.9) / 0.12);
  p.eye_open = std::max(0.08, base.eye_open * (1.0 - 0.9 * blink));
  return p;
}
}  // namespace

Tensor gen_video(std::uint64_t seed, long t_frames, double fps, long h, long w) {
  if (t_frames < 8) throw Error(errc::BadConfig, "gen_video: need at least 8 frames");
  const FaceParams base = face_params_from_seed(derive_seed(seed, "frame-base"));
  Tensor out({t_frames, h, w, 3});
  for (long t = 0; t < t_frames; ++t) {
    const Tensor frame = render_face(drift_params(base, static_cast<double>(t) / fps), h, w);
    double* dst = out.data() + t * h * w * 3;
    for (long e = 0; e < h * w * 3; ++e) dst[e] = frame[e];
  }
  return out;
}

VideoForgeResult forge_video(const Tensor& video, std::uint64_t seed, double fps) {
  const long t_frames = video.dim(0), h = video.dim(1), w = video.dim(2);

  for (int attempt = 0; attempt < 64; ++attempt) {
    Rng rng(derive_seed(seed, "forge-video", static_cast<std::uint64_t>(attempt)));
    const long n_seg = rng.uniform_int(1, 3);
    const double cover = rng.uniform(0.15, 0.6);
    long forged_frames = std::max<long>(n_seg, static_cast<long>(std::lround(cover * t_frames)));
    forged_frames = std::min(forged_frames, t_frames - n_seg);  // leave room for gaps

    // split the forged frames over n_seg segments and place them with gaps
    std::vector<long> lens(static_cast<size_t>(n_seg), 1);
    for (long extra = forged_frames - n_seg; extra > 0; --extra)
      lens[static_cast<size_t>(rng.uniform_int(0, n_seg - 1))]++;
    const long free_frames = t_frames - forged_frames - (n_seg - 1);  // one gap frame between segments
    if (free_frames < 0) continue;
    std::vector<long> starts;
    long cursor = 0, remaining_free = free_frames;
    bool ok = true;
    for (long s = 0; s < n_seg; ++s) {
      const long jitter = remaining_free > 0 ? rng.uniform_int(0, remaining_free) : 0;
      cursor += jitter;
      remaining_free -= jitter;
      starts.push_back(cursor);
      cursor += lens[static_cast<size_t>(s)] + 1;  // +1 gap
    }
    if (!ok) continue;

    VideoForgeResult res;
    res.video = video;
    res.frame_masks.assign(static_cast<size_t>(t_frames), Tensor({h, w}));
    bool valid = true;
    double total_cover = 0;
    for (long s = 0; s < n_seg && valid; ++s) {
      const long f0 = starts[static_cast<size_t>(s)];
      const long f1 = f0 + lens[static_cast<size_t>(s)] - 1;
      Manipulation m = sample_manipulation(rng, h, w);
      for (long f = f0; f <= f1 && valid; ++f) {
        Tensor frame({h, w, 3});
        const double* src = video.data() + f * h * w * 3;
        for (long e = 0; e < h * w * 3; ++e) frame[e] = src[e];
        Tensor forged = apply_manipulation(frame, m);
        Tensor mask = change_mask(frame, forged);
        const double frac = mask.sum() / static_cast<double>(h * w);
        if (frac < 0.01 || frac > 0.6) {
          valid = false;
          break;
        }
        double* dst = res.video.data() + f * h * w * 3;
        for (long e = 0; e < h * w * 3; ++e) dst[e] = forged[e];
        res.frame_masks[static_cast<size_t>(f)] = std::move(mask);
      }
      res.segments.emplace_back(static_cast<double>(f0) / fps, static_cast<double>(f1 + 1) / fps);
      total_cover += static_cast<double>(lens[static_cast<size_t>(s)]) / t_frames;
    }
    if (!valid) continue;
    if (total_cover < 0.1 || total_cover > 0.7) continue;
    std::sort(res.segments.begin(), res.segments.end());
    return res;
  }
  throw Error(errc::BadConfig, "forge_video: could not satisfy segment constraints");
}

AugmentedSample augment(const Tensor& pixels, const std::vector<Tensor>& masks, std::uint64_t seed,
                        const AugmentConfig& cfg) {
  Rng rng(derive_seed(seed, "augment"));
  const bool is_video = pixels.ndim() == 4;
  const long t_frames = is_video ? pixels.dim(0) : 1;
  const long h = is_video ? pixels.dim(1) : pixels.dim(0);
  const long w = is_video ? pixels.dim(2) : pixels.dim(1);

  const bool flip = rng.bernoulli(cfg.flip_prob);
  const double scale = rng.uniform(cfg.min_crop_scale, 1.0);
  const long ch = std::max<long>(8, static_cast<long>(std::lround(scale * h)));
  const long cw = std::max<long>(8, static_cast<long>(std::lround(scale * w)));
  const long y0 = ch < h ? rng.uniform_int(0, h - ch) : 0;
  const long x0 = cw < w ? rng.uniform_int(0, w - cw) : 0;

  const double brightness = rng.uniform(1.0 - cfg.color_jitter, 1.0 + cfg.color_jitter);
  const double contrast = rng.uniform(1.0 - cfg.color_jitter, 1.0 + cfg.color_jitter);
  double gain[3];
  for (int c = 0; c < 3; ++c) gain[c] = rng.uniform(1.0 - cfg.color_jitter / 2, 1.0 + cfg.color_jitter / 2);
  const bool compress = rng.bernoulli(cfg.compress_prob);
  const double compress_strength = rng.uniform(0.1, 0.6);

  auto transform_frame = [&](Tensor frame) {
    if (flip) frame = img::flip_horizontal(frame);
    if (ch < h || cw < w) frame = img::resize_bilinear(img::crop(frame, y0, x0, ch, cw), h, w);
    for (long i = 0; i < frame.numel(); ++i) {
      double v = frame[i] * static_cast<double>(gain[i % 3]) * brightness;
      v = (v - 0.5) * contrast + 0.5;
      frame[i] = clamp01(v);
    }
    if (compress) frame = img::block_compress(frame, compress_strength);
    return frame;
  };
  auto transform_mask = [&](Tensor mask) {
    if (flip) mask = img::flip_horizontal(mask);
    if (ch < h || cw < w) mask = img::resize_nearest(img::crop(mask, y0, x0, ch, cw), h, w);
    return mask;
  };

  AugmentedSample out;
  if (is_video) {
    out.pixels = Tensor({t_frames, h, w, 3});
    for (long t = 0; t < t_frames; ++t) {
      Tensor frame({h, w, 3});
      const double* src = pixels.data() + t * h * w * 3;
      for (long e = 0; e < h * w * 3; ++e) frame[e] = src[e];
      frame = transform_frame(std::move(frame));
      double* dst = out.pixels.data() + t * h * w * 3;
      for (long e = 0; e < h * w * 3; ++e) dst[e] = frame[e];
    }
  } else {
    out.pixels = transform_frame(pixels);
  }
  for (const Tensor& m : masks) out.masks.push_back(transform_mask(m));
  return out;
}

}  // namespace omnifd::synth
