#include "omnifd/model/media.hpp"

#include "omnifd/core/image.hpp"

namespace omnifd {

namespace {
Tensor standardize(Tensor pixels) {
  for (long i = 0; i < pixels.numel(); ++i) pixels[i] = (pixels[i] - kPixelMean) / kPixelStd;
  if (!pixels.all_finite()) throw Error(errc::ShapeMismatch, "media tensor contains non-finite values");
  return pixels;
}

Tensor maybe_resize(const Tensor& image, long target_h, long target_w) {
  if (target_h <= 0 || target_w <= 0) return image;
  if (image.dim(0) == target_h && image.dim(1) == target_w) return image;
  return img::resize_bilinear(image, target_h, target_w);
}
}  // namespace

MediaTensor to_unified_tensor(const Tensor& image, long target_h, long target_w) {
  if (image.numel() == 0) throw Error(errc::EmptySource, "empty image");
  if (image.ndim() != 3 || image.dim(2) != 3) throw Error(errc::ShapeMismatch, "image must be {H,W,3}");
  Tensor px = maybe_resize(image, target_h, target_w);
  const long h = px.dim(0), w = px.dim(1);
  MediaTensor mt;
  mt.data = standardize(px.reshape({1, h, w, 3}));
  mt.modality = Modality::kImage;
  mt.fps = 0.0;
  mt.frame_stride = 1;
  return mt;
}

std::vector<long> sample_frame_indices(long clip_len, const FrameSampling& sampling) {
  if (clip_len <= 0) throw Error(errc::EmptySource, "empty clip");
  if (sampling.frame_count <= 0 || sampling.stride <= 0)
    throw Error(errc::BadConfig, "frame_count and stride must be positive");
  std::vector<long> idx(static_cast<size_t>(sampling.frame_count));
  for (long i = 0; i < sampling.frame_count; ++i) idx[static_cast<size_t>(i)] = (sampling.start + i * sampling.stride) % clip_len;
  return idx;
}

MediaTensor to_unified_tensor(const Tensor& clip, const FrameSampling& sampling, double fps, long target_h,
                              long target_w) {
  if (clip.numel() == 0) throw Error(errc::EmptySource, "empty clip");
  if (clip.ndim() != 4 || clip.dim(3) != 3) throw Error(errc::ShapeMismatch, "clip must be {T,H,W,3}");
  const long len = clip.dim(0), src_h = clip.dim(1), src_w = clip.dim(2);
  const auto idx = sample_frame_indices(len, sampling);

  long h = src_h, w = src_w;
  if (target_h > 0 && target_w > 0) {
    h = target_h;
    w = target_w;
  }
  Tensor out({sampling.frame_count, h, w, 3});
  const long frame_elems = h * w * 3;
  for (long i = 0; i < sampling.frame_count; ++i) {
    Tensor frame({src_h, src_w, 3});
    const double* src = clip.data() + idx[static_cast<size_t>(i)] * src_h * src_w * 3;
    for (long e = 0; e < src_h * src_w * 3; ++e) frame[e] = src[e];
    frame = maybe_resize(frame, h, w);
    double* dst = out.data() + i * frame_elems;
    for (long e = 0; e < frame_elems; ++e) dst[e] = frame[e];
  }
  MediaTensor mt;
  mt.data = standardize(std::move(out));
  mt.modality = Modality::kVideo;
  mt.fps = fps;
  mt.frame_stride = sampling.stride;
  return mt;
}

}  // namespace omnifd
