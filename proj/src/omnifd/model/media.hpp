#pragma once

#include "omnifd/core/tensor.hpp"

namespace omnifd {

enum class Modality { kImage, kVideo };

// Unified 4D input: images are one-frame videos. Pixel values are
// standardized ((v - 0.5) / 0.5 per channel from the [0,1] range).
struct MediaTensor {
  Tensor data;  // {T, H, W, 3}
  Modality modality = Modality::kImage;
  double fps = 0.0;
  long frame_stride = 1;

  long frames() const { return data.dim(0); }
  long height() const { return data.dim(1); }
  long width() const { return data.dim(2); }
};

struct FrameSampling {
  long frame_count = 16;
  long stride = 2;
  long start = 0;
};

inline constexpr double kPixelMean = 0.5;
inline constexpr double kPixelStd = 0.5;

// Builds the unified tensor from a decoded {H,W,3} image in [0,1].
// If target_h/target_w are set and differ from the source, the image is
// bilinearly resized first.
MediaTensor to_unified_tensor(const Tensor& image, long target_h = 0, long target_w = 0);

// Builds the unified tensor from a decoded {T,H,W,3} clip in [0,1],
// sampling `frame_count` frames at `stride` starting at `start`. Indices
// wrap modulo clip length when the requested span exceeds the clip.
MediaTensor to_unified_tensor(const Tensor& clip, const FrameSampling& sampling, double fps, long target_h = 0,
                              long target_w = 0);

// The frame indices the video sampler touches, exposed for tests.
std::vector<long> sample_frame_indices(long clip_len, const FrameSampling& sampling);

}  // namespace omnifd
