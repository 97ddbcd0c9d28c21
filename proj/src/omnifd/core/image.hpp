#pragma once

#include <string>
#include <vector>

#include "omnifd/core/tensor.hpp"

namespace omnifd::img {

// Plain (non-autograd) image helpers. Images are {H, W, C} tensors with
// values in [0,1]; masks are {H, W} tensors in {0,1}.

Tensor resize_bilinear(const Tensor& image, long out_h, long out_w);
Tensor resize_nearest(const Tensor& image, long out_h, long out_w);
Tensor flip_horizontal(const Tensor& image);
Tensor crop(const Tensor& image, long y0, long x0, long h, long w);

// 3x3 binary morphological closing (dilate then erode).
Tensor morph_close3(const Tensor& mask);

// Mean over channels of |a - b| per pixel -> {H, W}.
Tensor abs_diff_map(const Tensor& a, const Tensor& b);

// 4x4 block DCT quantization, a cheap stand-in for lossy compression.
// strength in (0, 1]: larger quantization steps at higher strength.
Tensor block_compress(const Tensor& image, double strength);

// 3x3 Laplacian magnitude of the luma channel -> {H, W}.
Tensor laplacian_energy(const Tensor& image);

void write_pgm(const std::string& path, const Tensor& gray);           // {H,W} in [0,1]
void write_ppm(const std::string& path, const Tensor& rgb);            // {H,W,3} in [0,1]

}  // namespace omnifd::img
