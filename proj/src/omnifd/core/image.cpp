#include "omnifd/core/image.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

namespace omnifd::img {

namespace {
long clampl(long v, long lo, long hi) { return std::max(lo, std::min(hi, v)); }

void check_hwc(const Tensor& t, const char* what) {
  if (t.ndim() != 3) throw Error(errc::ShapeMismatch, std::string(what) + ": expected {H,W,C}");
}
}  // namespace

Tensor resize_bilinear(const Tensor& image, long out_h, long out_w) {
  check_hwc(image, "resize_bilinear");
  const long h = image.dim(0), w = image.dim(1), c = image.dim(2);
  Tensor out({out_h, out_w, c});
  const double sy = static_cast<double>(h) / out_h;
  const double sx = static_cast<double>(w) / out_w;
  for (long i = 0; i < out_h; ++i) {
    double py = (i + 0.5) * sy - 0.5;
    py = std::min(std::max(py, 0.0), static_cast<double>(h - 1));
    const long y0 = static_cast<long>(py);
    const long y1 = std::min(y0 + 1, h - 1);
    const double fy = py - y0;
    for (long j = 0; j < out_w; ++j) {
      double px = (j + 0.5) * sx - 0.5;
      px = std::min(std::max(px, 0.0), static_cast<double>(w - 1));
      const long x0 = static_cast<long>(px);
      const long x1 = std::min(x0 + 1, w - 1);
      const double fx = px - x0;
      for (long ch = 0; ch < c; ++ch) {
        const double v = (1 - fy) * ((1 - fx) * image[(y0 * w + x0) * c + ch] + fx * image[(y0 * w + x1) * c + ch]) +
                         fy * ((1 - fx) * image[(y1 * w + x0) * c + ch] + fx * image[(y1 * w + x1) * c + ch]);
        out[(i * out_w + j) * c + ch] = v;
      }
    }
  }
  return out;
}

Tensor resize_nearest(const Tensor& image, long out_h, long out_w) {
  const bool is_mask = image.ndim() == 2;
  const long h = image.dim(0), w = image.dim(1), c = is_mask ? 1 : image.dim(2);
  Tensor out(is_mask ? std::vector<long>{out_h, out_w} : std::vector<long>{out_h, out_w, c});
  for (long i = 0; i < out_h; ++i) {
    const long y = clampl(static_cast<long>((i + 0.5) * h / out_h), 0, h - 1);
    for (long j = 0; j < out_w; ++j) {
      const long x = clampl(static_cast<long>((j + 0.5) * w / out_w), 0, w - 1);
      for (long ch = 0; ch < c; ++ch) out[(i * out_w + j) * c + ch] = image[(y * w + x) * c + ch];
    }
  }
  return out;
}

Tensor flip_horizontal(const Tensor& image) {
  const bool is_mask = image.ndim() == 2;
  const long h = image.dim(0), w = image.dim(1), c = is_mask ? 1 : image.dim(2);
  Tensor out(image.shape());
  for (long i = 0; i < h; ++i)
    for (long j = 0; j < w; ++j)
      for (long ch = 0; ch < c; ++ch) out[(i * w + j) * c + ch] = image[(i * w + (w - 1 - j)) * c + ch];
  return out;
}

Tensor crop(const Tensor& image, long y0, long x0, long h, long w) {
  const bool is_mask = image.ndim() == 2;
  const long sw = image.dim(1), c = is_mask ? 1 : image.dim(2);
  Tensor out(is_mask ? std::vector<long>{h, w} : std::vector<long>{h, w, c});
  for (long i = 0; i < h; ++i)
    for (long j = 0; j < w; ++j)
      for (long ch = 0; ch < c; ++ch) out[(i * w + j) * c + ch] = image[((y0 + i) * sw + (x0 + j)) * c + ch];
  return out;
}

Tensor morph_close3(const Tensor& mask) {
  const long h = mask.dim(0), w = mask.dim(1);
  auto dilate = [&](const Tensor& m) {
    Tensor out({h, w});
    for (long i = 0; i < h; ++i)
      for (long j = 0; j < w; ++j) {
        double v = 0;
        for (long di = -1; di <= 1 && v == 0; ++di)
          for (long dj = -1; dj <= 1; ++dj) {
            const long y = i + di, x = j + dj;
            if (y >= 0 && y < h && x >= 0 && x < w && m[y * w + x] > 0.5) {
              v = 1;
              break;
            }
          }
        out[i * w + j] = v;
      }
    return out;
  };
  auto erode = [&](const Tensor& m) {
    Tensor out({h, w});
    for (long i = 0; i < h; ++i)
      for (long j = 0; j < w; ++j) {
        double v = 1;
        for (long di = -1; di <= 1 && v == 1; ++di)
          for (long dj = -1; dj <= 1; ++dj) {
            const long y = i + di, x = j + dj;
            if (y < 0 || y >= h || x < 0 || x >= w || m[y * w + x] < 0.5) {
              v = 0;
              break;
            }
          }
        out[i * w + j] = v;
      }
    return out;
  };
  return erode(dilate(mask));
}

Tensor abs_diff_map(const Tensor& a, const Tensor& b) {
  if (!a.same_shape(b)) throw Error(errc::ShapeMismatch, "abs_diff_map: shapes differ");
  const long h = a.dim(0), w = a.dim(1), c = a.dim(2);
  Tensor out({h, w});
  for (long i = 0; i < h * w; ++i) {
    double s = 0;
    for (long ch = 0; ch < c; ++ch) s += std::fabs(a[i * c + ch] - b[i * c + ch]);
    out[i] = s / static_cast<double>(c);
  }
  return out;
}

namespace {
// Orthonormal 4-point DCT-II basis.
const double kDct4[4][4] = {
    {0.5, 0.5, 0.5, 0.5},
    {0.6532814824381883, 0.2705980500730985, -0.2705980500730985, -0.6532814824381883},
    {0.5, -0.5, -0.5, 0.5},
    {0.2705980500730985, -0.6532814824381883, 0.6532814824381883, -0.2705980500730985},
};
}  // namespace

Tensor block_compress(const Tensor& image, double strength) {
  check_hwc(image, "block_compress");
  const long h = image.dim(0), w = image.dim(1), c = image.dim(2);
  Tensor out = image;
  const double q = 0.02 + 0.25 * strength;  // quantization step for AC coefficients
  for (long by = 0; by + 4 <= h; by += 4)
    for (long bx = 0; bx + 4 <= w; bx += 4)
      for (long ch = 0; ch < c; ++ch) {
        double blk[4][4], tmp[4][4], coef[4][4];
        for (int i = 0; i < 4; ++i)
          for (int j = 0; j < 4; ++j) blk[i][j] = image[((by + i) * w + (bx + j)) * c + ch];
        for (int i = 0; i < 4; ++i)
          for (int j = 0; j < 4; ++j) {
            double s = 0;
            for (int k = 0; k < 4; ++k) s += kDct4[i][k] * blk[k][j];
            tmp[i][j] = s;
          }
        for (int i = 0; i < 4; ++i)
          for (int j = 0; j < 4; ++j) {
            double s = 0;
            for (int k = 0; k < 4; ++k) s += tmp[i][k] * kDct4[j][k];
            coef[i][j] = s;
          }
        for (int i = 0; i < 4; ++i)
          for (int j = 0; j < 4; ++j)
            if (i + j > 0) coef[i][j] = std::round(coef[i][j] / q) * q;
        for (int i = 0; i < 4; ++i)
          for (int j = 0; j < 4; ++j) {
            double s = 0;
            for (int k = 0; k < 4; ++k) s += kDct4[k][i] * coef[k][j];
            tmp[i][j] = s;
          }
        for (int i = 0; i < 4; ++i)
          for (int j = 0; j < 4; ++j) {
            double s = 0;
            for (int k = 0; k < 4; ++k) s += tmp[i][k] * kDct4[k][j];
            out[((by + i) * w + (bx + j)) * c + ch] = std::min(1.0, std::max(0.0, s));
          }
      }
  return out;
}

Tensor laplacian_energy(const Tensor& image) {
  check_hwc(image, "laplacian_energy");
  const long h = image.dim(0), w = image.dim(1), c = image.dim(2);
  Tensor luma({h, w});
  for (long i = 0; i < h * w; ++i) {
    double s = 0;
    for (long ch = 0; ch < c; ++ch) s += image[i * c + ch];
    luma[i] = s / static_cast<double>(c);
  }
  Tensor out({h, w});
  for (long i = 0; i < h; ++i)
    for (long j = 0; j < w; ++j) {
      const double center = luma[i * w + j];
      double acc = 0;
      const long up = std::max(0L, i - 1), dn = std::min(h - 1, i + 1);
      const long lf = std::max(0L, j - 1), rt = std::min(w - 1, j + 1);
      acc += luma[up * w + j] + luma[dn * w + j] + luma[i * w + lf] + luma[i * w + rt] - 4.0 * center;
      out[i * w + j] = std::fabs(acc);
    }
  return out;
}

void write_pgm(const std::string& path, const Tensor& gray) {
  const long h = gray.dim(0), w = gray.dim(1);
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error(errc::IoError, "cannot open " + path);
  f << "P5\n" << w << " " << h << "\n255\n";
  for (long i = 0; i < h * w; ++i) {
    const double v = std::min(1.0, std::max(0.0, gray[i]));
    f.put(static_cast<char>(static_cast<unsigned char>(std::lround(v * 255.0))));
  }
}

void write_ppm(const std::string& path, const Tensor& rgb) {
  const long h = rgb.dim(0), w = rgb.dim(1);
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error(errc::IoError, "cannot open " + path);
  f << "P6\n" << w << " " << h << "\n255\n";
  for (long i = 0; i < h * w * 3; ++i) {
    const double v = std::min(1.0, std::max(0.0, rgb[i]));
    f.put(static_cast<char>(static_cast<unsigned char>(std::lround(v * 255.0))));
  }
}

}  // namespace omnifd::img
