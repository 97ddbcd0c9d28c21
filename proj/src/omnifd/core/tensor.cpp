#include "omnifd/core/tensor.hpp"

#include <Eigen/Dense>
#include <cmath>

namespace omnifd {

long shape_numel(const std::vector<long>& shape) {
  long n = 1;
  for (long d : shape) n *= d;
  return n;
}

Tensor::Tensor(std::vector<long> shape) : shape_(std::move(shape)) {
  numel_ = shape_numel(shape_);
  data_.assign(static_cast<size_t>(numel_), 0.0);
}

Tensor::Tensor(std::vector<long> shape, std::vector<double> data) : shape_(std::move(shape)), data_(std::move(data)) {
  numel_ = shape_numel(shape_);
  if (numel_ != static_cast<long>(data_.size()))
    throw Error(errc::ShapeMismatch, "tensor data size does not match shape");
}

Tensor Tensor::full(std::vector<long> shape, double value) {
  Tensor t(std::move(shape));
  t.fill(value);
  return t;
}

Tensor Tensor::reshape(std::vector<long> new_shape) const {
  Tensor t = *this;
  t.reshape_inplace(std::move(new_shape));
  return t;
}

void Tensor::reshape_inplace(std::vector<long> new_shape) {
  if (shape_numel(new_shape) != numel_)
    throw Error(errc::ShapeMismatch, "reshape changes element count");
  shape_ = std::move(new_shape);
}

void Tensor::fill(double v) {
  for (auto& x : data_) x = v;
}

void Tensor::add_(const Tensor& other) {
  if (!same_shape(other)) throw Error(errc::ShapeMismatch, "add_: shape mismatch");
  const double* src = other.data();
  double* dst = data();
  for (long i = 0; i < numel_; ++i) dst[i] += src[i];
}

void Tensor::scale_(double s) {
  for (auto& x : data_) x *= s;
}

double Tensor::max_abs() const {
  double m = 0.0;
  for (double x : data_) m = std::max(m, std::fabs(x));
  return m;
}

double Tensor::sum() const {
  double s = 0.0;
  for (double x : data_) s += x;
  return s;
}

bool Tensor::all_finite() const {
  for (double x : data_)
    if (!std::isfinite(x)) return false;
  return true;
}

using EMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using EMap = Eigen::Map<const EMat>;
using EMapMut = Eigen::Map<EMat>;

void gemm(const Tensor& a, bool trans_a, const Tensor& b, bool trans_b, Tensor& out, bool accumulate) {
  const long am = a.rows(), an = a.cols();
  const long bm = b.rows(), bn = b.cols();
  const long m = trans_a ? an : am;
  const long k = trans_a ? am : an;
  const long kb = trans_b ? bn : bm;
  const long n = trans_b ? bm : bn;
  if (k != kb) throw Error(errc::ShapeMismatch, "gemm: inner dimensions disagree");
  if (out.rows() != m || out.cols() != n) throw Error(errc::ShapeMismatch, "gemm: bad output shape");

  EMap A(a.data(), am, an);
  EMap B(b.data(), bm, bn);
  EMapMut C(out.data(), m, n);
  if (!trans_a && !trans_b) {
    if (accumulate)
      C.noalias() += A * B;
    else
      C.noalias() = A * B;
  } else if (trans_a && !trans_b) {
    if (accumulate)
      C.noalias() += A.transpose() * B;
    else
      C.noalias() = A.transpose() * B;
  } else if (!trans_a && trans_b) {
    if (accumulate)
      C.noalias() += A * B.transpose();
    else
      C.noalias() = A * B.transpose();
  } else {
    if (accumulate)
      C.noalias() += A.transpose() * B.transpose();
    else
      C.noalias() = A.transpose() * B.transpose();
  }
}

}  // namespace omnifd
