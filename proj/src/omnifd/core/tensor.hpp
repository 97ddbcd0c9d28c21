#pragma once

#include <cstdint>
#include <initializer_list>
#include <vector>

#include "omnifd/core/error.hpp"

namespace omnifd {

// Dense row-major tensor of doubles. Owns its storage; copies are deep,
// moves are cheap. Most graph ops view tensors as (rows x cols) matrices;
// higher-rank shapes are bookkeeping on top of the same flat buffer.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<long> shape);
  Tensor(std::vector<long> shape, std::vector<double> data);

  static Tensor zeros(std::vector<long> shape) { return Tensor(std::move(shape)); }
  static Tensor full(std::vector<long> shape, double value);
  static Tensor scalar(double value) { return full({1, 1}, value); }

  long numel() const { return numel_; }
  int ndim() const { return static_cast<int>(shape_.size()); }
  long dim(int i) const { return shape_[static_cast<size_t>(i)]; }
  const std::vector<long>& shape() const { return shape_; }
  bool defined() const { return !shape_.empty(); }

  // Matrix view helpers: rows = product of all dims but the last.
  long rows() const { return shape_.empty() ? 0 : numel_ / shape_.back(); }
  long cols() const { return shape_.empty() ? 0 : shape_.back(); }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  std::vector<double>& vec() { return data_; }
  const std::vector<double>& vec() const { return data_; }

  double& operator[](long i) { return data_[static_cast<size_t>(i)]; }
  double operator[](long i) const { return data_[static_cast<size_t>(i)]; }

  Tensor reshape(std::vector<long> new_shape) const;
  void reshape_inplace(std::vector<long> new_shape);

  void fill(double v);
  void add_(const Tensor& other);  // elementwise +=
  void scale_(double s);

  double max_abs() const;
  double sum() const;
  bool all_finite() const;
  bool same_shape(const Tensor& o) const { return shape_ == o.shape_; }

 private:
  std::vector<long> shape_;
  std::vector<double> data_;
  long numel_ = 0;
};

long shape_numel(const std::vector<long>& shape);

// Raw GEMM helpers used by op forward/backward passes.
// c (m x n) = a (op) * b (op), with optional accumulate into c.
void gemm(const Tensor& a, bool trans_a, const Tensor& b, bool trans_b, Tensor& out,
          bool accumulate = false);

}  // namespace omnifd
