#pragma once

#include <vector>

#include "omnifd/core/graph.hpp"

namespace omnifd::ops {

// Leaf wrapper for plain data flowing into a graph.
Value constant(Tensor t);

// Elementwise binary ops (same shape).
Value add(const Value& a, const Value& b);
Value sub(const Value& a, const Value& b);
Value mul(const Value& a, const Value& b);

Value add_scalar(const Value& a, double s);
Value mul_scalar(const Value& a, double s);

// (M x C) + (1 x C) broadcast along rows.
Value add_rowvec(const Value& a, const Value& bias);

// 2-D matrix products; tensors are viewed as (rows x cols).
Value matmul(const Value& a, const Value& b);
Value matmul_nt(const Value& a, const Value& b);  // a * b^T

// x (M x in) * w (in x out) + bias (1 x out).
Value linear(const Value& x, const Value& w, const Value& bias);

Value slice_rows(const Value& x, long r0, long r1);
Value slice_cols(const Value& x, long c0, long c1);
Value concat_rows(const std::vector<Value>& parts);
Value concat_cols(const std::vector<Value>& parts);

// out.row[i] = x.row[idx[i]]; indices may repeat.
Value gather_rows(const Value& x, std::vector<long> idx);
// out.row[i] = x.row[i] + table.row[idx[i]] (positional / level embeddings).
Value add_gathered(const Value& x, const Value& table, std::vector<long> idx);

Value reshape(const Value& x, std::vector<long> shape);

Value softmax_rows(const Value& x);
Value layer_norm(const Value& x, const Value& gamma, const Value& beta, double eps = 1e-5);
Value gelu(const Value& x);
Value sigmoid(const Value& x);
Value softplus(const Value& x);

Value mean_rows(const Value& x);                      // (M x C) -> (1 x C)
Value mean_all(const Value& x);                       // -> (1 x 1)
Value sum_all(const Value& x);                        // -> (1 x 1)
Value group_mean_rows(const Value& x, long group);    // (G*g x C) -> (G x C)

// 1-D convolution over rows (time), kernel 3, zero padding 1.
// w has shape {out_ch, in_ch, 3}, bias {1, out_ch}.
Value conv1d_k3(const Value& x, const Value& w, const Value& bias);

// Treats x as an (h x w) grid with C channels (rows = h*w) and resizes to
// (h2 x w2) with bilinear interpolation, half-pixel centers, clamped edges.
Value bilinear_resize(const Value& x, long h, long w, long h2, long w2);

// Single-head scaled dot-product attention: softmax(scale * q k^T) v.
// If probs_out is non-null the softmax probabilities (values only) are
// copied there during the forward pass.
Value attention(const Value& q, const Value& k, const Value& v, double scale, Tensor* probs_out = nullptr);

// Block-diagonal self-attention: rows of q/k/v are grouped into consecutive
// windows of `window` rows; attention never crosses a window boundary.
Value window_attention(const Value& q, const Value& k, const Value& v, long window, double scale,
                       Tensor* probs_out = nullptr);

// Elementwise stabilized binary cross-entropy with logits. Targets are
// constants in {0,1} (same shape as z).
Value bce_with_logits(const Value& z, const Tensor& targets);

// Elementwise focal BCE with logits (alpha-balanced, exponent gamma).
Value focal_bce_logits(const Value& z, const Tensor& targets, double alpha, double gamma);

// 1-D distance-IoU loss between the decoded candidate interval at each
// listed position and its ground-truth interval, in feature-grid units.
// s_reg is (T x 2) nonnegative offsets; candidate(t) = [t - s0, t+1 + s1].
// Returns (P x 1) losses, one per entry of `positions`.
Value diou_1d(const Value& s_reg, const std::vector<long>& positions,
              const std::vector<std::pair<double, double>>& gt_intervals);

}  // namespace omnifd::ops
