#include "omnifd/core/ops.hpp"

#include <cmath>

namespace omnifd::ops {

using detail::accumulate;
using detail::make_node;

namespace {

void check_same_shape(const Value& a, const Value& b, const char* what) {
  if (!a.val().same_shape(b.val())) throw Error(errc::ShapeMismatch, std::string(what) + ": shape mismatch");
}

constexpr double kInvSqrt2 = 0.7071067811865475;
constexpr double kInvSqrt2Pi = 0.3989422804014327;

double stable_softplus(double x) { return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }
double stable_sigmoid(double x) {
  if (x >= 0) {
    const double e = std::exp(-x);
    return 1.0 / (1.0 + e);
  }
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

Value constant(Tensor t) { return Value::leaf(std::move(t), false); }

Value add(const Value& a, const Value& b) {
  check_same_shape(a, b, "add");
  Tensor out = a.val();
  out.add_(b.val());
  return Value(make_node(std::move(out), {a.ptr(), b.ptr()}, [](Node& n, GradMap& sink) {
    accumulate(*n.parents[0], sink, n.grad);
    accumulate(*n.parents[1], sink, n.grad);
  }));
}

Value sub(const Value& a, const Value& b) {
  check_same_shape(a, b, "sub");
  Tensor out = a.val();
  const double* bd = b.val().data();
  for (long i = 0; i < out.numel(); ++i) out[i] -= bd[i];
  return Value(make_node(std::move(out), {a.ptr(), b.ptr()}, [](Node& n, GradMap& sink) {
    accumulate(*n.parents[0], sink, n.grad);
    Tensor neg = n.grad;
    neg.scale_(-1.0);
    accumulate(*n.parents[1], sink, neg);
  }));
}

Value mul(const Value& a, const Value& b) {
  check_same_shape(a, b, "mul");
  Tensor out = a.val();
  const double* bd = b.val().data();
  for (long i = 0; i < out.numel(); ++i) out[i] *= bd[i];
  return Value(make_node(std::move(out), {a.ptr(), b.ptr()}, [](Node& n, GradMap& sink) {
    Tensor da = n.grad;
    const double* bv = n.parents[1]->val.data();
    for (long i = 0; i < da.numel(); ++i) da[i] *= bv[i];
    accumulate(*n.parents[0], sink, da);
    Tensor db = n.grad;
    const double* av = n.parents[0]->val.data();
    for (long i = 0; i < db.numel(); ++i) db[i] *= av[i];
    accumulate(*n.parents[1], sink, db);
  }));
}

Value add_scalar(const Value& a, double s) {
  Tensor out = a.val();
  for (long i = 0; i < out.numel(); ++i) out[i] += s;
  return Value(make_node(std::move(out), {a.ptr()},
                         [](Node& n, GradMap& sink) { accumulate(*n.parents[0], sink, n.grad); }));
}

Value mul_scalar(const Value& a, double s) {
  Tensor out = a.val();
  out.scale_(s);
  return Value(make_node(std::move(out), {a.ptr()}, [s](Node& n, GradMap& sink) {
    Tensor g = n.grad;
    g.scale_(s);
    accumulate(*n.parents[0], sink, g);
  }));
}

Value add_rowvec(const Value& a, const Value& bias) {
  const long m = a.rows(), c = a.cols();
  if (bias.val().numel() != c) throw Error(errc::ShapeMismatch, "add_rowvec: bias width mismatch");
  Tensor out = a.val();
  const double* bd = bias.val().data();
  for (long r = 0; r < m; ++r)
    for (long j = 0; j < c; ++j) out[r * c + j] += bd[j];
  return Value(make_node(std::move(out), {a.ptr(), bias.ptr()}, [m, c](Node& n, GradMap& sink) {
    accumulate(*n.parents[0], sink, n.grad);
    Tensor db(n.parents[1]->val.shape());
    for (long r = 0; r < m; ++r)
      for (long j = 0; j < c; ++j) db[j] += n.grad[r * c + j];
    accumulate(*n.parents[1], sink, db);
  }));
}

Value matmul(const Value& a, const Value& b) {
  Tensor out({a.rows(), b.cols()});
  gemm(a.val(), false, b.val(), false, out);
  return Value(make_node(std::move(out), {a.ptr(), b.ptr()}, [](Node& n, GradMap& sink) {
    Node& a_ = *n.parents[0];
    Node& b_ = *n.parents[1];
    if (a_.needs_grad) {
      Tensor da({a_.val.rows(), a_.val.cols()});
      gemm(n.grad, false, b_.val, true, da);
      accumulate(a_, sink, da);
    }
    if (b_.needs_grad) {
      Tensor db({b_.val.rows(), b_.val.cols()});
      gemm(a_.val, true, n.grad, false, db);
      accumulate(b_, sink, db);
    }
  }));
}

Value matmul_nt(const Value& a, const Value& b) {
  Tensor out({a.rows(), b.rows()});
  gemm(a.val(), false, b.val(), true, out);
  return Value(make_node(std::move(out), {a.ptr(), b.ptr()}, [](Node& n, GradMap& sink) {
    Node& a_ = *n.parents[0];
    Node& b_ = *n.parents[1];
    if (a_.needs_grad) {
      Tensor da({a_.val.rows(), a_.val.cols()});
      gemm(n.grad, false, b_.val, false, da);
      accumulate(a_, sink, da);
    }
    if (b_.needs_grad) {
      Tensor db({b_.val.rows(), b_.val.cols()});
      gemm(n.grad, true, a_.val, false, db);
      accumulate(b_, sink, db);
    }
  }));
}

Value linear(const Value& x, const Value& w, const Value& bias) {
  if (x.cols() != w.rows()) throw Error(errc::WidthMismatch, "linear: input width mismatch");
  return add_rowvec(matmul(x, w), bias);
}

Value slice_rows(const Value& x, long r0, long r1) {
  const long c = x.cols();
  Tensor out({r1 - r0, c});
  const double* src = x.val().data() + r0 * c;
  for (long i = 0; i < out.numel(); ++i) out[i] = src[i];
  return Value(make_node(std::move(out), {x.ptr()}, [r0, r1, c](Node& n, GradMap& sink) {
    Tensor dx(n.parents[0]->val.shape());
    double* dst = dx.data() + r0 * c;
    const long cnt = (r1 - r0) * c;
    for (long i = 0; i < cnt; ++i) dst[i] = n.grad[i];
    accumulate(*n.parents[0], sink, dx);
  }));
}

Value slice_cols(const Value& x, long c0, long c1) {
  const long m = x.rows(), c = x.cols(), w = c1 - c0;
  Tensor out({m, w});
  for (long r = 0; r < m; ++r)
    for (long j = 0; j < w; ++j) out[r * w + j] = x.val()[r * c + c0 + j];
  return Value(make_node(std::move(out), {x.ptr()}, [m, c, c0, w](Node& n, GradMap& sink) {
    Tensor dx(n.parents[0]->val.shape());
    for (long r = 0; r < m; ++r)
      for (long j = 0; j < w; ++j) dx[r * c + c0 + j] = n.grad[r * w + j];
    accumulate(*n.parents[0], sink, dx);
  }));
}

Value concat_rows(const std::vector<Value>& parts) {
  if (parts.empty()) throw Error(errc::EmptyInput, "concat_rows: no parts");
  const long c = parts[0].cols();
  long m = 0;
  for (const auto& p : parts) {
    if (p.cols() != c) throw Error(errc::WidthMismatch, "concat_rows: width mismatch");
    m += p.rows();
  }
  Tensor out({m, c});
  std::vector<NodeP> parents;
  std::vector<long> offsets;
  long row = 0;
  for (const auto& p : parts) {
    offsets.push_back(row);
    const Tensor& v = p.val();
    double* dst = out.data() + row * c;
    for (long i = 0; i < v.numel(); ++i) dst[i] = v[i];
    row += p.rows();
    parents.push_back(p.ptr());
  }
  return Value(make_node(std::move(out), std::move(parents), [offsets, c](Node& n, GradMap& sink) {
    for (size_t k = 0; k < n.parents.size(); ++k) {
      Node& p = *n.parents[k];
      if (!p.needs_grad) continue;
      Tensor dp(p.val.shape());
      const double* src = n.grad.data() + offsets[k] * c;
      for (long i = 0; i < dp.numel(); ++i) dp[i] = src[i];
      accumulate(p, sink, dp);
    }
  }));
}

Value concat_cols(const std::vector<Value>& parts) {
  if (parts.empty()) throw Error(errc::EmptyInput, "concat_cols: no parts");
  const long m = parts[0].rows();
  long c = 0;
  for (const auto& p : parts) {
    if (p.rows() != m) throw Error(errc::ShapeMismatch, "concat_cols: row mismatch");
    c += p.cols();
  }
  Tensor out({m, c});
  std::vector<NodeP> parents;
  std::vector<long> offsets;
  long col = 0;
  for (const auto& p : parts) {
    offsets.push_back(col);
    const long w = p.cols();
    for (long r = 0; r < m; ++r)
      for (long j = 0; j < w; ++j) out[r * c + col + j] = p.val()[r * w + j];
    col += w;
    parents.push_back(p.ptr());
  }
  return Value(make_node(std::move(out), std::move(parents), [offsets, m, c](Node& n, GradMap& sink) {
    for (size_t k = 0; k < n.parents.size(); ++k) {
      Node& p = *n.parents[k];
      if (!p.needs_grad) continue;
      const long w = p.val.cols();
      Tensor dp(p.val.shape());
      for (long r = 0; r < m; ++r)
        for (long j = 0; j < w; ++j) dp[r * w + j] = n.grad[r * c + offsets[k] + j];
      accumulate(p, sink, dp);
    }
  }));
}

Value gather_rows(const Value& x, std::vector<long> idx) {
  const long c = x.cols();
  Tensor out({static_cast<long>(idx.size()), c});
  for (size_t i = 0; i < idx.size(); ++i) {
    const double* src = x.val().data() + idx[i] * c;
    double* dst = out.data() + static_cast<long>(i) * c;
    for (long j = 0; j < c; ++j) dst[j] = src[j];
  }
  return Value(make_node(std::move(out), {x.ptr()}, [idx = std::move(idx), c](Node& n, GradMap& sink) {
    Tensor dx(n.parents[0]->val.shape());
    for (size_t i = 0; i < idx.size(); ++i) {
      double* dst = dx.data() + idx[i] * c;
      const double* src = n.grad.data() + static_cast<long>(i) * c;
      for (long j = 0; j < c; ++j) dst[j] += src[j];
    }
    accumulate(*n.parents[0], sink, dx);
  }));
}

Value add_gathered(const Value& x, const Value& table, std::vector<long> idx) {
  const long c = x.cols();
  if (table.cols() != c) throw Error(errc::WidthMismatch, "add_gathered: width mismatch");
  if (static_cast<long>(idx.size()) != x.rows()) throw Error(errc::ShapeMismatch, "add_gathered: index count");
  Tensor out = x.val();
  for (size_t i = 0; i < idx.size(); ++i) {
    const double* src = table.val().data() + idx[i] * c;
    double* dst = out.data() + static_cast<long>(i) * c;
    for (long j = 0; j < c; ++j) dst[j] += src[j];
  }
  return Value(make_node(std::move(out), {x.ptr(), table.ptr()}, [idx = std::move(idx), c](Node& n, GradMap& sink) {
    accumulate(*n.parents[0], sink, n.grad);
    Node& tab = *n.parents[1];
    if (!tab.needs_grad) return;
    Tensor dt(tab.val.shape());
    for (size_t i = 0; i < idx.size(); ++i) {
      double* dst = dt.data() + idx[i] * c;
      const double* src = n.grad.data() + static_cast<long>(i) * c;
      for (long j = 0; j < c; ++j) dst[j] += src[j];
    }
    accumulate(tab, sink, dt);
  }));
}

Value reshape(const Value& x, std::vector<long> shape) {
  Tensor out = x.val().reshape(shape);
  return Value(make_node(std::move(out), {x.ptr()}, [](Node& n, GradMap& sink) {
    accumulate(*n.parents[0], sink, n.grad.reshape(n.parents[0]->val.shape()));
  }));
}

Value softmax_rows(const Value& x) {
  const long m = x.rows(), c = x.cols();
  Tensor out = x.val();
  for (long r = 0; r < m; ++r) {
    double* row = out.data() + r * c;
    double mx = row[0];
    for (long j = 1; j < c; ++j) mx = std::max(mx, row[j]);
    double sum = 0;
    for (long j = 0; j < c; ++j) {
      row[j] = std::exp(row[j] - mx);
      sum += row[j];
    }
    for (long j = 0; j < c; ++j) row[j] /= sum;
  }
  Tensor probs = out;
  return Value(make_node(std::move(out), {x.ptr()}, [probs = std::move(probs), m, c](Node& n, GradMap& sink) {
    Tensor dx({m, c});
    for (long r = 0; r < m; ++r) {
      const double* p = probs.data() + r * c;
      const double* dy = n.grad.data() + r * c;
      double dot = 0;
      for (long j = 0; j < c; ++j) dot += p[j] * dy[j];
      double* out_r = dx.data() + r * c;
      for (long j = 0; j < c; ++j) out_r[j] = p[j] * (dy[j] - dot);
    }
    accumulate(*n.parents[0], sink, dx);
  }));
}

Value layer_norm(const Value& x, const Value& gamma, const Value& beta, double eps) {
  const long m = x.rows(), c = x.cols();
  if (gamma.val().numel() != c || beta.val().numel() != c)
    throw Error(errc::ShapeMismatch, "layer_norm: affine width mismatch");
  Tensor out({m, c});
  Tensor xhat({m, c});
  Tensor inv_std({m, 1});
  const double* g = gamma.val().data();
  const double* b = beta.val().data();
  for (long r = 0; r < m; ++r) {
    const double* row = x.val().data() + r * c;
    double mean = 0;
    for (long j = 0; j < c; ++j) mean += row[j];
    mean /= static_cast<double>(c);
    double var = 0;
    for (long j = 0; j < c; ++j) {
      const double d = row[j] - mean;
      var += d * d;
    }
    var /= static_cast<double>(c);
    const double istd = 1.0 / std::sqrt(var + eps);
    inv_std[r] = istd;
    for (long j = 0; j < c; ++j) {
      const double xh = (row[j] - mean) * istd;
      xhat[r * c + j] = xh;
      out[r * c + j] = g[j] * xh + b[j];
    }
  }
  return Value(make_node(
      std::move(out), {x.ptr(), gamma.ptr(), beta.ptr()},
      [xhat = std::move(xhat), inv_std = std::move(inv_std), m, c](Node& n, GradMap& sink) {
        Node& x_ = *n.parents[0];
        Node& g_ = *n.parents[1];
        Node& b_ = *n.parents[2];
        const double* g = g_.val.data();
        if (x_.needs_grad) {
          Tensor dx({m, c});
          for (long r = 0; r < m; ++r) {
            const double* dy = n.grad.data() + r * c;
            const double* xh = xhat.data() + r * c;
            double mean_gdy = 0, mean_gdyxh = 0;
            for (long j = 0; j < c; ++j) {
              const double gd = g[j] * dy[j];
              mean_gdy += gd;
              mean_gdyxh += gd * xh[j];
            }
            mean_gdy /= static_cast<double>(c);
            mean_gdyxh /= static_cast<double>(c);
            double* dst = dx.data() + r * c;
            for (long j = 0; j < c; ++j) dst[j] = (g[j] * dy[j] - mean_gdy - xh[j] * mean_gdyxh) * inv_std[r];
          }
          accumulate(x_, sink, dx);
        }
        if (g_.needs_grad) {
          Tensor dg(g_.val.shape());
          for (long r = 0; r < m; ++r)
            for (long j = 0; j < c; ++j) dg[j] += n.grad[r * c + j] * xhat[r * c + j];
          accumulate(g_, sink, dg);
        }
        if (b_.needs_grad) {
          Tensor db(b_.val.shape());
          for (long r = 0; r < m; ++r)
            for (long j = 0; j < c; ++j) db[j] += n.grad[r * c + j];
          accumulate(b_, sink, db);
        }
      }));
}

Value gelu(const Value& x) {
  Tensor out = x.val();
  for (long i = 0; i < out.numel(); ++i) {
    const double v = out[i];
    out[i] = 0.5 * v * (1.0 + std::erf(v * kInvSqrt2));
  }
  return Value(make_node(std::move(out), {x.ptr()}, [](Node& n, GradMap& sink) {
    const Tensor& xv = n.parents[0]->val;
    Tensor dx = n.grad;
    for (long i = 0; i < dx.numel(); ++i) {
      const double v = xv[i];
      const double cdf = 0.5 * (1.0 + std::erf(v * kInvSqrt2));
      const double pdf = kInvSqrt2Pi * std::exp(-0.5 * v * v);
      dx[i] *= cdf + v * pdf;
    }
    accumulate(*n.parents[0], sink, dx);
  }));
}

Value sigmoid(const Value& x) {
  Tensor out = x.val();
  for (long i = 0; i < out.numel(); ++i) out[i] = stable_sigmoid(out[i]);
  Tensor saved = out;
  return Value(make_node(std::move(out), {x.ptr()}, [saved = std::move(saved)](Node& n, GradMap& sink) {
    Tensor dx = n.grad;
    for (long i = 0; i < dx.numel(); ++i) dx[i] *= saved[i] * (1.0 - saved[i]);
    accumulate(*n.parents[0], sink, dx);
  }));
}

Value softplus(const Value& x) {
  Tensor out = x.val();
  for (long i = 0; i < out.numel(); ++i) out[i] = stable_softplus(out[i]);
  return Value(make_node(std::move(out), {x.ptr()}, [](Node& n, GradMap& sink) {
    const Tensor& xv = n.parents[0]->val;
    Tensor dx = n.grad;
    for (long i = 0; i < dx.numel(); ++i) dx[i] *= stable_sigmoid(xv[i]);
    accumulate(*n.parents[0], sink, dx);
  }));
}

Value mean_rows(const Value& x) {
  const long m = x.rows(), c = x.cols();
  Tensor out({1, c});
  for (long r = 0; r < m; ++r)
    for (long j = 0; j < c; ++j) out[j] += x.val()[r * c + j];
  out.scale_(1.0 / static_cast<double>(m));
  return Value(make_node(std::move(out), {x.ptr()}, [m, c](Node& n, GradMap& sink) {
    Tensor dx({m, c});
    const double inv = 1.0 / static_cast<double>(m);
    for (long r = 0; r < m; ++r)
      for (long j = 0; j < c; ++j) dx[r * c + j] = n.grad[j] * inv;
    accumulate(*n.parents[0], sink, dx);
  }));
}

Value mean_all(const Value& x) {
  const long n_el = x.val().numel();
  Tensor out({1, 1});
  out[0] = x.val().sum() / static_cast<double>(n_el);
  return Value(make_node(std::move(out), {x.ptr()}, [n_el](Node& n, GradMap& sink) {
    Tensor dx(n.parents[0]->val.shape());
    const double g = n.grad[0] / static_cast<double>(n_el);
    dx.fill(g);
    accumulate(*n.parents[0], sink, dx);
  }));
}

Value sum_all(const Value& x) {
  Tensor out({1, 1});
  out[0] = x.val().sum();
  return Value(make_node(std::move(out), {x.ptr()}, [](Node& n, GradMap& sink) {
    Tensor dx(n.parents[0]->val.shape());
    dx.fill(n.grad[0]);
    accumulate(*n.parents[0], sink, dx);
  }));
}

Value group_mean_rows(const Value& x, long group) {
  const long m = x.rows(), c = x.cols();
  if (group <= 0 || m % group != 0) throw Error(errc::ShapeMismatch, "group_mean_rows: group does not divide rows");
  const long g_cnt = m / group;
  Tensor out({g_cnt, c});
  for (long gi = 0; gi < g_cnt; ++gi)
    for (long r = 0; r < group; ++r)
      for (long j = 0; j < c; ++j) out[gi * c + j] += x.val()[(gi * group + r) * c + j];
  out.scale_(1.0 / static_cast<double>(group));
  return Value(make_node(std::move(out), {x.ptr()}, [g_cnt, group, c](Node& n, GradMap& sink) {
    Tensor dx({g_cnt * group, c});
    const double inv = 1.0 / static_cast<double>(group);
    for (long gi = 0; gi < g_cnt; ++gi)
      for (long r = 0; r < group; ++r)
        for (long j = 0; j < c; ++j) dx[(gi * group + r) * c + j] = n.grad[gi * c + j] * inv;
    accumulate(*n.parents[0], sink, dx);
  }));
}

Value conv1d_k3(const Value& x, const Value& w, const Value& bias) {
  const long t_len = x.rows(), in_ch = x.cols();
  const auto& ws = w.val().shape();
  if (ws.size() != 3 || ws[1] != in_ch || ws[2] != 3) throw Error(errc::ShapeMismatch, "conv1d_k3: bad kernel shape");
  const long out_ch = ws[0];
  if (bias.val().numel() != out_ch) throw Error(errc::ShapeMismatch, "conv1d_k3: bias mismatch");
  Tensor out({t_len, out_ch});
  const double* xv = x.val().data();
  const double* wv = w.val().data();
  const double* bv = bias.val().data();
  for (long t = 0; t < t_len; ++t)
    for (long o = 0; o < out_ch; ++o) {
      double acc = bv[o];
      for (long k = 0; k < 3; ++k) {
        const long src = t + k - 1;
        if (src < 0 || src >= t_len) continue;
        const double* xr = xv + src * in_ch;
        const double* wr = wv + (o * in_ch) * 3 + k;
        for (long i = 0; i < in_ch; ++i) acc += xr[i] * wr[i * 3];
      }
      out[t * out_ch + o] = acc;
    }
  return Value(make_node(std::move(out), {x.ptr(), w.ptr(), bias.ptr()},
                         [t_len, in_ch, out_ch](Node& n, GradMap& sink) {
                           Node& x_ = *n.parents[0];
                           Node& w_ = *n.parents[1];
                           Node& b_ = *n.parents[2];
                           const double* dy = n.grad.data();
                           if (x_.needs_grad) {
                             Tensor dx({t_len, in_ch});
                             const double* wv = w_.val.data();
                             for (long t = 0; t < t_len; ++t)
                               for (long o = 0; o < out_ch; ++o) {
                                 const double g = dy[t * out_ch + o];
                                 for (long k = 0; k < 3; ++k) {
                                   const long src = t + k - 1;
                                   if (src < 0 || src >= t_len) continue;
                                   double* dxr = dx.data() + src * in_ch;
                                   const double* wr = wv + (o * in_ch) * 3 + k;
                                   for (long i = 0; i < in_ch; ++i) dxr[i] += g * wr[i * 3];
                                 }
                               }
                             accumulate(x_, sink, dx);
                           }
                           if (w_.needs_grad) {
                             Tensor dw(w_.val.shape());
                             const double* xv = x_.val.data();
                             for (long t = 0; t < t_len; ++t)
                               for (long o = 0; o < out_ch; ++o) {
                                 const double g = dy[t * out_ch + o];
                                 for (long k = 0; k < 3; ++k) {
                                   const long src = t + k - 1;
                                   if (src < 0 || src >= t_len) continue;
                                   const double* xr = xv + src * in_ch;
                                   double* dwr = dw.data() + (o * in_ch) * 3 + k;
                                   for (long i = 0; i < in_ch; ++i) dwr[i * 3] += g * xr[i];
                                 }
                               }
                             accumulate(w_, sink, dw);
                           }
                           if (b_.needs_grad) {
                             Tensor db(b_.val.shape());
                             for (long t = 0; t < t_len; ++t)
                               for (long o = 0; o < out_ch; ++o) db[o] += dy[t * out_ch + o];
                             accumulate(b_, sink, db);
                           }
                         }));
}

namespace {
struct AxisInterp {
  std::vector<long> lo, hi;
  std::vector<double> frac;  // weight of hi
};

AxisInterp make_axis_interp(long src, long dst) {
  AxisInterp a;
  a.lo.resize(dst);
  a.hi.resize(dst);
  a.frac.resize(dst);
  const double scale = static_cast<double>(src) / static_cast<double>(dst);
  for (long i = 0; i < dst; ++i) {
    double pos = (static_cast<double>(i) + 0.5) * scale - 0.5;
    if (pos < 0) pos = 0;
    if (pos > static_cast<double>(src - 1)) pos = static_cast<double>(src - 1);
    const long lo = static_cast<long>(std::floor(pos));
    a.lo[i] = lo;
    a.hi[i] = std::min(lo + 1, src - 1);
    a.frac[i] = pos - static_cast<double>(lo);
  }
  return a;
}
}  // namespace

Value bilinear_resize(const Value& x, long h, long w, long h2, long w2) {
  const long c = x.cols();
  if (x.rows() != h * w) throw Error(errc::ShapeMismatch, "bilinear_resize: grid rows mismatch");
  AxisInterp ay = make_axis_interp(h, h2);
  AxisInterp ax = make_axis_interp(w, w2);
  Tensor out({h2 * w2, c});
  const double* src = x.val().data();
  for (long i = 0; i < h2; ++i)
    for (long j = 0; j < w2; ++j) {
      const double fy = ay.frac[i], fx = ax.frac[j];
      const long r00 = (ay.lo[i] * w + ax.lo[j]) * c;
      const long r01 = (ay.lo[i] * w + ax.hi[j]) * c;
      const long r10 = (ay.hi[i] * w + ax.lo[j]) * c;
      const long r11 = (ay.hi[i] * w + ax.hi[j]) * c;
      double* dst = out.data() + (i * w2 + j) * c;
      for (long ch = 0; ch < c; ++ch)
        dst[ch] = (1 - fy) * ((1 - fx) * src[r00 + ch] + fx * src[r01 + ch]) +
                  fy * ((1 - fx) * src[r10 + ch] + fx * src[r11 + ch]);
    }
  return Value(make_node(std::move(out), {x.ptr()},
                         [ay = std::move(ay), ax = std::move(ax), h, w, h2, w2, c](Node& n, GradMap& sink) {
                           Tensor dx({h * w, c});
                           const double* dy = n.grad.data();
                           for (long i = 0; i < h2; ++i)
                             for (long j = 0; j < w2; ++j) {
                               const double fy = ay.frac[i], fx = ax.frac[j];
                               const long r00 = (ay.lo[i] * w + ax.lo[j]) * c;
                               const long r01 = (ay.lo[i] * w + ax.hi[j]) * c;
                               const long r10 = (ay.hi[i] * w + ax.lo[j]) * c;
                               const long r11 = (ay.hi[i] * w + ax.hi[j]) * c;
                               const double* g = dy + (i * w2 + j) * c;
                               for (long ch = 0; ch < c; ++ch) {
                                 dx[r00 + ch] += (1 - fy) * (1 - fx) * g[ch];
                                 dx[r01 + ch] += (1 - fy) * fx * g[ch];
                                 dx[r10 + ch] += fy * (1 - fx) * g[ch];
                                 dx[r11 + ch] += fy * fx * g[ch];
                               }
                             }
                           accumulate(*n.parents[0], sink, dx);
                         }));
}

namespace {

// Shared attention kernel over equal-size blocks. q rows and kv rows are
// partitioned into nb consecutive blocks; block i of q attends to block i
// of k/v. nb == 1 recovers full cross-attention.
Value block_attention(const Value& q, const Value& k, const Value& v, long nb, double scale, Tensor* probs_out) {
  const long mq = q.rows(), mk = k.rows(), d = q.cols();
  if (k.cols() != d || v.cols() != d) throw Error(errc::WidthMismatch, "attention: head width mismatch");
  if (mq % nb != 0 || mk % nb != 0) throw Error(errc::ShapeMismatch, "attention: rows not divisible into blocks");
  if (k.rows() != v.rows()) throw Error(errc::ShapeMismatch, "attention: k/v row mismatch");
  const long bq = mq / nb, bk = mk / nb;

  Tensor probs({mq, bk});
  Tensor out({mq, d});
  for (long blk = 0; blk < nb; ++blk) {
    Tensor qb({bq, d}), kb({bk, d});
    // cheap row-window views via copies; block sizes are small
    for (long i = 0; i < bq * d; ++i) qb[i] = q.val()[blk * bq * d + i];
    for (long i = 0; i < bk * d; ++i) kb[i] = k.val()[blk * bk * d + i];
    Tensor s({bq, bk});
    gemm(qb, false, kb, true, s);
    s.scale_(scale);
    for (long r = 0; r < bq; ++r) {
      double* row = s.data() + r * bk;
      double mx = row[0];
      for (long j = 1; j < bk; ++j) mx = std::max(mx, row[j]);
      double sum = 0;
      for (long j = 0; j < bk; ++j) {
        row[j] = std::exp(row[j] - mx);
        sum += row[j];
      }
      for (long j = 0; j < bk; ++j) row[j] /= sum;
    }
    for (long i = 0; i < bq * bk; ++i) probs[(blk * bq) * bk + i] = s[i];
    Tensor vb({bk, d});
    for (long i = 0; i < bk * d; ++i) vb[i] = v.val()[blk * bk * d + i];
    Tensor ob({bq, d});
    gemm(s, false, vb, false, ob);
    for (long i = 0; i < bq * d; ++i) out[blk * bq * d + i] = ob[i];
  }
  if (probs_out) *probs_out = probs;

  return Value(make_node(
      std::move(out), {q.ptr(), k.ptr(), v.ptr()},
      [probs = std::move(probs), nb, bq, bk, d, scale](Node& n, GradMap& sink) {
        Node& q_ = *n.parents[0];
        Node& k_ = *n.parents[1];
        Node& v_ = *n.parents[2];
        Tensor dq({nb * bq, d}), dk({nb * bk, d}), dv({nb * bk, d});
        for (long blk = 0; blk < nb; ++blk) {
          Tensor p({bq, bk});
          for (long i = 0; i < bq * bk; ++i) p[i] = probs[(blk * bq) * bk + i];
          Tensor dout({bq, d});
          for (long i = 0; i < bq * d; ++i) dout[i] = n.grad[blk * bq * d + i];
          Tensor vb({bk, d}), kb({bk, d}), qb({bq, d});
          for (long i = 0; i < bk * d; ++i) vb[i] = v_.val[blk * bk * d + i];
          for (long i = 0; i < bk * d; ++i) kb[i] = k_.val[blk * bk * d + i];
          for (long i = 0; i < bq * d; ++i) qb[i] = q_.val[blk * bq * d + i];
          // dV = P^T dOut
          Tensor dvb({bk, d});
          gemm(p, true, dout, false, dvb);
          // dP = dOut V^T ; dS = P o (dP - rowsum(dP o P))
          Tensor dp({bq, bk});
          gemm(dout, false, vb, true, dp);
          for (long r = 0; r < bq; ++r) {
            double dot = 0;
            for (long j = 0; j < bk; ++j) dot += dp[r * bk + j] * p[r * bk + j];
            // dS = P o (dP - rowsum) times the score scale
            for (long j = 0; j < bk; ++j) dp[r * bk + j] = scale * p[r * bk + j] * (dp[r * bk + j] - dot);
          }
          Tensor dqb({bq, d}), dkb({bk, d});
          gemm(dp, false, kb, false, dqb);
          gemm(dp, true, qb, false, dkb);
          for (long i = 0; i < bq * d; ++i) dq[blk * bq * d + i] = dqb[i];
          for (long i = 0; i < bk * d; ++i) dk[blk * bk * d + i] = dkb[i];
          for (long i = 0; i < bk * d; ++i) dv[blk * bk * d + i] = dvb[i];
        }
        if (q_.needs_grad) accumulate(q_, sink, dq);
        if (k_.needs_grad) accumulate(k_, sink, dk);
        if (v_.needs_grad) accumulate(v_, sink, dv);
      }));
}

}  // namespace

Value attention(const Value& q, const Value& k, const Value& v, double scale, Tensor* probs_out) {
  return block_attention(q, k, v, 1, scale, probs_out);
}

Value window_attention(const Value& q, const Value& k, const Value& v, long window, double scale, Tensor* probs_out) {
  if (q.rows() != k.rows()) throw Error(errc::ShapeMismatch, "window_attention: q/k rows differ");
  if (window <= 0 || q.rows() % window != 0)
    throw Error(errc::ShapeMismatch, "window_attention: window does not divide rows");
  return block_attention(q, k, v, q.rows() / window, scale, probs_out);
}

Value bce_with_logits(const Value& z, const Tensor& targets) {
  if (!z.val().same_shape(targets)) throw Error(errc::ShapeMismatch, "bce_with_logits: target shape mismatch");
  Tensor out = z.val();
  const double* tv = targets.data();
  for (long i = 0; i < out.numel(); ++i) {
    const double zi = z.val()[i];
    out[i] = std::max(zi, 0.0) - zi * tv[i] + std::log1p(std::exp(-std::fabs(zi)));
  }
  Tensor tgt = targets;
  return Value(make_node(std::move(out), {z.ptr()}, [tgt = std::move(tgt)](Node& n, GradMap& sink) {
    const Tensor& zv = n.parents[0]->val;
    Tensor dz = n.grad;
    for (long i = 0; i < dz.numel(); ++i) dz[i] *= stable_sigmoid(zv[i]) - tgt[i];
    accumulate(*n.parents[0], sink, dz);
  }));
}

Value focal_bce_logits(const Value& z, const Tensor& targets, double alpha, double gamma) {
  if (!z.val().same_shape(targets)) throw Error(errc::ShapeMismatch, "focal_bce_logits: target shape mismatch");
  Tensor out = z.val();
  const double* tv = targets.data();
  // With s = z for positives and -z for negatives: loss = a_t sig(-s)^g softplus(-s).
  for (long i = 0; i < out.numel(); ++i) {
    const double s = (tv[i] > 0.5) ? z.val()[i] : -z.val()[i];
    const double at = (tv[i] > 0.5) ? alpha : 1.0 - alpha;
    out[i] = at * std::pow(stable_sigmoid(-s), gamma) * stable_softplus(-s);
  }
  Tensor tgt = targets;
  return Value(make_node(std::move(out), {z.ptr()}, [tgt = std::move(tgt), alpha, gamma](Node& n, GradMap& sink) {
    const Tensor& zv = n.parents[0]->val;
    Tensor dz = n.grad;
    for (long i = 0; i < dz.numel(); ++i) {
      const double y = tgt[i];
      const double s = (y > 0.5) ? zv[i] : -zv[i];
      const double at = (y > 0.5) ? alpha : 1.0 - alpha;
      const double u = stable_sigmoid(-s);
      const double sp = stable_softplus(-s);
      const double dls = -at * std::pow(u, gamma) * (gamma * stable_sigmoid(s) * sp + u);
      dz[i] *= (y > 0.5) ? dls : -dls;
    }
    accumulate(*n.parents[0], sink, dz);
  }));
}

Value diou_1d(const Value& s_reg, const std::vector<long>& positions,
              const std::vector<std::pair<double, double>>& gt_intervals) {
  if (s_reg.cols() != 2) throw Error(errc::ShapeMismatch, "diou_1d: s_reg must be T x 2");
  if (positions.size() != gt_intervals.size()) throw Error(errc::ShapeMismatch, "diou_1d: positions/gts mismatch");
  const long p_cnt = static_cast<long>(positions.size());
  Tensor out({p_cnt, 1});
  for (long i = 0; i < p_cnt; ++i) {
    const long t = positions[i];
    const double s0 = s_reg.val()[t * 2 + 0];
    const double s1 = s_reg.val()[t * 2 + 1];
    const double cs = static_cast<double>(t) - s0;
    const double ce = static_cast<double>(t) + 1.0 + s1;
    const auto [a, b] = gt_intervals[i];
    const double inter = std::max(0.0, std::min(ce, b) - std::max(cs, a));
    const double uni = (ce - cs) + (b - a) - inter;
    const double tiou = inter / uni;
    const double dc = 0.5 * (cs + ce) - 0.5 * (a + b);
    const double span = std::max(ce, b) - std::min(cs, a);
    out[i] = 1.0 - tiou + (dc * dc) / (span * span);
  }
  return Value(make_node(
      std::move(out), {s_reg.ptr()},
      [positions, gt_intervals, p_cnt](Node& n, GradMap& sink) {
        Tensor dreg(n.parents[0]->val.shape());
        const Tensor& reg = n.parents[0]->val;
        for (long i = 0; i < p_cnt; ++i) {
          const long t = positions[i];
          const double s0 = reg[t * 2 + 0];
          const double s1 = reg[t * 2 + 1];
          const double cs = static_cast<double>(t) - s0;
          const double ce = static_cast<double>(t) + 1.0 + s1;
          const auto [a, b] = gt_intervals[i];
          const double inter = std::max(0.0, std::min(ce, b) - std::max(cs, a));
          const double uni = (ce - cs) + (b - a) - inter;
          const double dc = 0.5 * (cs + ce) - 0.5 * (a + b);
          const double span = std::max(ce, b) - std::min(cs, a);
          // piecewise-smooth partials w.r.t. candidate start/end
          const double dinter_ds = (inter > 0 && cs > a) ? -1.0 : 0.0;
          const double dinter_de = (inter > 0 && ce < b) ? 1.0 : 0.0;
          const double duni_ds = -1.0 - dinter_ds;
          const double duni_de = 1.0 - dinter_de;
          const double dtiou_ds = (dinter_ds * uni - inter * duni_ds) / (uni * uni);
          const double dtiou_de = (dinter_de * uni - inter * duni_de) / (uni * uni);
          const double dspan_ds = (cs < a) ? -1.0 : 0.0;
          const double dspan_de = (ce > b) ? 1.0 : 0.0;
          const double dpen_ds = (2.0 * dc * 0.5) / (span * span) - 2.0 * dc * dc * dspan_ds / (span * span * span);
          const double dpen_de = (2.0 * dc * 0.5) / (span * span) - 2.0 * dc * dc * dspan_de / (span * span * span);
          const double dl_ds = -dtiou_ds + dpen_ds;
          const double dl_de = -dtiou_de + dpen_de;
          const double g = n.grad[i];
          dreg[t * 2 + 0] += g * (-dl_ds);  // ds/ds0 = -1
          dreg[t * 2 + 1] += g * dl_de;     // de/ds1 = +1
        }
        accumulate(*n.parents[0], sink, dreg);
      }));
}

}  // namespace omnifd::ops
