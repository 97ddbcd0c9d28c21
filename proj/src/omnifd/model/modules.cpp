#include "omnifd/model/modules.hpp"

#include <cmath>

namespace omnifd {

LinearLayer::LinearLayer(ParamStore& ps, Rng& rng, const std::string& prefix, long in, long out, double std) {
  w = ps.create(prefix + ".w", init::normal({in, out}, rng, std));
  b = ps.create(prefix + ".b", init::zeros({1, out}));
}

LayerNormModule::LayerNormModule(ParamStore& ps, const std::string& prefix, long dim) {
  gamma = ps.create(prefix + ".gamma", init::ones({1, dim}));
  beta = ps.create(prefix + ".beta", init::zeros({1, dim}));
}

MultiHeadAttention::MultiHeadAttention(ParamStore& ps, Rng& rng, const std::string& prefix, long dim_, long heads_)
    : wq(ps, rng, prefix + ".wq", dim_, dim_),
      wk(ps, rng, prefix + ".wk", dim_, dim_),
      wv(ps, rng, prefix + ".wv", dim_, dim_),
      wo(ps, rng, prefix + ".wo", dim_, dim_),
      heads(heads_),
      dim(dim_) {
  if (dim_ % heads_ != 0) throw Error(errc::BadConfig, "attention dim not divisible by heads");
}

Value MultiHeadAttention::forward(const Value& q_in, const Value& kv_in, Tensor* avg_probs) const {
  if (q_in.cols() != dim || kv_in.cols() != dim) throw Error(errc::WidthMismatch, "attention input width mismatch");
  const long hd = dim / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(hd));
  Value q = wq.forward(q_in);
  Value k = wk.forward(kv_in);
  Value v = wv.forward(kv_in);
  std::vector<Value> head_outs;
  head_outs.reserve(static_cast<size_t>(heads));
  Tensor acc_probs;
  for (long h = 0; h < heads; ++h) {
    Value qh = ops::slice_cols(q, h * hd, (h + 1) * hd);
    Value kh = ops::slice_cols(k, h * hd, (h + 1) * hd);
    Value vh = ops::slice_cols(v, h * hd, (h + 1) * hd);
    Tensor probs;
    head_outs.push_back(ops::attention(qh, kh, vh, scale, avg_probs ? &probs : nullptr));
    if (avg_probs) {
      if (!acc_probs.defined())
        acc_probs = probs;
      else
        acc_probs.add_(probs);
    }
  }
  if (avg_probs) {
    acc_probs.scale_(1.0 / static_cast<double>(heads));
    *avg_probs = std::move(acc_probs);
  }
  return wo.forward(ops::concat_cols(head_outs));
}

Value MultiHeadAttention::forward_windowed(const Value& x, long window) const {
  const long hd = dim / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(hd));
  Value q = wq.forward(x);
  Value k = wk.forward(x);
  Value v = wv.forward(x);
  std::vector<Value> head_outs;
  head_outs.reserve(static_cast<size_t>(heads));
  for (long h = 0; h < heads; ++h) {
    Value qh = ops::slice_cols(q, h * hd, (h + 1) * hd);
    Value kh = ops::slice_cols(k, h * hd, (h + 1) * hd);
    Value vh = ops::slice_cols(v, h * hd, (h + 1) * hd);
    head_outs.push_back(ops::window_attention(qh, kh, vh, window, scale));
  }
  return wo.forward(ops::concat_cols(head_outs));
}

FeedForward::FeedForward(ParamStore& ps, Rng& rng, const std::string& prefix, long dim, long hidden)
    : fc1(ps, rng, prefix + ".fc1", dim, hidden), fc2(ps, rng, prefix + ".fc2", hidden, dim) {}

PostNormBlock::PostNormBlock(ParamStore& ps, Rng& rng, const std::string& prefix, long dim, long heads,
                             long ffn_hidden)
    : attn(ps, rng, prefix + ".attn", dim, heads),
      ffn(ps, rng, prefix + ".ffn", dim, ffn_hidden),
      ln1(ps, prefix + ".ln1", dim),
      ln2(ps, prefix + ".ln2", dim) {}

Value PostNormBlock::forward(const Value& q, const Value& kv, Tensor* avg_probs) const {
  Value attended = ln1.forward(ops::add(q, attn.forward(q, kv, avg_probs)));
  return ln2.forward(ops::add(attended, ffn.forward(attended)));
}

}  // namespace omnifd
