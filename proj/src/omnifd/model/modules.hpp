#pragma once

#include <string>

#include "omnifd/core/ops.hpp"
#include "omnifd/model/params.hpp"

namespace omnifd {

struct LinearLayer {
  Value w;  // (in x out)
  Value b;  // (1 x out)

  LinearLayer() = default;
  LinearLayer(ParamStore& ps, Rng& rng, const std::string& prefix, long in, long out, double std = 0.02);

  Value forward(const Value& x) const { return ops::linear(x, w, b); }
  long out_dim() const { return b.val().numel(); }
};

struct LayerNormModule {
  Value gamma, beta;

  LayerNormModule() = default;
  LayerNormModule(ParamStore& ps, const std::string& prefix, long dim);

  Value forward(const Value& x) const { return ops::layer_norm(x, gamma, beta); }
};

// Standard multi-head attention with per-head scaled dot product. When
// avg_probs is non-null, the head-averaged softmax probabilities of this
// call are stored there (forward values only).
struct MultiHeadAttention {
  LinearLayer wq, wk, wv, wo;
  long heads = 1;
  long dim = 0;

  MultiHeadAttention() = default;
  MultiHeadAttention(ParamStore& ps, Rng& rng, const std::string& prefix, long dim, long heads);

  Value forward(const Value& q_in, const Value& kv_in, Tensor* avg_probs = nullptr) const;
  // Window-local variant: rows of x grouped into consecutive windows.
  Value forward_windowed(const Value& x, long window) const;
};

struct FeedForward {
  LinearLayer fc1, fc2;

  FeedForward() = default;
  FeedForward(ParamStore& ps, Rng& rng, const std::string& prefix, long dim, long hidden);

  Value forward(const Value& x) const { return fc2.forward(ops::gelu(fc1.forward(x))); }
};

// Transformer layer with the residual-then-normalize ordering:
//   q' = LN(q + Attention(q, kv, kv)),  out = LN(q' + FFN(q')).
// The key/value sequence is supplied by the caller (queries are usually
// concatenated with feature tokens before the call).
struct PostNormBlock {
  MultiHeadAttention attn;
  FeedForward ffn;
  LayerNormModule ln1, ln2;

  PostNormBlock() = default;
  PostNormBlock(ParamStore& ps, Rng& rng, const std::string& prefix, long dim, long heads, long ffn_hidden);

  Value forward(const Value& q, const Value& kv, Tensor* avg_probs = nullptr) const;
};

}  // namespace omnifd
