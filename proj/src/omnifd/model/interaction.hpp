#pragma once

#include <string>
#include <vector>

#include "omnifd/model/encoder.hpp"

namespace omnifd {

struct InteractionConfig {
  long num_queries = 64;
  long width = 192;
  long depth = 3;
  long heads = 4;
  double ffn_expansion = 2.0;

  void validate() const {
    if (num_queries < 1 || depth < 1) throw Error(errc::BadConfig, "interaction needs queries and depth >= 1");
    if (width % heads != 0) throw Error(errc::BadConfig, "interaction width not divisible by heads");
  }
};

// Where each flattened token came from, for attention-map export.
struct TokenLayout {
  std::vector<long> level_offset;  // offset of each level's span
  std::vector<GridShape> grids;
  long total = 0;
};

// Learnable queries refined by attending over the concatenation of the
// queries themselves and the flattened multi-scale features.
class CrossTaskInteraction {
 public:
  CrossTaskInteraction(ParamStore& ps, Rng& rng, InteractionConfig cfg, std::vector<long> level_dims,
                       const std::string& prefix = "interaction");

  struct Refined {
    Value queries;          // N x C
    Tensor last_attention;  // head-averaged probs of the final layer, N x (N + M)
    TokenLayout layout;
  };

  // Per-level projection to the interaction width plus a level embedding,
  // concatenated in level order.
  Value flatten_pyramid(const FeaturePyramid& fp, TokenLayout* layout = nullptr) const;

  Refined refine(const FeaturePyramid& fp, bool capture_attention = false) const;

  const InteractionConfig& config() const { return cfg_; }
  const Value& queries() const { return queries_; }
  const std::vector<PostNormBlock>& layers() const { return layers_; }

 private:
  InteractionConfig cfg_;
  std::vector<long> level_dims_;
  Value queries_;      // N x C learnable
  Value level_embed_;  // L x C
  std::vector<LinearLayer> level_proj_;
  std::vector<PostNormBlock> layers_;
};

// Reshapes one query's attention mass over a level's tokens into that
// level's spatial grid (averaged over time). `attention` is a row-
// normalized (N x (N+M)) matrix as produced by Refined::last_attention.
struct AttentionMap {
  Tensor grid;  // H_l x W_l
  double mass = 0.0;
};
std::vector<AttentionMap> attention_maps(const Tensor& attention, const TokenLayout& layout, long num_queries,
                                         long level);

}  // namespace omnifd
