#pragma once

#include <optional>
#include <string>
#include <vector>

#include "omnifd/model/interaction.hpp"

namespace omnifd {

struct Segment {
  double start = 0;  // seconds
  double end = 0;    // seconds, > start
  double score = 0;  // in [0,1]
};

// Temporal IoU of two [start, end] intervals.
double tiou(double s1, double e1, double s2, double e2);
inline double tiou(const Segment& a, const Segment& b) { return tiou(a.start, a.end, b.start, b.end); }

struct SegmentDecodeConfig {
  double score_threshold = 0.1;
  double nms_tiou = 0.5;
  long max_keep = 100;
};

// Anchor-free decoding: position t spans the feature bin [t, t+1); the
// candidate interval is [t - s_reg[t][0], t+1 + s_reg[t][1]] scaled by the
// per-bin duration in seconds. Hard NMS, results sorted by score.
std::vector<Segment> decode_segments(const Tensor& s_cls, const Tensor& s_reg, double feature_stride_seconds,
                                     const SegmentDecodeConfig& cfg);

// Mean over refined queries followed by a linear map to one logit.
struct ClassificationHead {
  LinearLayer fc;
  ClassificationHead() = default;
  ClassificationHead(ParamStore& ps, Rng& rng, const std::string& prefix, long width);
  Value forward(const Value& refined_queries) const;  // 1 x 1 logit
};

// Pixel-wise forgery mask from query/feature similarity. Image-only.
struct SpatialHead {
  LinearLayer fuse;  // concat of resized levels -> width
  LinearLayer proj;  // N -> 1
  long width = 0;
  long num_queries = 0;

  SpatialHead() = default;
  SpatialHead(ParamStore& ps, Rng& rng, const std::string& prefix, const std::vector<long>& level_dims, long width,
              long num_queries);

  // All levels bilinearly resized to the level-1 grid, concatenated along
  // channels, then mapped to `width` by a 1x1 convolution.
  Value fuse_features(const FeaturePyramid& fp) const;
  // (H*W) x 1 logits at the input resolution.
  Value forward(const FeaturePyramid& fp, const Value& refined_queries) const;
};

// Per-timestep classification logits and boundary offsets. Video-only.
struct TemporalHead {
  LinearLayer feat_proj;  // C_L -> width
  PostNormBlock enhance;
  Value conv_cls_w, conv_cls_b;
  Value conv_reg_w, conv_reg_b;
  long width = 0;

  TemporalHead() = default;
  TemporalHead(ParamStore& ps, Rng& rng, const std::string& prefix, long final_dim, long width, long heads,
               long ffn_hidden);

  // Spatial average of the final level per timestep, projected to width.
  Value temporal_feature(const FeaturePyramid& fp) const;  // T_L x width
  // F_tmp attends over concat(F_tmp, queries); length preserved.
  Value enhance_features(const Value& f_tmp, const Value& refined_queries) const;
  struct Prediction {
    Value s_cls;  // T x 1 logits
    Value s_reg;  // T x 2 nonnegative offsets (softplus + 1e-3 floor)
  };
  Prediction predict(const Value& enhanced) const;
  Prediction forward(const FeaturePyramid& fp, const Value& refined_queries) const;
};

}  // namespace omnifd
