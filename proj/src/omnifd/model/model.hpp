#pragma once

#include <optional>
#include <string>
#include <vector>

#include "omnifd/model/heads.hpp"
#include "omnifd/model/losses.hpp"

namespace omnifd {

enum class Task { kImageCls, kVideoCls, kSpatialLoc, kTemporalLoc };

struct TaskSet {
  bool image_cls = false;
  bool video_cls = false;
  bool spatial_loc = false;
  bool temporal_loc = false;

  bool any() const { return image_cls || video_cls || spatial_loc || temporal_loc; }
  bool needs_images() const { return image_cls || spatial_loc; }
  bool needs_videos() const { return video_cls || temporal_loc; }
  bool contains(const TaskSet& other) const {
    return (!other.image_cls || image_cls) && (!other.video_cls || video_cls) &&
           (!other.spatial_loc || spatial_loc) && (!other.temporal_loc || temporal_loc);
  }
  bool operator==(const TaskSet&) const = default;

  static TaskSet all() { return {true, true, true, true}; }
  static TaskSet parse(const std::vector<std::string>& names);
  std::vector<std::string> names() const;
};

struct ModelConfig {
  EncoderConfig encoder;
  InteractionConfig interaction;  // width 0 resolves to the final stage dim
  SegmentDecodeConfig segments;
  FocalConfig focal;
};

// The unified model: shared encoder and interaction module, plus the
// decoding heads for whichever tasks this instance was built for.
class OmniFDModel {
 public:
  OmniFDModel(ModelConfig cfg, TaskSet tasks, std::uint64_t seed);

  struct Outputs {
    std::optional<Value> image_logit;
    std::optional<Value> video_logit;
    std::optional<Value> mask_logits;  // (H*W) x 1
    std::optional<Value> s_cls;        // T_L x 1
    std::optional<Value> s_reg;        // T_L x 2
    double segment_stride_seconds = 0;
    Tensor attention;  // final-layer head-averaged probs when captured
    TokenLayout layout;
  };

  // One forward pass produces every requested head output for the input's
  // modality; the encoder and interaction module run exactly once.
  Outputs forward(const MediaTensor& x, bool capture_attention = false) const;

  FeaturePyramid encode(const MediaTensor& x) const { return encoder_->encode(x); }

  const ModelConfig& config() const { return cfg_; }
  const TaskSet& tasks() const { return tasks_; }
  ParamStore& params() { return params_; }
  const ParamStore& params() const { return params_; }
  const UnifiedEncoder& encoder() const { return *encoder_; }
  const CrossTaskInteraction& interaction() const { return *interaction_; }
  const TemporalHead& temporal_head() const { return *temporal_head_; }
  const SpatialHead& spatial_head() const { return *spatial_head_; }

  // Duration in seconds covered by one final-level temporal bin.
  double stride_seconds(const MediaTensor& x) const;

 private:
  ModelConfig cfg_;
  TaskSet tasks_;
  ParamStore params_;
  std::optional<UnifiedEncoder> encoder_;
  std::optional<CrossTaskInteraction> interaction_;
  std::optional<ClassificationHead> image_head_;
  std::optional<ClassificationHead> video_head_;
  std::optional<SpatialHead> spatial_head_;
  std::optional<TemporalHead> temporal_head_;
};

}  // namespace omnifd
