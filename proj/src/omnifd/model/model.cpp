#include "omnifd/model/model.hpp"

namespace omnifd {

TaskSet TaskSet::parse(const std::vector<std::string>& names) {
  TaskSet t;
  for (const auto& n : names) {
    if (n == "image_cls")
      t.image_cls = true;
    else if (n == "video_cls")
      t.video_cls = true;
    else if (n == "spatial_loc")
      t.spatial_loc = true;
    else if (n == "temporal_loc")
      t.temporal_loc = true;
    else
      throw Error(errc::BadConfig, "unknown task: " + n);
  }
  return t;
}

std::vector<std::string> TaskSet::names() const {
  std::vector<std::string> out;
  if (image_cls) out.push_back("image_cls");
  if (video_cls) out.push_back("video_cls");
  if (spatial_loc) out.push_back("spatial_loc");
  if (temporal_loc) out.push_back("temporal_loc");
  return out;
}

OmniFDModel::OmniFDModel(ModelConfig cfg, TaskSet tasks, std::uint64_t seed) : cfg_(std::move(cfg)), tasks_(tasks) {
  if (!tasks_.any()) throw Error(errc::NoTaskPresent, "model needs at least one task");
  if (cfg_.interaction.width == 0) cfg_.interaction.width = cfg_.encoder.stage_dims.back();
  Rng rng(derive_seed(seed, "model-init"));

  encoder_.emplace(params_, rng, cfg_.encoder);
  interaction_.emplace(params_, rng, cfg_.interaction, cfg_.encoder.stage_dims);
  const long width = cfg_.interaction.width;
  if (tasks_.image_cls) image_head_.emplace(params_, rng, "heads.image", width);
  if (tasks_.video_cls) video_head_.emplace(params_, rng, "heads.video", width);
  if (tasks_.spatial_loc)
    spatial_head_.emplace(params_, rng, "heads.spatial", cfg_.encoder.stage_dims, width, cfg_.interaction.num_queries);
  if (tasks_.temporal_loc) {
    const long hidden = static_cast<long>(width * cfg_.interaction.ffn_expansion);
    temporal_head_.emplace(params_, rng, "heads.temporal", cfg_.encoder.stage_dims.back(), width,
                           cfg_.interaction.heads, hidden);
  }
}

double OmniFDModel::stride_seconds(const MediaTensor& x) const {
  if (x.modality != Modality::kVideo || x.fps <= 0) return 0.0;
  // frames covered by one final-level bin = patch_t * 2^(stages-1), capped
  // by the clip itself
  long t_grid = (x.frames() + cfg_.encoder.patch[0] - 1) / cfg_.encoder.patch[0];
  for (long s = 0; s + 1 < cfg_.encoder.stages(); ++s) t_grid = std::max(1L, t_grid / 2);
  const double clip_seconds = static_cast<double>(x.frames()) * x.frame_stride / x.fps;
  return clip_seconds / static_cast<double>(t_grid);
}

OmniFDModel::Outputs OmniFDModel::forward(const MediaTensor& x, bool capture_attention) const {
  Outputs out;
  FeaturePyramid fp = encoder_->encode(x);
  CrossTaskInteraction::Refined refined = interaction_->refine(fp, capture_attention);
  if (capture_attention) {
    out.attention = refined.last_attention;
    out.layout = refined.layout;
  }

  if (x.modality == Modality::kImage) {
    if (image_head_) out.image_logit = image_head_->forward(refined.queries);
    if (spatial_head_) out.mask_logits = spatial_head_->forward(fp, refined.queries);
  } else {
    if (video_head_) out.video_logit = video_head_->forward(refined.queries);
    if (temporal_head_) {
      TemporalHead::Prediction pred = temporal_head_->forward(fp, refined.queries);
      out.s_cls = pred.s_cls;
      out.s_reg = pred.s_reg;
      out.segment_stride_seconds = stride_seconds(x);
    }
  }
  return out;
}

}  // namespace omnifd
