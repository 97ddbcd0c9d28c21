#pragma once

#include <optional>
#include <vector>

#include "omnifd/core/ops.hpp"
#include "omnifd/model/heads.hpp"

namespace omnifd {

struct FocalConfig {
  double alpha = 0.25;
  double gamma = 2.0;
};

// Stabilized sigmoid cross-entropy on a single logit. `label` is 0 or 1.
Value loss_binary(const Value& logit, double label);

// Mean per-pixel BCE over the whole mask for forged samples; real samples
// contribute exactly zero with no gradient.
Value loss_spatial(const Value& mask_logits, const Tensor& gt_mask, bool is_fake);

struct TemporalLoss {
  Value focal;
  Value diou;
};

// Focal classification over all timesteps (normalized by positive count,
// min 1) plus DIoU regression averaged over positive timesteps. A timestep
// is positive when its bin center lies inside a ground-truth segment
// (boundary ties count as positive). Segments are in seconds.
TemporalLoss loss_temporal(const Value& s_cls, const Value& s_reg,
                           const std::vector<std::pair<double, double>>& gt_segments, double feature_stride_seconds,
                           bool is_fake, const FocalConfig& cfg = {});

struct LossReport {
  double l_img = 0, l_vid = 0, l_sp = 0, l_tmp = 0;
  bool img_present = false, vid_present = false, sp_present = false, tmp_present = false;
  double total = 0;
};

// Unweighted sum of the present task losses. Throws NoTaskPresent when
// every component is absent.
Value total_loss(const std::optional<Value>& l_img, const std::optional<Value>& l_vid,
                 const std::optional<Value>& l_sp, const std::optional<Value>& l_tmp, LossReport* report = nullptr);

}  // namespace omnifd
