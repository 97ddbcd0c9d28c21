#include "omnifd/model/losses.hpp"

namespace omnifd {

Value loss_binary(const Value& logit, double label) {
  if (logit.val().numel() != 1) throw Error(errc::ShapeMismatch, "loss_binary: logit must be scalar");
  return ops::bce_with_logits(logit, Tensor::full(logit.val().shape(), label));
}

Value loss_spatial(const Value& mask_logits, const Tensor& gt_mask, bool is_fake) {
  if (!is_fake) return ops::constant(Tensor::scalar(0.0));
  if (mask_logits.val().numel() != gt_mask.numel())
    throw Error(errc::ShapeMismatch, "loss_spatial: mask shapes differ");
  Tensor targets = gt_mask.reshape(mask_logits.val().shape());
  return ops::mean_all(ops::bce_with_logits(mask_logits, std::move(targets)));
}

TemporalLoss loss_temporal(const Value& s_cls, const Value& s_reg,
                           const std::vector<std::pair<double, double>>& gt_segments, double feature_stride_seconds,
                           bool is_fake, const FocalConfig& cfg) {
  TemporalLoss out;
  if (!is_fake) {
    out.focal = ops::constant(Tensor::scalar(0.0));
    out.diou = ops::constant(Tensor::scalar(0.0));
    return out;
  }
  const long t_len = s_cls.rows();
  if (s_reg.rows() != t_len || s_reg.cols() != 2)
    throw Error(errc::ShapeMismatch, "loss_temporal: s_reg must be T x 2");
  const double horizon = static_cast<double>(t_len) * feature_stride_seconds;
  for (const auto& [a, b] : gt_segments) {
    if (a < 0 || b > horizon + 1e-9 || b <= a)
      throw Error(errc::SegmentOutOfRange, "ground-truth segment outside the clip");
  }

  // grid coordinates: seconds divided by the per-bin duration
  Tensor targets({t_len, 1});
  std::vector<long> positives;
  std::vector<std::pair<double, double>> matched;
  for (long t = 0; t < t_len; ++t) {
    const double center = static_cast<double>(t) + 0.5;
    for (const auto& [a, b] : gt_segments) {
      const double ga = a / feature_stride_seconds;
      const double gb = b / feature_stride_seconds;
      if (center >= ga && center <= gb) {
        targets[t] = 1.0;
        positives.push_back(t);
        matched.emplace_back(ga, gb);
        break;
      }
    }
  }
  const double npos = std::max<double>(1.0, static_cast<double>(positives.size()));
  Value focal_sum = ops::sum_all(ops::focal_bce_logits(s_cls, targets, cfg.alpha, cfg.gamma));
  out.focal = ops::mul_scalar(focal_sum, 1.0 / npos);
  if (positives.empty()) {
    out.diou = ops::constant(Tensor::scalar(0.0));
  } else {
    Value terms = ops::diou_1d(s_reg, positives, matched);
    out.diou = ops::mean_all(terms);
  }
  return out;
}

Value total_loss(const std::optional<Value>& l_img, const std::optional<Value>& l_vid,
                 const std::optional<Value>& l_sp, const std::optional<Value>& l_tmp, LossReport* report) {
  std::vector<const std::optional<Value>*> parts = {&l_img, &l_vid, &l_sp, &l_tmp};
  Value total;
  bool any = false;
  for (const auto* p : parts) {
    if (!p->has_value()) continue;
    any = true;
    total = total.defined() ? ops::add(total, **p) : **p;
  }
  if (!any) throw Error(errc::NoTaskPresent, "total_loss: no task losses present");
  if (report) {
    report->img_present = l_img.has_value();
    report->vid_present = l_vid.has_value();
    report->sp_present = l_sp.has_value();
    report->tmp_present = l_tmp.has_value();
    report->l_img = l_img ? l_img->val()[0] : 0.0;
    report->l_vid = l_vid ? l_vid->val()[0] : 0.0;
    report->l_sp = l_sp ? l_sp->val()[0] : 0.0;
    report->l_tmp = l_tmp ? l_tmp->val()[0] : 0.0;
    report->total = total.val()[0];
  }
  return total;
}

}  // namespace omnifd
