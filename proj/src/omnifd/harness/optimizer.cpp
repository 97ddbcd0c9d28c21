#include "omnifd/harness/optimizer.hpp"

#include <cmath>

namespace omnifd {

AdamW::AdamW(ParamStore& params, OptimConfig cfg, long total_steps)
    : params_(params), cfg_(cfg), total_steps_(total_steps) {
  for (const auto& [name, p] : params_.all()) slots_[name] = {Tensor(p.val().shape()), Tensor(p.val().shape())};
}

double AdamW::lr_at(long t) const {
  const double progress = std::min(1.0, static_cast<double>(t) / static_cast<double>(total_steps_));
  return cfg_.lr * 0.5 * (1.0 + std::cos(3.141592653589793 * progress));
}

void AdamW::step(GradMap& grads) {
  // global-norm clipping over every present gradient, in name order
  double sq = 0;
  for (const auto& [name, p] : params_.all()) {
    const Tensor* g = grads.find(p.node());
    if (!g) continue;
    for (long i = 0; i < g->numel(); ++i) sq += (*g)[i] * (*g)[i];
  }
  const double norm = std::sqrt(sq);
  const double clip = (cfg_.clip_norm > 0 && norm > cfg_.clip_norm) ? cfg_.clip_norm / norm : 1.0;

  const double lr = lr_at(t_);
  last_lr_ = lr;
  ++t_;
  const double bias1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double bias2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));

  for (auto& [name, slot] : slots_) {
    const Value& p = params_.get(name);
    Tensor& data = p.mutable_val();
    const Tensor* g = grads.find(p.node());
    for (long i = 0; i < data.numel(); ++i) {
      const double gi = g ? (*g)[i] * clip : 0.0;
      slot.m[i] = cfg_.beta1 * slot.m[i] + (1.0 - cfg_.beta1) * gi;
      slot.v[i] = cfg_.beta2 * slot.v[i] + (1.0 - cfg_.beta2) * gi * gi;
      const double mhat = slot.m[i] / bias1;
      const double vhat = slot.v[i] / bias2;
      data[i] -= lr * (mhat / (std::sqrt(vhat) + cfg_.eps) + cfg_.weight_decay * data[i]);
    }
  }
}

}  // namespace omnifd
