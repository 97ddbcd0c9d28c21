#pragma once

#include <map>

#include "omnifd/harness/config.hpp"
#include "omnifd/model/params.hpp"

namespace omnifd {

// AdamW with decoupled weight decay, cosine learning-rate decay to zero
// over the configured horizon, and global-norm gradient clipping.
// Parameters are visited in name order, so updates are deterministic.
class AdamW {
 public:
  struct Slot {
    Tensor m, v;
  };

  AdamW(ParamStore& params, OptimConfig cfg, long total_steps);

  void step(GradMap& grads);

  long steps_taken() const { return t_; }
  void set_steps_taken(long t) { t_ = t; }
  double lr_at(long t) const;
  double last_lr() const { return last_lr_; }

  std::map<std::string, Slot>& slots() { return slots_; }
  const std::map<std::string, Slot>& slots() const { return slots_; }

 private:
  ParamStore& params_;
  OptimConfig cfg_;
  long total_steps_;
  long t_ = 0;
  double last_lr_ = 0;
  std::map<std::string, Slot> slots_;
};

}  // namespace omnifd
