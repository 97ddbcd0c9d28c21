#pragma once

#include <functional>
#include <string>
#include <vector>

#include "omnifd/harness/checkpoint.hpp"
#include "omnifd/harness/evaluator.hpp"

namespace omnifd {

struct StepRecord {
  long step = 0;
  LossReport loss;
  double lr = 0;
};

struct TrainResult {
  std::vector<StepRecord> log;
  std::string latest_checkpoint;
  std::string best_checkpoint;  // empty if no validation ran
  double best_score = 0;
};

// End-to-end multi-task training: every step draws one mixed batch, runs
// the shared trunk once per sample, sums the present task losses (image
// and video sub-batches contribute their own terms to one total), and
// applies a single optimizer update.
class Trainer {
 public:
  Trainer(const ExperimentConfig& cfg, OmniFDModel& model, const data::Dataset& train, const data::Dataset* val);

  TrainResult run(long max_steps = -1);

  // Resumes counters, parameters, optimizer moments, and the sampler
  // stream from a checkpoint.
  void restore(const Checkpoint& ck);

  long current_step() const { return step_; }
  Checkpoint snapshot() const;

 private:
  struct SampleLoss {
    GradMap grads;
    double img = 0, vid = 0, sp = 0, tmp = 0;
    bool has_img = false, has_vid = false, has_sp = false, has_tmp = false;
  };

  SampleLoss train_sample(const data::BatchItem& item, long slot, double w_img, double w_vid, double w_sp,
                          double w_tmp) const;
  StepRecord train_step();
  double validation_score();

  const ExperimentConfig& cfg_;
  OmniFDModel& model_;
  const data::Dataset& train_;
  const data::Dataset* val_;
  data::MixedBatchSampler sampler_;
  AdamW opt_;
  Evaluator evaluator_;
  long step_ = 0;
  int threads_ = 1;
  std::string log_path_, metrics_path_;
};

}  // namespace omnifd
