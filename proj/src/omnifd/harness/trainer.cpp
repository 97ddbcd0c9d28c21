#include "omnifd/harness/trainer.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <thread>

#include "omnifd/data/synth.hpp"

namespace omnifd {

namespace fs = std::filesystem;
using nlohmann::json;

Trainer::Trainer(const ExperimentConfig& cfg, OmniFDModel& model, const data::Dataset& train,
                 const data::Dataset* val)
    : cfg_(cfg),
      model_(model),
      train_(train),
      val_(val),
      sampler_(train, cfg.batch, cfg.seed),
      opt_(model.params(), cfg.optim, cfg.steps),
      evaluator_(cfg, model) {
  cfg_.validate();
  if (cfg_.tasks.needs_images() && train_.image_count() == 0)
    throw Error(errc::TaskDataMismatch, "image tasks requested but the training split has no images");
  if (cfg_.tasks.needs_videos() && train_.video_count() == 0)
    throw Error(errc::TaskDataMismatch, "video tasks requested but the training split has no videos");
  threads_ = cfg_.threads > 0 ? cfg_.threads : static_cast<int>(std::thread::hardware_concurrency());
  if (threads_ < 1) threads_ = 1;
  fs::create_directories(cfg_.out_dir);
  log_path_ = (fs::path(cfg_.out_dir) / "log.jsonl").string();
  metrics_path_ = (fs::path(cfg_.out_dir) / "metrics.jsonl").string();
  // echo the configuration verbatim next to the run outputs
  std::ofstream cf((fs::path(cfg_.out_dir) / "config.json").string());
  cf << cfg_.to_json().dump(1) << "\n";
}

Trainer::SampleLoss Trainer::train_sample(const data::BatchItem& item, long slot, double w_img, double w_vid,
                                          double w_sp, double w_tmp) const {
  const data::Sample& s = train_.sample(item.dataset_index);
  const std::uint64_t aug_seed = derive_seed(cfg_.seed, "augment", static_cast<std::uint64_t>(step_) * 1000003ULL +
                                                                       static_cast<std::uint64_t>(slot));
  SampleLoss out;
  Value total;
  auto absorb = [&](Value term, double weight) {
    Value weighted = ops::mul_scalar(term, weight);
    total = total.defined() ? ops::add(total, weighted) : weighted;
    return weighted.val()[0];
  };

  if (!item.is_video) {
    synth::AugmentedSample aug = synth::augment(s.pixels, s.ann.masks, aug_seed);
    MediaTensor mt = to_unified_tensor(aug.pixels, cfg_.model.encoder.input_h, cfg_.model.encoder.input_w);
    auto outputs = model_.forward(mt);
    if (cfg_.tasks.image_cls) {
      out.img = absorb(loss_binary(*outputs.image_logit, s.ann.is_fake ? 1.0 : 0.0), w_img);
      out.has_img = true;
    }
    if (cfg_.tasks.spatial_loc && s.ann.is_fake) {
      out.sp = absorb(loss_spatial(*outputs.mask_logits, aug.masks[0], true), w_sp);
      out.has_sp = true;
    }
  } else {
    synth::AugmentedSample aug = synth::augment(s.pixels, {}, aug_seed);
    const long clip_len = aug.pixels.dim(0);
    const long span = (cfg_.batch.frame_count - 1) * cfg_.batch.frame_stride + 1;
    Rng srng(derive_seed(cfg_.seed, "clip-start", static_cast<std::uint64_t>(step_) * 1000003ULL +
                                                      static_cast<std::uint64_t>(slot)));
    const long max_start = std::max(0L, clip_len - span);
    FrameSampling sampling{cfg_.batch.frame_count, cfg_.batch.frame_stride,
                           max_start > 0 ? srng.uniform_int(0, max_start) : 0};
    MediaTensor mt =
        to_unified_tensor(aug.pixels, sampling, s.ann.fps, cfg_.model.encoder.input_h, cfg_.model.encoder.input_w);
    auto outputs = model_.forward(mt);
    if (cfg_.tasks.video_cls) {
      out.vid = absorb(loss_binary(*outputs.video_logit, s.ann.is_fake ? 1.0 : 0.0), w_vid);
      out.has_vid = true;
    }
    if (cfg_.tasks.temporal_loc && s.ann.is_fake) {
      // ground-truth segments relative to the sampled window
      const double t0 = static_cast<double>(sampling.start) / s.ann.fps;
      const double horizon = static_cast<double>(cfg_.batch.frame_count) * cfg_.batch.frame_stride / s.ann.fps;
      std::vector<std::pair<double, double>> segs;
      for (const auto& [a, b] : s.ann.segments) {
        const double sa = std::max(0.0, a - t0);
        const double sb = std::min(horizon, b - t0);
        if (sb - sa > 1e-9) segs.emplace_back(sa, sb);
      }
      TemporalLoss tl =
          loss_temporal(*outputs.s_cls, *outputs.s_reg, segs, outputs.segment_stride_seconds, true, cfg_.model.focal);
      out.tmp = absorb(ops::add(tl.focal, tl.diou), w_tmp);
      out.has_tmp = true;
    }
  }
  if (total.defined()) backward(total, out.grads);
  return out;
}

StepRecord Trainer::train_step() {
  const std::vector<data::BatchItem> batch = sampler_.next_batch();

  // per-task normalizers are known from the labels before any forward pass
  long n_img = 0, n_vid = 0, n_fake_img = 0, n_fake_vid = 0;
  for (const auto& item : batch) {
    const bool fake = train_.sample(item.dataset_index).ann.is_fake;
    if (item.is_video) {
      ++n_vid;
      n_fake_vid += fake ? 1 : 0;
    } else {
      ++n_img;
      n_fake_img += fake ? 1 : 0;
    }
  }
  const double w_img = n_img ? 1.0 / n_img : 0.0;
  const double w_vid = n_vid ? 1.0 / n_vid : 0.0;
  const double w_sp = 1.0 / std::max(1L, n_fake_img);
  const double w_tmp = 1.0 / std::max(1L, n_fake_vid);

  std::vector<SampleLoss> results(batch.size());
  const int workers = std::min<int>(threads_, static_cast<int>(batch.size()));
  if (workers <= 1) {
    for (size_t i = 0; i < batch.size(); ++i)
      results[i] = train_sample(batch[i], static_cast<long>(i), w_img, w_vid, w_sp, w_tmp);
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w)
      pool.emplace_back([&, w] {
        for (size_t i = static_cast<size_t>(w); i < batch.size(); i += static_cast<size_t>(workers))
          results[i] = train_sample(batch[i], static_cast<long>(i), w_img, w_vid, w_sp, w_tmp);
      });
    for (auto& t : pool) t.join();
  }

  // deterministic reduction in slot order
  GradMap grads;
  LossReport report;
  for (const auto& r : results) {
    grads.merge(r.grads);
    report.l_img += r.img;
    report.l_vid += r.vid;
    report.l_sp += r.sp;
    report.l_tmp += r.tmp;
    report.img_present |= r.has_img;
    report.vid_present |= r.has_vid;
    report.sp_present |= r.has_sp;
    report.tmp_present |= r.has_tmp;
  }
  report.sp_present = cfg_.tasks.spatial_loc && n_img > 0;
  report.tmp_present = cfg_.tasks.temporal_loc && n_vid > 0;
  report.total = report.l_img + report.l_vid + report.l_sp + report.l_tmp;

  if (!std::isfinite(report.total)) {
    json dump = {{"step", step_}, {"l_img", report.l_img}, {"l_vid", report.l_vid},
                 {"l_sp", report.l_sp}, {"l_tmp", report.l_tmp}};
    std::ofstream f((fs::path(cfg_.out_dir) / "nonfinite_dump.json").string());
    f << dump.dump(1) << "\n";
    throw Error(errc::NonFiniteLoss, "non-finite loss at step " + std::to_string(step_));
  }

  opt_.step(grads);
  ++step_;

  StepRecord rec;
  rec.step = step_;
  rec.loss = report;
  rec.lr = opt_.last_lr();
  return rec;
}

double Trainer::validation_score() {
  auto res = evaluator_.evaluate(*val_, cfg_.tasks);
  write_metric_reports(metrics_path_, step_, res.reports);
  return Evaluator::primary_score(res.reports);
}

Checkpoint Trainer::snapshot() const {
  return Checkpoint::capture(step_, sampler_.state(), cfg_.to_json(), model_.params(), &opt_);
}

void Trainer::restore(const Checkpoint& ck) {
  step_ = ck.step;
  sampler_.set_state(ck.sampler_state);
  ck.restore_params(model_.params());
  ck.restore_optimizer(opt_);
}

TrainResult Trainer::run(long max_steps) {
  const long until = max_steps < 0 ? cfg_.steps : std::min(cfg_.steps, step_ + max_steps);
  TrainResult result;
  std::ofstream log(log_path_, std::ios::app);
  if (!log) throw Error(errc::IoError, "cannot open " + log_path_);

  while (step_ < until) {
    StepRecord rec = train_step();
    json j = {{"step", rec.step},
              {"l_img", rec.loss.l_img},
              {"l_vid", rec.loss.l_vid},
              {"l_sp", rec.loss.l_sp},
              {"l_tmp", rec.loss.l_tmp},
              {"total", rec.loss.total},
              {"lr", rec.lr},
              {"present",
               {{"img", rec.loss.img_present},
                {"vid", rec.loss.vid_present},
                {"sp", rec.loss.sp_present},
                {"tmp", rec.loss.tmp_present}}}};
    log << j.dump() << "\n";
    result.log.push_back(rec);

    if (val_ && cfg_.eval_every > 0 && step_ % cfg_.eval_every == 0) {
      const double score = validation_score();
      if (result.best_checkpoint.empty() || score > result.best_score) {
        result.best_score = score;
        result.best_checkpoint = (fs::path(cfg_.out_dir) / "ckpt_best.bin").string();
        snapshot().save(result.best_checkpoint);
      }
    }
  }
  log.flush();
  result.latest_checkpoint = (fs::path(cfg_.out_dir) / "ckpt_latest.bin").string();
  snapshot().save(result.latest_checkpoint);
  return result;
}

}  // namespace omnifd
