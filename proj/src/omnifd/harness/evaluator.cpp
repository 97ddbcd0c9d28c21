#include "omnifd/harness/evaluator.hpp"

#include <cmath>
#include <fstream>

namespace omnifd {

using nlohmann::json;

Evaluator::Evaluator(const ExperimentConfig& cfg, const OmniFDModel& model) : cfg_(cfg), model_(model) {}

namespace {
double sigmoid(double z) { return z >= 0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z)); }

long center_start(long clip_len, long frame_count, long stride) {
  const long span = (frame_count - 1) * stride + 1;
  if (span >= clip_len) return 0;
  return (clip_len - span) / 2;
}
}  // namespace

Evaluator::Result Evaluator::evaluate(const data::Dataset& ds, const TaskSet& requested) const {
  if (!model_.tasks().contains(requested))
    throw Error(errc::MissingHead, "checkpoint lacks a head for a requested task");

  NoGradGuard inference;
  Result res;
  res.dump = json::array();

  std::vector<double> img_scores, vid_scores;
  std::vector<int> img_labels, vid_labels;
  double iou_sum = 0, iou_diff_sum = 0, pbca_sum = 0, iinc_sum = 0;
  long fake_imgs = 0;
  std::vector<metrics::VideoSegments> seg_videos;

  const bool want_images = requested.image_cls || requested.spatial_loc;
  const bool want_videos = requested.video_cls || requested.temporal_loc;

  for (long i = 0; i < ds.size(); ++i) {
    const data::Sample& s = ds.sample(i);
    json rec;
    rec["id"] = s.ann.sample_id;
    rec["label"] = s.ann.is_fake ? "fake" : "real";
    rec["modality"] = s.ann.is_video ? "video" : "image";

    if (!s.ann.is_video && want_images) {
      MediaTensor mt = to_unified_tensor(s.pixels, cfg_.model.encoder.input_h, cfg_.model.encoder.input_w);
      auto out = model_.forward(mt);
      if (requested.image_cls && out.image_logit) {
        const double score = sigmoid(out.image_logit->val()[0]);
        img_scores.push_back(score);
        img_labels.push_back(s.ann.is_fake ? 1 : 0);
        rec["image_logit"] = out.image_logit->val()[0];
        rec["image_score"] = score;
      }
      if (requested.spatial_loc && out.mask_logits) {
        const Tensor& logits = out.mask_logits->val();
        Tensor probs({mt.height(), mt.width()});
        for (long p = 0; p < probs.numel(); ++p) probs[p] = sigmoid(logits[p]);
        if (s.ann.is_fake) {
          const Tensor& gt = s.ann.masks[0];
          iou_sum += metrics::iou_binary(probs, gt, 0.1);
          iou_diff_sum += metrics::iou_binary(probs, gt, 0.01);
          pbca_sum += metrics::pbca(probs, gt);
          iinc_sum += metrics::iinc(probs, gt);
          ++fake_imgs;
        }
        rec["mask_logits"] = std::vector<double>(logits.data(), logits.data() + logits.numel());
      }
    } else if (s.ann.is_video && want_videos) {
      FrameSampling sampling{cfg_.batch.frame_count, cfg_.batch.frame_stride,
                             center_start(s.pixels.dim(0), cfg_.batch.frame_count, cfg_.batch.frame_stride)};
      MediaTensor mt = to_unified_tensor(s.pixels, sampling, s.ann.fps, cfg_.model.encoder.input_h,
                                         cfg_.model.encoder.input_w);
      auto out = model_.forward(mt);
      if (requested.video_cls && out.video_logit) {
        const double score = sigmoid(out.video_logit->val()[0]);
        vid_scores.push_back(score);
        vid_labels.push_back(s.ann.is_fake ? 1 : 0);
        rec["video_logit"] = out.video_logit->val()[0];
        rec["video_score"] = score;
      }
      if (requested.temporal_loc && out.s_cls) {
        auto segs = decode_segments(out.s_cls->val(), out.s_reg->val(), out.segment_stride_seconds,
                                    cfg_.model.segments);
        metrics::VideoSegments vs;
        vs.predictions = segs;
        for (const auto& [a, b] : s.ann.segments) vs.ground_truth.push_back({a, b, 1.0});
        seg_videos.push_back(vs);
        json jsegs = json::array();
        for (const auto& seg : segs) jsegs.push_back({{"start_s", seg.start}, {"end_s", seg.end}, {"score", seg.score}});
        rec["segments"] = jsegs;
      }
    } else {
      continue;
    }
    res.dump.push_back(rec);
  }

  auto add = [&](const std::string& task, const std::string& name, double value, long support,
                 const std::string& config = "") {
    res.reports.push_back({task, name, value, support, config});
  };

  if (requested.image_cls && !img_scores.empty()) {
    add("image_cls", "acc", metrics::accuracy(img_scores, img_labels), static_cast<long>(img_scores.size()),
        "threshold=0.5");
    bool two = false;
    for (size_t k = 1; k < img_labels.size(); ++k) two |= img_labels[k] != img_labels[0];
    if (two) add("image_cls", "auc", metrics::auc(img_scores, img_labels), static_cast<long>(img_scores.size()));
  }
  if (requested.spatial_loc && fake_imgs > 0) {
    add("spatial_loc", "iou", iou_sum / fake_imgs, fake_imgs, "threshold=0.1");
    add("spatial_loc", "iou_diff", iou_diff_sum / fake_imgs, fake_imgs, "threshold=0.01");
    add("spatial_loc", "pbca", pbca_sum / fake_imgs, fake_imgs, "threshold=0.5");
    add("spatial_loc", "iinc", iinc_sum / fake_imgs, fake_imgs, "threshold=0.5");
  }
  if (requested.video_cls && !vid_scores.empty()) {
    add("video_cls", "acc", metrics::accuracy(vid_scores, vid_labels), static_cast<long>(vid_scores.size()),
        "threshold=0.5");
    bool two = false;
    for (size_t k = 1; k < vid_labels.size(); ++k) two |= vid_labels[k] != vid_labels[0];
    if (two) add("video_cls", "auc", metrics::auc(vid_scores, vid_labels), static_cast<long>(vid_scores.size()));
  }
  if (requested.temporal_loc && !seg_videos.empty()) {
    add("temporal_loc", "ap@0.5", metrics::temporal_ap(seg_videos, 0.5), static_cast<long>(seg_videos.size()));
    add("temporal_loc", "map", metrics::temporal_map(seg_videos), static_cast<long>(seg_videos.size()),
        "tiou=0.5:0.05:0.95");
    add("temporal_loc", "ar@10", metrics::temporal_ar_at(seg_videos, 10), static_cast<long>(seg_videos.size()));
    add("temporal_loc", "ar@20", metrics::temporal_ar_at(seg_videos, 20), static_cast<long>(seg_videos.size()));
  }
  return res;
}

double Evaluator::primary_score(const std::vector<metrics::MetricReport>& reports) {
  double sum = 0;
  long n = 0;
  for (const auto& r : reports) {
    const bool primary = (r.task == "image_cls" && r.name == "acc") || (r.task == "video_cls" && r.name == "acc") ||
                         (r.task == "spatial_loc" && r.name == "iou") || (r.task == "temporal_loc" && r.name == "map");
    if (primary) {
      sum += r.value;
      ++n;
    }
  }
  return n ? sum / static_cast<double>(n) : 0.0;
}

void write_metric_reports(const std::string& path, long step, const std::vector<metrics::MetricReport>& reports) {
  std::ofstream f(path, std::ios::app);
  if (!f) throw Error(errc::IoError, "cannot append metrics to " + path);
  for (const auto& r : reports) {
    json j = {{"step", step}, {"task", r.task},       {"metric", r.name},
              {"value", r.value}, {"support", r.support}, {"config", r.config}};
    f << j.dump() << "\n";
  }
}

}  // namespace omnifd
