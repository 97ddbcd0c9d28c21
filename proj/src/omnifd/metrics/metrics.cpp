#include "omnifd/metrics/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace omnifd::metrics {

double accuracy(const std::vector<double>& scores, const std::vector<int>& labels, double threshold) {
  if (scores.empty() || scores.size() != labels.size()) throw Error(errc::EmptyInput, "accuracy: bad inputs");
  long hits = 0;
  for (size_t i = 0; i < scores.size(); ++i)
    if ((scores[i] >= threshold ? 1 : 0) == labels[i]) ++hits;
  return static_cast<double>(hits) / static_cast<double>(scores.size());
}

double auc(const std::vector<double>& scores, const std::vector<int>& labels) {
  if (scores.size() != labels.size() || scores.empty()) throw Error(errc::EmptyInput, "auc: bad inputs");
  long n_pos = 0;
  for (int l : labels) n_pos += l ? 1 : 0;
  const long n_neg = static_cast<long>(labels.size()) - n_pos;
  if (n_pos == 0 || n_neg == 0) throw Error(errc::SingleClass, "auc: both classes required");

  // rank-sum with average ranks over ties
  std::vector<size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](size_t a, size_t b) { return scores[a] < scores[b]; });
  double pos_rank_sum = 0;
  size_t i = 0;
  while (i < order.size()) {
    size_t j = i;
    while (j + 1 < order.size() && scores[order[j + 1]] == scores[order[i]]) ++j;
    const double avg_rank = 0.5 * (static_cast<double>(i + 1) + static_cast<double>(j + 1));
    for (size_t k = i; k <= j; ++k)
      if (labels[order[k]]) pos_rank_sum += avg_rank;
    i = j + 1;
  }
  const double u = pos_rank_sum - static_cast<double>(n_pos) * (static_cast<double>(n_pos) + 1.0) / 2.0;
  return u / (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

namespace {
void check_masks(const Tensor& pred, const Tensor& gt, const char* what) {
  if (!pred.same_shape(gt)) throw Error(errc::ShapeMismatch, std::string(what) + ": mask shapes differ");
}
}  // namespace

double iou_binary(const Tensor& pred, const Tensor& gt, double threshold) {
  check_masks(pred, gt, "iou_binary");
  long inter = 0, uni = 0;
  for (long i = 0; i < pred.numel(); ++i) {
    const bool p = pred[i] >= threshold;
    const bool g = gt[i] > 0.5;
    inter += (p && g) ? 1 : 0;
    uni += (p || g) ? 1 : 0;
  }
  if (uni == 0) return 1.0;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

double pbca(const Tensor& pred, const Tensor& gt, double threshold) {
  check_masks(pred, gt, "pbca");
  long hits = 0;
  for (long i = 0; i < pred.numel(); ++i)
    if ((pred[i] >= threshold) == (gt[i] > 0.5)) ++hits;
  return static_cast<double>(hits) / static_cast<double>(pred.numel());
}

double iinc(const Tensor& pred, const Tensor& gt, double threshold) {
  check_masks(pred, gt, "iinc");
  long p_cnt = 0, g_cnt = 0, inter = 0;
  for (long i = 0; i < pred.numel(); ++i) {
    const bool p = pred[i] >= threshold;
    const bool g = gt[i] > 0.5;
    p_cnt += p ? 1 : 0;
    g_cnt += g ? 1 : 0;
    inter += (p && g) ? 1 : 0;
  }
  if (p_cnt == 0 && g_cnt == 0) return 0.0;
  if (p_cnt == 0 || g_cnt == 0) return 1.0;
  return 1.0 - 0.5 * (static_cast<double>(inter) / p_cnt + static_cast<double>(inter) / g_cnt);
}

std::vector<double> default_tiou_thresholds() {
  std::vector<double> t;
  for (int i = 0; i < 10; ++i) t.push_back(0.5 + 0.05 * i);
  return t;
}

namespace {

struct RankedPrediction {
  double score;
  size_t video;
  size_t index;
};

std::vector<RankedPrediction> pooled_rank(const std::vector<VideoSegments>& videos) {
  std::vector<RankedPrediction> pool;
  for (size_t v = 0; v < videos.size(); ++v)
    for (size_t i = 0; i < videos[v].predictions.size(); ++i)
      pool.push_back({videos[v].predictions[i].score, v, i});
  std::stable_sort(pool.begin(), pool.end(), [](const RankedPrediction& a, const RankedPrediction& b) {
    return a.score > b.score;
  });
  return pool;
}

// Greedy matcher: walks predictions in score order, assigning each to its
// best-tIoU unmatched ground truth above the threshold.
std::vector<bool> greedy_match(const std::vector<VideoSegments>& videos, const std::vector<RankedPrediction>& pool,
                               double threshold) {
  std::vector<std::vector<bool>> gt_used(videos.size());
  for (size_t v = 0; v < videos.size(); ++v) gt_used[v].assign(videos[v].ground_truth.size(), false);
  std::vector<bool> tp(pool.size(), false);
  for (size_t r = 0; r < pool.size(); ++r) {
    const auto& pred = videos[pool[r].video].predictions[pool[r].index];
    const auto& gts = videos[pool[r].video].ground_truth;
    double best = -1;
    long best_g = -1;
    for (size_t g = 0; g < gts.size(); ++g) {
      if (gt_used[pool[r].video][g]) continue;
      const double ov = tiou(pred, gts[g]);
      if (ov >= threshold && ov > best) {
        best = ov;
        best_g = static_cast<long>(g);
      }
    }
    if (best_g >= 0) {
      gt_used[pool[r].video][static_cast<size_t>(best_g)] = true;
      tp[r] = true;
    }
  }
  return tp;
}

}  // namespace

double temporal_ap(const std::vector<VideoSegments>& videos, double tiou_threshold) {
  long total_gt = 0;
  for (const auto& v : videos) total_gt += static_cast<long>(v.ground_truth.size());
  const auto pool = pooled_rank(videos);
  if (total_gt == 0) return pool.empty() ? 1.0 : 0.0;
  if (pool.empty()) return 0.0;

  const auto tp = greedy_match(videos, pool, tiou_threshold);
  // precision/recall after each prediction, all-point interpolation
  std::vector<double> precision(pool.size()), recall(pool.size());
  long tps = 0;
  for (size_t r = 0; r < pool.size(); ++r) {
    tps += tp[r] ? 1 : 0;
    precision[r] = static_cast<double>(tps) / static_cast<double>(r + 1);
    recall[r] = static_cast<double>(tps) / static_cast<double>(total_gt);
  }
  for (size_t r = precision.size(); r-- > 1;) precision[r - 1] = std::max(precision[r - 1], precision[r]);
  double ap = 0;
  double prev_recall = 0;
  for (size_t r = 0; r < pool.size(); ++r) {
    ap += (recall[r] - prev_recall) * precision[r];
    prev_recall = recall[r];
  }
  return ap;
}

double temporal_map(const std::vector<VideoSegments>& videos, const std::vector<double>& thresholds) {
  const auto ts = thresholds.empty() ? default_tiou_thresholds() : thresholds;
  double sum = 0;
  for (double t : ts) sum += temporal_ap(videos, t);
  return sum / static_cast<double>(ts.size());
}

double temporal_ar_at(const std::vector<VideoSegments>& videos, long k, const std::vector<double>& thresholds) {
  const auto ts = thresholds.empty() ? default_tiou_thresholds() : thresholds;
  if (videos.empty()) throw Error(errc::EmptyInput, "temporal_ar_at: no videos");
  double total = 0;
  for (double t : ts) {
    double recall_sum = 0;
    for (const auto& v : videos) {
      if (v.ground_truth.empty()) {
        recall_sum += 1.0;  // nothing to miss
        continue;
      }
      std::vector<Segment> preds = v.predictions;
      std::stable_sort(preds.begin(), preds.end(), [](const Segment& a, const Segment& b) { return a.score > b.score; });
      if (static_cast<long>(preds.size()) > k) preds.resize(static_cast<size_t>(k));
      std::vector<bool> used(v.ground_truth.size(), false);
      long matched = 0;
      for (const Segment& p : preds) {
        double best = -1;
        long best_g = -1;
        for (size_t g = 0; g < v.ground_truth.size(); ++g) {
          if (used[g]) continue;
          const double ov = tiou(p, v.ground_truth[g]);
          if (ov >= t && ov > best) {
            best = ov;
            best_g = static_cast<long>(g);
          }
        }
        if (best_g >= 0) {
          used[static_cast<size_t>(best_g)] = true;
          ++matched;
        }
      }
      recall_sum += static_cast<double>(matched) / static_cast<double>(v.ground_truth.size());
    }
    total += recall_sum / static_cast<double>(videos.size());
  }
  return total / static_cast<double>(ts.size());
}

}  // namespace omnifd::metrics
