#pragma once

// Brute-force reference implementations used to cross-check the metric
// suite. These deliberately stay naive (quadratic pair counts, per-pixel
// loops, recall-by-recall interpolation) and share no code with the
// implementations they verify.

#include <algorithm>
#include <vector>

#include "omnifd/core/tensor.hpp"
#include "omnifd/metrics/metrics.hpp"

namespace omnifd::testing {

inline double oracle_accuracy(const std::vector<double>& scores, const std::vector<int>& labels, double thr) {
  long ok = 0;
  for (size_t i = 0; i < scores.size(); ++i) {
    const int pred = scores[i] >= thr ? 1 : 0;
    if (pred == labels[i]) ++ok;
  }
  return static_cast<double>(ok) / static_cast<double>(scores.size());
}

// Pairwise Mann-Whitney enumeration.
inline double oracle_auc(const std::vector<double>& scores, const std::vector<int>& labels) {
  double wins = 0;
  long pairs = 0;
  for (size_t i = 0; i < scores.size(); ++i) {
    if (!labels[i]) continue;
    for (size_t j = 0; j < scores.size(); ++j) {
      if (labels[j]) continue;
      ++pairs;
      if (scores[i] > scores[j])
        wins += 1.0;
      else if (scores[i] == scores[j])
        wins += 0.5;
    }
  }
  return wins / static_cast<double>(pairs);
}

inline double oracle_iou(const Tensor& pred, const Tensor& gt, double thr) {
  double inter = 0, uni = 0;
  for (long i = 0; i < pred.numel(); ++i) {
    const bool p = pred[i] >= thr, g = gt[i] > 0.5;
    if (p && g) inter += 1;
    if (p || g) uni += 1;
  }
  return uni == 0 ? 1.0 : inter / uni;
}

inline double oracle_pbca(const Tensor& pred, const Tensor& gt, double thr) {
  double ok = 0;
  for (long i = 0; i < pred.numel(); ++i)
    if ((pred[i] >= thr) == (gt[i] > 0.5)) ok += 1;
  return ok / static_cast<double>(pred.numel());
}

inline double oracle_iinc(const Tensor& pred, const Tensor& gt, double thr) {
  double np = 0, ng = 0, ni = 0;
  for (long i = 0; i < pred.numel(); ++i) {
    const bool p = pred[i] >= thr, g = gt[i] > 0.5;
    np += p;
    ng += g;
    ni += p && g;
  }
  if (np == 0 && ng == 0) return 0.0;
  if (np == 0 || ng == 0) return 1.0;
  return 1.0 - 0.5 * (ni / np + ni / ng);
}

// Independent AP: walk predictions in score order with the same greedy
// best-overlap rule, then integrate precision over recall by scanning,
// for every achieved recall level, the best precision at or beyond it.
inline double oracle_ap(const std::vector<metrics::VideoSegments>& videos, double thr) {
  struct Row {
    double score;
    size_t video;
    size_t idx;
  };
  std::vector<Row> rows;
  long total_gt = 0;
  for (size_t v = 0; v < videos.size(); ++v) {
    total_gt += static_cast<long>(videos[v].ground_truth.size());
    for (size_t i = 0; i < videos[v].predictions.size(); ++i)
      rows.push_back({videos[v].predictions[i].score, v, i});
  }
  if (total_gt == 0) return rows.empty() ? 1.0 : 0.0;
  if (rows.empty()) return 0.0;
  std::stable_sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) { return a.score > b.score; });

  std::vector<std::vector<bool>> used(videos.size());
  for (size_t v = 0; v < videos.size(); ++v) used[v].assign(videos[v].ground_truth.size(), false);
  std::vector<int> is_tp;
  for (const Row& r : rows) {
    const Segment& p = videos[r.video].predictions[r.idx];
    double best = -1;
    long arg = -1;
    for (size_t g = 0; g < videos[r.video].ground_truth.size(); ++g) {
      if (used[r.video][g]) continue;
      const Segment& gt = videos[r.video].ground_truth[g];
      const double inter = std::max(0.0, std::min(p.end, gt.end) - std::max(p.start, gt.start));
      const double uni = (p.end - p.start) + (gt.end - gt.start) - inter;
      const double ov = uni > 0 ? inter / uni : 0.0;
      if (ov >= thr && ov > best) {
        best = ov;
        arg = static_cast<long>(g);
      }
    }
    if (arg >= 0) {
      used[r.video][static_cast<size_t>(arg)] = true;
      is_tp.push_back(1);
    } else {
      is_tp.push_back(0);
    }
  }

  double ap = 0;
  long tp_before = 0;
  for (size_t k = 0; k < is_tp.size(); ++k) {
    if (!is_tp[k]) continue;
    ++tp_before;
    // precision achievable at recall >= this one: scan every cut
    double best_prec = 0;
    long tp = 0;
    for (size_t m = 0; m < is_tp.size(); ++m) {
      tp += is_tp[m];
      if (tp >= tp_before) best_prec = std::max(best_prec, static_cast<double>(tp) / static_cast<double>(m + 1));
    }
    ap += best_prec / static_cast<double>(total_gt);
  }
  return ap;
}

}  // namespace omnifd::testing
