#pragma once

#include <string>
#include <vector>

#include "omnifd/core/tensor.hpp"
#include "omnifd/model/heads.hpp"

namespace omnifd::metrics {

struct MetricReport {
  std::string task;
  std::string name;
  double value = 0;
  long support = 0;
  std::string config;  // threshold echo etc.
};

// Fraction of samples where (score >= threshold) equals the label.
double accuracy(const std::vector<double>& scores, const std::vector<int>& labels, double threshold = 0.5);

// Mann-Whitney statistic: P(score_pos > score_neg) + 0.5 P(tie).
double auc(const std::vector<double>& scores, const std::vector<int>& labels);

// |intersection| / |union| after binarizing the prediction at `threshold`.
// Both masks empty yields 1.0.
double iou_binary(const Tensor& pred, const Tensor& gt, double threshold);

// Fraction of pixels whose binarized prediction equals the ground truth.
double pbca(const Tensor& pred, const Tensor& gt, double threshold = 0.5);

// Inverse intersection non-containment; lower is better. Both masks empty
// yields 0, exactly one empty yields 1, otherwise
// 1 - 0.5 (|P&G|/|P| + |P&G|/|G|).
double iinc(const Tensor& pred, const Tensor& gt, double threshold = 0.5);

struct VideoSegments {
  std::vector<Segment> predictions;  // scored
  std::vector<Segment> ground_truth; // scores ignored
};

// Detection AP at one tIoU threshold over a pooled, score-ranked list with
// greedy best-tIoU matching and all-point interpolation.
double temporal_ap(const std::vector<VideoSegments>& videos, double tiou_threshold);

// Mean AP over a threshold set (default 0.5:0.05:0.95).
double temporal_map(const std::vector<VideoSegments>& videos, const std::vector<double>& thresholds = {});

// Mean per-video recall with the top-k predictions per video, averaged
// over the same threshold set. Videos with no ground truth count as fully
// recalled.
double temporal_ar_at(const std::vector<VideoSegments>& videos, long k, const std::vector<double>& thresholds = {});

std::vector<double> default_tiou_thresholds();

}  // namespace omnifd::metrics
