#pragma once

#include <string>
#include <vector>

#include "omnifd/harness/config.hpp"
#include "omnifd/metrics/metrics.hpp"

namespace omnifd {

// Deterministic evaluation: center-clip video sampling, no augmentation,
// every applicable metric plus a raw prediction dump.
class Evaluator {
 public:
  Evaluator(const ExperimentConfig& cfg, const OmniFDModel& model);

  struct Result {
    std::vector<metrics::MetricReport> reports;
    nlohmann::json dump;  // array of per-sample records
  };

  Result evaluate(const data::Dataset& ds, const TaskSet& requested) const;

  // Mean of the present-task primary metrics (image Acc, video Acc,
  // spatial IoU, temporal mAP); used for best-checkpoint selection.
  static double primary_score(const std::vector<metrics::MetricReport>& reports);

 private:
  const ExperimentConfig& cfg_;
  const OmniFDModel& model_;
};

void write_metric_reports(const std::string& path, long step, const std::vector<metrics::MetricReport>& reports);

}  // namespace omnifd
