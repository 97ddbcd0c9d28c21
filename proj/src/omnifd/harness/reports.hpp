#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "omnifd/harness/trainer.hpp"

namespace omnifd {

// ---- efficiency accounting ------------------------------------------------

struct EfficiencyEntry {
  std::string label;
  long params = 0;
  double image_gflops = 0;  // analytic forward estimate, one image
  double video_gflops = 0;  // one clip at the configured frame count
  double image_latency_ms = 0;
  double video_latency_ms = 0;
};

struct EfficiencyReport {
  EfficiencyEntry unified;                        // all requested tasks, one model
  std::vector<EfficiencyEntry> single_task;       // one model per task
  std::vector<std::pair<std::string, long>> unified_namespaces;
  double param_ratio = 0;      // unified / sum of single-task models
  double reduction_pct = 0;    // 100 * (1 - ratio)

  nlohmann::json to_json() const;
  std::string to_table() const;
};

// Builds the unified all-task model plus four single-task clones, counts
// parameters per namespace, estimates forward FLOPs from shapes, and
// measures wall-clock forward latency (median of `latency_runs` after
// warmup; 0 skips the measurement).
EfficiencyReport efficiency_report(const ExperimentConfig& cfg, int latency_runs = 25);

// Analytic forward-pass FLOPs (2 x multiply-accumulates) for one input.
double estimate_forward_gflops(const ExperimentConfig& cfg, const TaskSet& tasks, bool video);

// ---- task-combination ablation ---------------------------------------------

struct AblationCell {
  bool present = false;
  double mean = 0;
  double stddev = 0;
};

struct AblationRow {
  std::string setting;
  // columns: video acc/auc, temporal ap@0.5/map, image acc/auc, spatial iou/iou_diff
  std::array<AblationCell, 8> cells;
};

struct AblationTable {
  std::vector<AblationRow> rows;
  nlohmann::json to_json() const;
  std::string to_table() const;
};

// Trains one model per (subset, seed) from the base config and evaluates
// it on the validation split; reports mean and stddev over seeds.
AblationTable ablate_tasks(const ExperimentConfig& base, const std::vector<TaskSet>& subsets,
                           const std::vector<std::uint64_t>& seeds, const data::Dataset& train,
                           const data::Dataset& val, std::ostream* progress = nullptr);

// ---- attention-map export ----------------------------------------------------

// Writes per-query heatmap overlays (PPM) upsampled to the input
// resolution, plus one JSON metadata sidecar per figure.
void export_attention(const OmniFDModel& model, const ExperimentConfig& cfg, const data::Dataset& ds,
                      long max_samples, long level, const std::string& out_dir);

}  // namespace omnifd
