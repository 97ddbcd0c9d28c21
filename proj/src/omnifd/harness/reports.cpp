#include "omnifd/harness/reports.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "omnifd/core/image.hpp"

namespace omnifd {

namespace fs = std::filesystem;
using nlohmann::json;

// ---- FLOP estimate ----------------------------------------------------------

namespace {

struct Grid3 {
  long t, h, w;
  long numel() const { return t * h * w; }
};

double block_macs(long tokens, long window, long dim, double mlp_ratio) {
  const long hidden = static_cast<long>(std::lround(dim * mlp_ratio));
  double macs = 0;
  macs += 3.0 * tokens * dim * dim;      // qkv projections
  macs += 2.0 * tokens * window * dim;   // scores and mixing
  macs += 1.0 * tokens * dim * dim;      // output projection
  macs += 2.0 * tokens * dim * hidden;   // mlp
  return macs;
}

}  // namespace

double estimate_forward_gflops(const ExperimentConfig& cfg, const TaskSet& tasks, bool video) {
  const EncoderConfig& e = cfg.model.encoder;
  InteractionConfig ic = cfg.model.interaction;
  if (ic.width == 0) ic.width = e.stage_dims.back();

  Grid3 grid{video ? cfg.batch.frame_count : 1, e.input_h / e.patch[1], e.input_w / e.patch[2]};
  grid.t = (grid.t + e.patch[0] - 1) / e.patch[0];

  double macs = 0;
  macs += static_cast<double>(grid.numel()) * (e.patch[0] * e.patch[1] * e.patch[2] * 3) * e.stage_dims[0];

  std::vector<Grid3> level_grids;
  for (long s = 0; s < e.stages(); ++s) {
    const long dim = e.stage_dims[static_cast<size_t>(s)];
    const long wt = std::min(e.window[0], grid.t), wh = std::min(e.window[1], grid.h),
               ww = std::min(e.window[2], grid.w);
    for (long b = 0; b < e.stage_depths[static_cast<size_t>(s)]; ++b)
      macs += block_macs(grid.numel(), wt * wh * ww, dim, e.mlp_ratio);
    level_grids.push_back(grid);
    if (s + 1 < e.stages()) {
      const long cells = (grid.t >= 2 ? 2 : 1) * (grid.h >= 2 ? 2 : 1) * (grid.w >= 2 ? 2 : 1);
      Grid3 next{std::max(1L, grid.t / 2), std::max(1L, grid.h / 2), std::max(1L, grid.w / 2)};
      macs += static_cast<double>(next.numel()) * (cells * dim) * e.stage_dims[static_cast<size_t>(s + 1)];
      grid = next;
    }
  }

  // interaction: per-level projections, then depth x (kv/q/out + attention + ffn)
  long m_tokens = 0;
  for (long s = 0; s < e.stages(); ++s) {
    m_tokens += level_grids[static_cast<size_t>(s)].numel();
    macs += static_cast<double>(level_grids[static_cast<size_t>(s)].numel()) *
            e.stage_dims[static_cast<size_t>(s)] * ic.width;
  }
  const long n = ic.num_queries;
  const long hidden = static_cast<long>(ic.width * ic.ffn_expansion);
  for (long d = 0; d < ic.depth; ++d) {
    macs += 2.0 * (n + m_tokens) * ic.width * ic.width;  // k and v
    macs += 2.0 * n * ic.width * ic.width;               // q and out
    macs += 2.0 * n * (n + m_tokens) * ic.width;         // scores and mixing
    macs += 2.0 * n * ic.width * hidden;                 // ffn
  }

  if (!video) {
    if (tasks.image_cls) macs += ic.width;
    if (tasks.spatial_loc) {
      long total_c = 0;
      for (long c : e.stage_dims) total_c += c;
      const long hw1 = level_grids[0].h * level_grids[0].w;
      macs += static_cast<double>(hw1) * total_c * ic.width;  // fuse
      macs += static_cast<double>(hw1) * n * ic.width;        // similarity
      macs += static_cast<double>(hw1) * n;                   // projection
      macs += 4.0 * e.input_h * e.input_w;                    // upsample
    }
  } else {
    if (tasks.video_cls) macs += ic.width;
    if (tasks.temporal_loc) {
      const Grid3 last = level_grids.back();
      macs += static_cast<double>(last.numel()) * e.stage_dims.back();            // pooling
      macs += static_cast<double>(last.t) * e.stage_dims.back() * ic.width;       // projection
      macs += 2.0 * (last.t + n) * ic.width * ic.width;                           // enhance k/v
      macs += 2.0 * last.t * ic.width * ic.width;                                 // enhance q/out
      macs += 2.0 * last.t * (last.t + n) * ic.width;                             // enhance attention
      macs += 2.0 * last.t * ic.width * hidden;                                   // enhance ffn
      macs += 3.0 * last.t * ic.width * 3;                                        // conv heads
    }
  }
  return 2.0 * macs / 1e9;
}

// ---- efficiency report --------------------------------------------------------

namespace {

double measure_latency_ms(const OmniFDModel& model, const MediaTensor& input, int runs) {
  NoGradGuard inference;
  for (int i = 0; i < 5; ++i) model.forward(input);
  std::vector<double> times;
  times.reserve(static_cast<size_t>(runs));
  for (int i = 0; i < runs; ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    model.forward(input);
    const auto t1 = std::chrono::steady_clock::now();
    times.push_back(std::chrono::duration<double, std::milli>(t1 - t0).count());
  }
  std::sort(times.begin(), times.end());
  return times[times.size() / 2];
}

MediaTensor bench_image(const ExperimentConfig& cfg) {
  Rng rng(12345);
  Tensor img({cfg.model.encoder.input_h, cfg.model.encoder.input_w, 3});
  for (long i = 0; i < img.numel(); ++i) img[i] = rng.uniform();
  return to_unified_tensor(img);
}

MediaTensor bench_video(const ExperimentConfig& cfg) {
  Rng rng(54321);
  Tensor clip({cfg.batch.frame_count, cfg.model.encoder.input_h, cfg.model.encoder.input_w, 3});
  for (long i = 0; i < clip.numel(); ++i) clip[i] = rng.uniform();
  return to_unified_tensor(clip, {cfg.batch.frame_count, 1, 0}, 8.0);
}

EfficiencyEntry build_entry(const ExperimentConfig& cfg, const TaskSet& tasks, const std::string& label,
                            int latency_runs) {
  OmniFDModel model(cfg.model, tasks, cfg.seed);
  EfficiencyEntry e;
  e.label = label;
  e.params = model.params().count();
  e.image_gflops = tasks.needs_images() ? estimate_forward_gflops(cfg, tasks, false) : 0;
  e.video_gflops = tasks.needs_videos() ? estimate_forward_gflops(cfg, tasks, true) : 0;
  if (latency_runs > 0) {
    if (tasks.needs_images()) e.image_latency_ms = measure_latency_ms(model, bench_image(cfg), latency_runs);
    if (tasks.needs_videos()) e.video_latency_ms = measure_latency_ms(model, bench_video(cfg), latency_runs);
  }
  return e;
}

}  // namespace

EfficiencyReport efficiency_report(const ExperimentConfig& cfg, int latency_runs) {
  EfficiencyReport rep;
  rep.unified = build_entry(cfg, TaskSet::all(), "all_tasks_unified", latency_runs);
  {
    OmniFDModel model(cfg.model, TaskSet::all(), cfg.seed);
    rep.unified_namespaces = model.params().counts_by_namespace(2);
  }
  const std::pair<TaskSet, std::string> singles[4] = {
      {TaskSet{true, false, false, false}, "image_cls"},
      {TaskSet{false, true, false, false}, "video_cls"},
      {TaskSet{false, false, true, false}, "spatial_loc"},
      {TaskSet{false, false, false, true}, "temporal_loc"},
  };
  long sum_single = 0;
  for (const auto& [tasks, name] : singles) {
    rep.single_task.push_back(build_entry(cfg, tasks, name, latency_runs));
    sum_single += rep.single_task.back().params;
  }
  rep.param_ratio = static_cast<double>(rep.unified.params) / static_cast<double>(sum_single);
  rep.reduction_pct = 100.0 * (1.0 - rep.param_ratio);
  return rep;
}

json EfficiencyReport::to_json() const {
  json j;
  auto entry = [](const EfficiencyEntry& e) {
    return json{{"label", e.label},
                {"params", e.params},
                {"image_gflops", e.image_gflops},
                {"video_gflops", e.video_gflops},
                {"image_latency_ms", e.image_latency_ms},
                {"video_latency_ms", e.video_latency_ms}};
  };
  j["unified"] = entry(unified);
  j["single_task"] = json::array();
  for (const auto& e : single_task) j["single_task"].push_back(entry(e));
  j["namespaces"] = json::array();
  for (const auto& [name, count] : unified_namespaces) j["namespaces"].push_back({{"name", name}, {"params", count}});
  j["param_ratio"] = param_ratio;
  j["reduction_pct"] = reduction_pct;
  return j;
}

std::string EfficiencyReport::to_table() const {
  std::ostringstream os;
  os << "model                 params     img GF   vid GF   img ms   vid ms\n";
  auto row = [&](const EfficiencyEntry& e) {
    char buf[160];
    std::snprintf(buf, sizeof(buf), "%-20s %9ld %8.3f %8.3f %8.2f %8.2f\n", e.label.c_str(), e.params, e.image_gflops,
                  e.video_gflops, e.image_latency_ms, e.video_latency_ms);
    os << buf;
  };
  row(unified);
  long sum = 0;
  for (const auto& e : single_task) {
    row(e);
    sum += e.params;
  }
  char buf[160];
  std::snprintf(buf, sizeof(buf), "single-task total: %ld params; unified/sum ratio %.4f (%.2f%% reduction)\n", sum,
                param_ratio, reduction_pct);
  os << buf;
  os << "unified parameter namespaces:\n";
  for (const auto& [name, count] : unified_namespaces) {
    std::snprintf(buf, sizeof(buf), "  %-24s %9ld\n", name.c_str(), count);
    os << buf;
  }
  return os.str();
}

// ---- ablation -----------------------------------------------------------------

namespace {

struct Agg {
  std::vector<double> values;
  AblationCell cell() const {
    AblationCell c;
    if (values.empty()) return c;
    c.present = true;
    double sum = 0;
    for (double v : values) sum += v;
    c.mean = sum / static_cast<double>(values.size());
    double var = 0;
    for (double v : values) var += (v - c.mean) * (v - c.mean);
    c.stddev = values.size() > 1 ? std::sqrt(var / static_cast<double>(values.size() - 1)) : 0.0;
    return c;
  }
};

std::string subset_label(const TaskSet& t) {
  std::string s;
  for (const auto& n : t.names()) {
    if (!s.empty()) s += "+";
    s += n;
  }
  return s;
}

}  // namespace

AblationTable ablate_tasks(const ExperimentConfig& base, const std::vector<TaskSet>& subsets,
                           const std::vector<std::uint64_t>& seeds, const data::Dataset& train,
                           const data::Dataset& val, std::ostream* progress) {
  if (subsets.size() < 1) throw Error(errc::BadConfig, "ablation needs at least one subset");
  AblationTable table;
  const char* metric_keys[8][2] = {{"video_cls", "acc"},    {"video_cls", "auc"},   {"temporal_loc", "ap@0.5"},
                                   {"temporal_loc", "map"}, {"image_cls", "acc"},   {"image_cls", "auc"},
                                   {"spatial_loc", "iou"},  {"spatial_loc", "iou_diff"}};

  for (const TaskSet& subset : subsets) {
    std::array<Agg, 8> agg;
    for (std::uint64_t seed : seeds) {
      ExperimentConfig cfg = base;
      cfg.tasks = subset;
      cfg.seed = seed;
      cfg.batch.images_per_batch = subset.needs_images() ? base.batch.images_per_batch : 0;
      cfg.batch.videos_per_batch = subset.needs_videos() ? base.batch.videos_per_batch : 0;
      cfg.out_dir = (fs::path(base.out_dir) / ("ablate_" + subset_label(subset) + "_s" + std::to_string(seed))).string();
      if (progress) (*progress) << "[ablate] " << subset_label(subset) << " seed " << seed << "\n" << std::flush;

      OmniFDModel model(cfg.model, subset, seed);
      Trainer trainer(cfg, model, train, nullptr);
      trainer.run();
      Evaluator ev(cfg, model);
      auto out = ev.evaluate(val, subset);
      for (const auto& r : out.reports)
        for (int k = 0; k < 8; ++k)
          if (r.task == metric_keys[k][0] && r.name == metric_keys[k][1]) agg[static_cast<size_t>(k)].values.push_back(r.value);
    }
    AblationRow row;
    row.setting = subset_label(subset);
    for (int k = 0; k < 8; ++k) row.cells[static_cast<size_t>(k)] = agg[static_cast<size_t>(k)].cell();
    table.rows.push_back(std::move(row));
  }
  return table;
}

json AblationTable::to_json() const {
  const char* cols[8] = {"video_acc", "video_auc",  "temporal_ap50", "temporal_map",
                         "image_acc", "image_auc",  "spatial_iou",   "spatial_iou_diff"};
  json j = json::array();
  for (const auto& row : rows) {
    json r;
    r["setting"] = row.setting;
    for (int k = 0; k < 8; ++k) {
      if (row.cells[static_cast<size_t>(k)].present)
        r[cols[k]] = {{"mean", row.cells[static_cast<size_t>(k)].mean}, {"std", row.cells[static_cast<size_t>(k)].stddev}};
      else
        r[cols[k]] = nullptr;
    }
    j.push_back(r);
  }
  return j;
}

std::string AblationTable::to_table() const {
  std::ostringstream os;
  os << "setting                                  | vid acc   vid auc   | tmp ap50  tmp map   | img acc   img auc   | sp iou    sp ioud\n";
  for (const auto& row : rows) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%-40s |", row.setting.c_str());
    os << buf;
    for (int k = 0; k < 8; ++k) {
      const AblationCell& c = row.cells[static_cast<size_t>(k)];
      if (c.present)
        std::snprintf(buf, sizeof(buf), " %5.2f±%4.2f", 100.0 * c.mean, 100.0 * c.stddev);
      else
        std::snprintf(buf, sizeof(buf), "     -    ");
      os << buf;
      if (k % 2 == 1 && k < 7) os << " |";
    }
    os << "\n";
  }
  return os.str();
}

// ---- attention export -----------------------------------------------------------

void export_attention(const OmniFDModel& model, const ExperimentConfig& cfg, const data::Dataset& ds,
                      long max_samples, long level, const std::string& out_dir) {
  fs::create_directories(out_dir);
  NoGradGuard inference;
  long exported = 0;
  for (long i = 0; i < ds.size() && exported < max_samples; ++i) {
    const data::Sample& s = ds.sample(i);
    MediaTensor mt;
    Tensor base_frame;
    if (s.ann.is_video) {
      FrameSampling sampling{cfg.batch.frame_count, cfg.batch.frame_stride, 0};
      mt = to_unified_tensor(s.pixels, sampling, s.ann.fps, cfg.model.encoder.input_h, cfg.model.encoder.input_w);
      base_frame = Tensor({s.pixels.dim(1), s.pixels.dim(2), 3});
      for (long e = 0; e < base_frame.numel(); ++e) base_frame[e] = s.pixels[e];
    } else {
      mt = to_unified_tensor(s.pixels, cfg.model.encoder.input_h, cfg.model.encoder.input_w);
      base_frame = s.pixels;
    }
    auto out = model.forward(mt, /*capture_attention=*/true);
    const long n = model.config().interaction.num_queries;
    auto maps = attention_maps(out.attention, out.layout, n, level);

    const long h = mt.height(), w = mt.width();
    for (long q = 0; q < n; ++q) {
      const AttentionMap& m = maps[static_cast<size_t>(q)];
      // upsample to the input resolution and normalize for display
      Tensor grid3({m.grid.dim(0), m.grid.dim(1), 1});
      for (long e = 0; e < m.grid.numel(); ++e) grid3[e] = m.grid[e];
      Tensor up = img::resize_bilinear(grid3, h, w);
      double mx = 0;
      for (long e = 0; e < up.numel(); ++e) mx = std::max(mx, up[e]);
      Tensor overlay({h, w, 3});
      for (long p = 0; p < h * w; ++p) {
        double gray = (base_frame[p * 3] + base_frame[p * 3 + 1] + base_frame[p * 3 + 2]) / 3.0;
        const double heat = mx > 0 ? up[p] / mx : 0.0;
        overlay[p * 3 + 0] = std::min(1.0, 0.4 * gray + 0.6 * heat);
        overlay[p * 3 + 1] = 0.4 * gray;
        overlay[p * 3 + 2] = 0.4 * gray;
      }
      const std::string stem = s.ann.sample_id + "_q" + std::to_string(q) + "_l" + std::to_string(level);
      img::write_ppm((fs::path(out_dir) / (stem + ".ppm")).string(), overlay);
      json meta = {{"sample_id", s.ann.sample_id}, {"query", q},          {"level", level},
                   {"attention_mass", m.mass},     {"resolution", {h, w}}, {"grid", {m.grid.dim(0), m.grid.dim(1)}}};
      std::ofstream mf((fs::path(out_dir) / (stem + ".json")).string());
      mf << meta.dump(1) << "\n";
    }
    ++exported;
  }
}

}  // namespace omnifd
