#include "omnifd/harness/config.hpp"

#include <fstream>

namespace omnifd {

using nlohmann::json;

void ExperimentConfig::validate() const {
  if (!tasks.any()) throw Error(errc::BadConfig, "task set is empty");
  model.encoder.validate();
  if (tasks.needs_images() && batch.images_per_batch <= 0)
    throw Error(errc::TaskDataMismatch, "image tasks require images_per_batch > 0");
  if (tasks.needs_videos() && batch.videos_per_batch <= 0)
    throw Error(errc::TaskDataMismatch, "video tasks require videos_per_batch > 0");
  if (steps < 1) throw Error(errc::BadConfig, "steps must be positive");
}

json ExperimentConfig::to_json() const {
  json j;
  j["model"]["encoder"] = {{"patch", model.encoder.patch},
                           {"stage_depths", model.encoder.stage_depths},
                           {"stage_dims", model.encoder.stage_dims},
                           {"stage_heads", model.encoder.stage_heads},
                           {"window", model.encoder.window},
                           {"mlp_ratio", model.encoder.mlp_ratio},
                           {"input_h", model.encoder.input_h},
                           {"input_w", model.encoder.input_w},
                           {"max_frames", model.encoder.max_frames}};
  j["model"]["interaction"] = {{"num_queries", model.interaction.num_queries},
                               {"width", model.interaction.width},
                               {"depth", model.interaction.depth},
                               {"heads", model.interaction.heads},
                               {"ffn_expansion", model.interaction.ffn_expansion}};
  j["model"]["segments"] = {{"score_threshold", model.segments.score_threshold},
                            {"nms_tiou", model.segments.nms_tiou},
                            {"max_keep", model.segments.max_keep}};
  j["model"]["focal"] = {{"alpha", model.focal.alpha}, {"gamma", model.focal.gamma}};
  j["tasks"] = tasks.names();
  j["batch"] = {{"images_per_batch", batch.images_per_batch},
                {"videos_per_batch", batch.videos_per_batch},
                {"frame_count", batch.frame_count},
                {"frame_stride", batch.frame_stride}};
  j["optim"] = {{"lr", optim.lr},         {"weight_decay", optim.weight_decay}, {"beta1", optim.beta1},
                {"beta2", optim.beta2},   {"eps", optim.eps},                   {"clip_norm", optim.clip_norm}};
  j["steps"] = steps;
  j["seed"] = seed;
  j["eval_every"] = eval_every;
  j["threads"] = threads;
  j["data"] = {{"root", data.root}, {"train_split", data.train_split}, {"val_split", data.val_split}};
  j["out_dir"] = out_dir;
  return j;
}

namespace {
template <typename T>
void maybe(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}
}  // namespace

ExperimentConfig ExperimentConfig::from_json(const json& j) {
  ExperimentConfig cfg;
  if (j.contains("model")) {
    const json& m = j.at("model");
    if (m.contains("encoder")) {
      const json& e = m.at("encoder");
      maybe(e, "patch", cfg.model.encoder.patch);
      maybe(e, "stage_depths", cfg.model.encoder.stage_depths);
      maybe(e, "stage_dims", cfg.model.encoder.stage_dims);
      maybe(e, "stage_heads", cfg.model.encoder.stage_heads);
      maybe(e, "window", cfg.model.encoder.window);
      maybe(e, "mlp_ratio", cfg.model.encoder.mlp_ratio);
      maybe(e, "input_h", cfg.model.encoder.input_h);
      maybe(e, "input_w", cfg.model.encoder.input_w);
      maybe(e, "max_frames", cfg.model.encoder.max_frames);
    }
    if (m.contains("interaction")) {
      const json& i = m.at("interaction");
      maybe(i, "num_queries", cfg.model.interaction.num_queries);
      maybe(i, "width", cfg.model.interaction.width);
      maybe(i, "depth", cfg.model.interaction.depth);
      maybe(i, "heads", cfg.model.interaction.heads);
      maybe(i, "ffn_expansion", cfg.model.interaction.ffn_expansion);
    }
    if (m.contains("segments")) {
      const json& s = m.at("segments");
      maybe(s, "score_threshold", cfg.model.segments.score_threshold);
      maybe(s, "nms_tiou", cfg.model.segments.nms_tiou);
      maybe(s, "max_keep", cfg.model.segments.max_keep);
    }
    if (m.contains("focal")) {
      const json& f = m.at("focal");
      maybe(f, "alpha", cfg.model.focal.alpha);
      maybe(f, "gamma", cfg.model.focal.gamma);
    }
  }
  if (j.contains("tasks")) cfg.tasks = TaskSet::parse(j.at("tasks").get<std::vector<std::string>>());
  if (j.contains("batch")) {
    const json& b = j.at("batch");
    maybe(b, "images_per_batch", cfg.batch.images_per_batch);
    maybe(b, "videos_per_batch", cfg.batch.videos_per_batch);
    maybe(b, "frame_count", cfg.batch.frame_count);
    maybe(b, "frame_stride", cfg.batch.frame_stride);
  }
  if (j.contains("optim")) {
    const json& o = j.at("optim");
    maybe(o, "lr", cfg.optim.lr);
    maybe(o, "weight_decay", cfg.optim.weight_decay);
    maybe(o, "beta1", cfg.optim.beta1);
    maybe(o, "beta2", cfg.optim.beta2);
    maybe(o, "eps", cfg.optim.eps);
    maybe(o, "clip_norm", cfg.optim.clip_norm);
  }
  maybe(j, "steps", cfg.steps);
  maybe(j, "seed", cfg.seed);
  maybe(j, "eval_every", cfg.eval_every);
  maybe(j, "threads", cfg.threads);
  if (j.contains("data")) {
    const json& d = j.at("data");
    maybe(d, "root", cfg.data.root);
    maybe(d, "train_split", cfg.data.train_split);
    maybe(d, "val_split", cfg.data.val_split);
  }
  maybe(j, "out_dir", cfg.out_dir);
  return cfg;
}

ExperimentConfig ExperimentConfig::load_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw Error(errc::IoError, "cannot open config " + path);
  json j;
  f >> j;
  return from_json(j);
}

}  // namespace omnifd
