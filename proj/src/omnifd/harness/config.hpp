#pragma once

#include <json.hpp>
#include <string>

#include "omnifd/data/dataset.hpp"
#include "omnifd/model/model.hpp"

namespace omnifd {

struct OptimConfig {
  double lr = 1e-4;
  double weight_decay = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double clip_norm = 1.0;
};

struct DataConfig {
  std::string root;
  std::string train_split = "train";
  std::string val_split = "val";
};

struct ExperimentConfig {
  ModelConfig model;
  TaskSet tasks = TaskSet::all();
  data::BatchSpec batch;
  OptimConfig optim;
  long steps = 3000;
  std::uint64_t seed = 1;
  long eval_every = 500;
  int threads = 0;  // 0 = hardware concurrency
  DataConfig data;
  std::string out_dir = "runs/run";

  void validate() const;

  nlohmann::json to_json() const;
  static ExperimentConfig from_json(const nlohmann::json& j);
  static ExperimentConfig load_file(const std::string& path);
};

}  // namespace omnifd
