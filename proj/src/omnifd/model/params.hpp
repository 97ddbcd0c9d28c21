#pragma once

#include <map>
#include <string>
#include <vector>

#include "omnifd/core/graph.hpp"
#include "omnifd/core/rng.hpp"

namespace omnifd {

// Registry of named trainable tensors. Names are hierarchical
// ("encoder.stage0.block0.attn.wq") and the map is ordered, which fixes a
// deterministic iteration order for optimizers and checkpoints.
class ParamStore {
 public:
  Value create(const std::string& name, Tensor init);
  const Value& get(const std::string& name) const;
  bool has(const std::string& name) const { return params_.count(name) > 0; }

  const std::map<std::string, Value>& all() const { return params_; }

  long count(const std::string& prefix = "") const;
  // Aggregates parameter counts by the first `depth` name components.
  std::vector<std::pair<std::string, long>> counts_by_namespace(int depth) const;

 private:
  std::map<std::string, Value> params_;
};

namespace init {
Tensor normal(std::vector<long> shape, Rng& rng, double stddev);
Tensor zeros(std::vector<long> shape);
Tensor ones(std::vector<long> shape);
}  // namespace init

}  // namespace omnifd
