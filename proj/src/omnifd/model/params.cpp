#include "omnifd/model/params.hpp"

namespace omnifd {

Value ParamStore::create(const std::string& name, Tensor init) {
  if (params_.count(name)) throw Error(errc::BadConfig, "duplicate parameter: " + name);
  Value v = Value::leaf(std::move(init), /*needs_grad=*/true);
  params_.emplace(name, v);
  return v;
}

const Value& ParamStore::get(const std::string& name) const {
  auto it = params_.find(name);
  if (it == params_.end()) throw Error(errc::BadConfig, "unknown parameter: " + name);
  return it->second;
}

long ParamStore::count(const std::string& prefix) const {
  long n = 0;
  for (const auto& [name, v] : params_)
    if (name.rfind(prefix, 0) == 0) n += v.val().numel();
  return n;
}

std::vector<std::pair<std::string, long>> ParamStore::counts_by_namespace(int depth) const {
  std::map<std::string, long> agg;
  for (const auto& [name, v] : params_) {
    std::string key;
    int parts = 0;
    for (char c : name) {
      if (c == '.') {
        ++parts;
        if (parts >= depth) break;
      }
      key.push_back(c);
    }
    agg[key] += v.val().numel();
  }
  return {agg.begin(), agg.end()};
}

namespace init {

Tensor normal(std::vector<long> shape, Rng& rng, double stddev) {
  Tensor t(std::move(shape));
  for (long i = 0; i < t.numel(); ++i) t[i] = rng.normal(0.0, stddev);
  return t;
}

Tensor zeros(std::vector<long> shape) { return Tensor(std::move(shape)); }

Tensor ones(std::vector<long> shape) { return Tensor::full(std::move(shape), 1.0); }

}  // namespace init

}  // namespace omnifd
