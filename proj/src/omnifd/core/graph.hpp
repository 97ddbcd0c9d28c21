#pragma once

#include <atomic>
#include <functional>
#include <memory>
#include <unordered_map>
#include <vector>

#include "omnifd/core/tensor.hpp"

namespace omnifd {

struct Node;
using NodeP = std::shared_ptr<Node>;

// Gradient sink for leaf nodes (parameters and watched inputs). Interior
// node gradients live on the nodes themselves; they are private to one
// backward pass. Leaf gradients go through the map so that several
// per-sample graphs sharing the same parameters can run backward on
// different threads and be reduced in a deterministic order afterwards.
class GradMap {
 public:
  void add(const Node* n, const Tensor& g);
  const Tensor* find(const Node* n) const;
  Tensor* find_mutable(const Node* n);
  void merge(const GradMap& other);  // this += other
  void clear() { grads_.clear(); }
  bool empty() const { return grads_.empty(); }
  size_t size() const { return grads_.size(); }

 private:
  std::unordered_map<const Node*, Tensor> grads_;
};

struct Node {
  Tensor val;
  Tensor grad;  // interior-node gradient, valid only during a backward pass
  bool needs_grad = false;
  bool leaf = false;
  std::uint64_t id = 0;  // creation order; a valid topological order
  std::vector<NodeP> parents;
  std::function<void(Node&, GradMap&)> backward;
};

// Handle to a node in the computation graph. Cheap to copy.
class Value {
 public:
  Value() = default;
  explicit Value(NodeP n) : node_(std::move(n)) {}

  // Leaf node holding a plain tensor. needs_grad leaves receive gradients
  // through the GradMap passed to backward().
  static Value leaf(Tensor v, bool needs_grad = false);

  bool defined() const { return node_ != nullptr; }
  const Tensor& val() const { return node_->val; }
  // the handle is shared-pointer-like: node mutation does not require a
  // mutable handle (used by optimizers and test fixtures)
  Tensor& mutable_val() const { return node_->val; }
  Node* node() const { return node_.get(); }
  const NodeP& ptr() const { return node_; }
  bool needs_grad() const { return node_ && node_->needs_grad; }

  long rows() const { return node_->val.rows(); }
  long cols() const { return node_->val.cols(); }

 private:
  NodeP node_;
};

// Runs reverse-mode accumulation from a scalar root. Leaf gradients are
// written into `sink`; interior gradients are discarded when the pass ends.
void backward(const Value& root, GradMap& sink);

// While a NoGradGuard is alive on a thread, ops do not record parents or
// backward closures; forward values are still computed. Used for inference.
struct NoGradGuard {
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;
};

bool grad_enabled();

namespace detail {
NodeP make_node(Tensor val, std::vector<NodeP> parents, std::function<void(Node&, GradMap&)> backward_fn);
// Adds g into the right gradient slot for `parent` (interior grad or sink).
void accumulate(Node& parent, GradMap& sink, const Tensor& g);
}  // namespace detail

}  // namespace omnifd
