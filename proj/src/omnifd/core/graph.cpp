#include "omnifd/core/graph.hpp"

#include <algorithm>

namespace omnifd {

namespace {
std::atomic<std::uint64_t> g_next_id{1};
thread_local int g_no_grad_depth = 0;
}  // namespace

bool grad_enabled() { return g_no_grad_depth == 0; }

NoGradGuard::NoGradGuard() { ++g_no_grad_depth; }
NoGradGuard::~NoGradGuard() { --g_no_grad_depth; }

void GradMap::add(const Node* n, const Tensor& g) {
  auto it = grads_.find(n);
  if (it == grads_.end())
    grads_.emplace(n, g);
  else
    it->second.add_(g);
}

const Tensor* GradMap::find(const Node* n) const {
  auto it = grads_.find(n);
  return it == grads_.end() ? nullptr : &it->second;
}

Tensor* GradMap::find_mutable(const Node* n) {
  auto it = grads_.find(n);
  return it == grads_.end() ? nullptr : &it->second;
}

void GradMap::merge(const GradMap& other) {
  for (const auto& [node, g] : other.grads_) add(node, g);
}

Value Value::leaf(Tensor v, bool needs_grad) {
  auto n = std::make_shared<Node>();
  n->val = std::move(v);
  n->needs_grad = needs_grad;
  n->leaf = true;
  n->id = g_next_id.fetch_add(1, std::memory_order_relaxed);
  return Value(std::move(n));
}

namespace detail {

NodeP make_node(Tensor val, std::vector<NodeP> parents, std::function<void(Node&, GradMap&)> backward_fn) {
  auto n = std::make_shared<Node>();
  n->val = std::move(val);
  bool wants = false;
  if (grad_enabled()) {
    for (const auto& p : parents)
      if (p && p->needs_grad) wants = true;
  }
  if (wants) {
    n->needs_grad = true;
    n->parents = std::move(parents);
    n->backward = std::move(backward_fn);
  }
  n->id = g_next_id.fetch_add(1, std::memory_order_relaxed);
  return n;
}

void accumulate(Node& parent, GradMap& sink, const Tensor& g) {
  if (!parent.needs_grad) return;
  if (parent.leaf) {
    sink.add(&parent, g);
    return;
  }
  if (!parent.grad.defined())
    parent.grad = g;
  else
    parent.grad.add_(g);
}

}  // namespace detail

void backward(const Value& root, GradMap& sink) {
  if (!root.defined() || !root.node()->needs_grad) return;
  if (root.val().numel() != 1)
    throw Error(errc::ShapeMismatch, "backward: root must be a scalar");

  // Collect the reachable grad-requiring subgraph; creation ids give a
  // topological order because parents are always created before children.
  std::vector<Node*> nodes;
  std::vector<Node*> stack{root.node()};
  std::unordered_map<Node*, bool> seen;
  seen.reserve(256);
  while (!stack.empty()) {
    Node* n = stack.back();
    stack.pop_back();
    if (seen.count(n)) continue;
    seen.emplace(n, true);
    if (!n->leaf) nodes.push_back(n);
    for (const auto& p : n->parents)
      if (p && p->needs_grad && !seen.count(p.get())) stack.push_back(p.get());
  }
  std::sort(nodes.begin(), nodes.end(), [](const Node* a, const Node* b) { return a->id > b->id; });

  root.node()->grad = Tensor::full(root.val().shape(), 1.0);
  for (Node* n : nodes) {
    if (!n->grad.defined()) continue;  // unreachable from root's gradient flow
    if (n->backward) n->backward(*n, sink);
    n->grad = Tensor();  // release interior gradient memory eagerly
  }
}

}  // namespace omnifd
