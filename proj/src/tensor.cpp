#include "pathcnn/tensor.hpp"

#include <algorithm>
#include <sstream>
#include <unordered_set>

namespace pathcnn {

std::int64_t shape_numel(const Shape& shape) {
  std::int64_t n = 1;
  for (int d : shape) {
    if (d <= 0) throw ShapeError("non-positive dimension in shape " + shape_str(shape));
    n *= d;
  }
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

bool same_shape(const Shape& a, const Shape& b) { return a == b; }

namespace detail {

void Node::ensure_grad() {
  if (grad.empty()) grad.assign(value.size(), 0.0);
}

}  // namespace detail

Tensor Tensor::zeros(const Shape& shape) {
  auto n = std::make_shared<detail::Node>();
  n->shape = shape;
  n->value.assign(static_cast<size_t>(shape_numel(shape)), 0.0);
  return wrap(std::move(n));
}

Tensor Tensor::full(const Shape& shape, double v) {
  Tensor t = zeros(shape);
  for (auto& x : t.values()) x = v;
  return t;
}

Tensor Tensor::from(const Shape& shape, std::vector<double> values) {
  if (static_cast<std::int64_t>(values.size()) != shape_numel(shape))
    throw ShapeError("value count " + std::to_string(values.size()) +
                     " does not match shape " + shape_str(shape));
  auto n = std::make_shared<detail::Node>();
  n->shape = shape;
  n->value = std::move(values);
  return wrap(std::move(n));
}

detail::Node* Tensor::node() const {
  if (!node_) throw ContractError("use of undefined tensor");
  return node_.get();
}

double Tensor::item() const {
  if (numel() != 1) throw ContractError("item() on non-scalar tensor " + shape_str(shape()));
  return values()[0];
}

Tensor& Tensor::set_requires_grad(bool v) {
  node()->requires_grad = v;
  return *this;
}

std::vector<double>& Tensor::grad() {
  node()->ensure_grad();
  return node()->grad;
}

const std::vector<double>& Tensor::grad() const {
  if (node()->grad.empty())
    throw ContractError("gradient not populated for tensor " + shape_str(shape()));
  return node()->grad;
}

void Tensor::zero_grad() {
  auto& g = node()->grad;
  if (!g.empty()) std::fill(g.begin(), g.end(), 0.0);
}

Tensor Tensor::detach() const {
  auto n = std::make_shared<detail::Node>();
  n->shape = shape();
  n->value = values();
  return wrap(std::move(n));
}

namespace {
thread_local bool g_grad_enabled = true;
}

bool grad_enabled() { return g_grad_enabled; }
void set_grad_enabled(bool v) { g_grad_enabled = v; }

std::vector<detail::Node*> topo_order(const Tensor& root) {
  // Iterative post-order DFS over parent edges; result reversed so the root
  // comes first. The graph is acyclic by construction (ops only reference
  // existing tensors), so the walk terminates.
  std::vector<detail::Node*> order;
  std::unordered_set<detail::Node*> visited;
  struct Frame {
    detail::Node* n;
    size_t next_parent;
  };
  std::vector<Frame> stack;
  detail::Node* r = root.node();
  visited.insert(r);
  stack.push_back({r, 0});
  while (!stack.empty()) {
    Frame& f = stack.back();
    if (f.next_parent < f.n->parents.size()) {
      detail::Node* p = f.n->parents[f.next_parent++].node();
      if (visited.insert(p).second) stack.push_back({p, 0});
    } else {
      order.push_back(f.n);
      stack.pop_back();
    }
  }
  std::reverse(order.begin(), order.end());
  return order;
}

int backward(const Tensor& root) {
  if (root.numel() != 1)
    throw ContractError("backward root must be scalar, got " + shape_str(root.shape()));
  if (!root.requires_grad())
    throw ContractError("backward root does not require grad (nothing recorded)");
  auto order = topo_order(root);
  root.node()->ensure_grad();
  root.node()->grad[0] += 1.0;
  int visited = 0;
  for (detail::Node* n : order) {
    ++visited;
    if (n->backprop) {
      n->ensure_grad();
      n->backprop(*n);
    }
  }
  return visited;
}

}  // namespace pathcnn
