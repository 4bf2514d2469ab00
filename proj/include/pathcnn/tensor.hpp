#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

namespace pathcnn {

class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Shape/dimension violations (matmul inner dims, channel counts, ...).
class ShapeError : public Error {
 public:
  explicit ShapeError(const std::string& msg) : Error(msg) {}
};

// Contract violations (non-scalar backward root, missing gradient, ...).
class ContractError : public Error {
 public:
  explicit ContractError(const std::string& msg) : Error(msg) {}
};

// Malformed files (dataset formats, checkpoints).
class FormatError : public Error {
 public:
  explicit FormatError(const std::string& msg) : Error(msg) {}
};

using Shape = std::vector<int>;

std::int64_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);
bool same_shape(const Shape& a, const Shape& b);

class Tensor;

namespace detail {

// One recorded value in the computation DAG. `parents` are the inputs of the
// op that produced this node; `backprop` pulls this node's gradient into them.
// Leaves (parameters, inputs) have no parents and no backprop.
struct Node {
  Shape shape;
  std::vector<double> value;
  std::vector<double> grad;  // empty until first touched
  bool requires_grad = false;
  std::vector<Tensor> parents;
  std::function<void(Node&)> backprop;

  std::int64_t numel() const { return static_cast<std::int64_t>(value.size()); }
  void ensure_grad();
};

}  // namespace detail

// Dense row-major n-d array with an optional gradient of the same shape.
// Value-semantics handle: copies share the underlying node.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(const Shape& shape);
  static Tensor full(const Shape& shape, double v);
  static Tensor from(const Shape& shape, std::vector<double> values);
  static Tensor scalar(double v) { return from({1}, {v}); }

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const { return node()->shape; }
  int ndim() const { return static_cast<int>(node()->shape.size()); }
  int dim(int i) const { return node()->shape.at(static_cast<size_t>(i)); }
  std::int64_t numel() const { return node()->numel(); }

  double* data() { return node()->value.data(); }
  const double* data() const { return node()->value.data(); }
  std::vector<double>& values() { return node()->value; }
  const std::vector<double>& values() const { return node()->value; }

  // Scalar extraction; requires numel() == 1.
  double item() const;

  bool requires_grad() const { return node()->requires_grad; }
  Tensor& set_requires_grad(bool v);

  bool has_grad() const { return !node()->grad.empty(); }
  std::vector<double>& grad();              // allocates zeros on first access
  const std::vector<double>& grad() const;  // throws if absent
  void zero_grad();

  // Value copy detached from the graph (no parents, requires_grad off).
  Tensor detach() const;

  detail::Node* node() const;
  const std::shared_ptr<detail::Node>& node_ptr() const { return node_; }

  static Tensor wrap(std::shared_ptr<detail::Node> n) {
    Tensor t;
    t.node_ = std::move(n);
    return t;
  }

 private:
  std::shared_ptr<detail::Node> node_;
};

// Thread-local switch: while disabled, ops do not record the graph and their
// results have requires_grad == false. Used for evaluation passes.
bool grad_enabled();
void set_grad_enabled(bool v);

struct NoGradGuard {
  NoGradGuard() : prev_(grad_enabled()) { set_grad_enabled(false); }
  ~NoGradGuard() { set_grad_enabled(prev_); }
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool prev_;
};

// Reverse-mode sweep from a scalar root. Gradients accumulate into every
// tracked ancestor; each recorded node is visited exactly once, in reverse
// topological order. Returns the number of graph nodes visited. Repeated
// calls without zero_grad accumulate.
int backward(const Tensor& root);

// Reverse topological order of the recorded graph reachable from `root`
// (root first). Exposed for tests of the traversal contract.
std::vector<detail::Node*> topo_order(const Tensor& root);

}  // namespace pathcnn
