#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

namespace derain {

/// Extents of a dense row-major tensor. Canonical image layout is
/// channels x height x width; a batch extent may be prepended when needed.
using Shape = std::vector<int>;

std::string shape_str(const Shape& s);
int shape_numel(const Shape& s);

namespace detail {

struct TensorNode {
  Shape shape;
  std::vector<double> data;
  std::vector<double> grad;  // empty until first needed; same length as data
  bool requires_grad = false;
  std::vector<std::shared_ptr<TensorNode>> parents;
  std::function<void(TensorNode&)> backward_fn;  // null for leaves
  const char* op = "leaf";

  int numel() const { return static_cast<int>(data.size()); }
  void ensure_grad() {
    if (grad.empty()) grad.assign(data.size(), 0.0);
  }
};

}  // namespace detail

/// Dense 64-bit tensor participating in a reverse-mode autodiff graph.
///
/// Tensors are handles: copies share the underlying node. Values are
/// immutable once a tensor has been consumed by an op; the only sanctioned
/// in-place mutations are gradient buffers and raw_data() edits on leaf
/// tensors between graph builds (parameter updates, finite-difference
/// probes). Ops record the graph only when an input requires gradients,
/// so pure numeric uses carry no tape overhead.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(const Shape& shape, bool requires_grad = false);
  static Tensor full(const Shape& shape, double value, bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);
  static Tensor from_data(const Shape& shape, std::vector<double> data,
                          bool requires_grad = false);

  /// Extension point used by every built-in op: wraps precomputed output
  /// data as a graph node. `backward` receives the output node and must
  /// accumulate (+=) into the grads of parents that require them.
  static Tensor from_op(const char* op, const Shape& shape,
                        std::vector<double> data, std::vector<Tensor> parents,
                        std::function<void(detail::TensorNode&)> backward);

  bool valid() const { return node_ != nullptr; }
  const Shape& shape() const { return node_->shape; }
  int rank() const { return static_cast<int>(node_->shape.size()); }
  int dim(int i) const { return node_->shape[static_cast<size_t>(i)]; }
  int numel() const { return node_->numel(); }

  const std::vector<double>& data() const { return node_->data; }
  /// Mutable view for leaf construction and parameter updates. Editing a
  /// tensor that already feeds a live graph invalidates that graph.
  std::vector<double>& raw_data() { return node_->data; }

  /// Value of a one-element tensor.
  double value() const;
  /// Element access for rank-3 (C,H,W) tensors.
  double at(int c, int y, int x) const;

  bool requires_grad() const { return node_->requires_grad; }
  void set_requires_grad(bool v) { node_->requires_grad = v; }
  bool has_grad() const { return node_ && !node_->grad.empty(); }
  const std::vector<double>& grad() const;
  void zero_grad();

  /// Same values, no graph history, requires_grad off.
  Tensor detach() const;

  /// True when both handles reference the same graph node.
  bool same_node(const Tensor& other) const { return node_ == other.node_; }

  const std::shared_ptr<detail::TensorNode>& node() const { return node_; }

 private:
  explicit Tensor(std::shared_ptr<detail::TensorNode> node) : node_(std::move(node)) {}
  std::shared_ptr<detail::TensorNode> node_;
};

// ---------------------------------------------------------------------------
// Elementwise ops. add/sub/mul accept equal shapes, a one-element operand
// broadcast against anything, or single-channel (1,H,W) against (C,H,W).
// ---------------------------------------------------------------------------
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor add(const Tensor& a, double b);
Tensor sub(const Tensor& a, double b);
Tensor sub(double a, const Tensor& b);
Tensor mul(const Tensor& a, double b);

/// Elementwise 1/a. Every input element must satisfy |a| >= kEpsRecip.
Tensor reciprocal(const Tensor& a);

/// Elementwise max(a, 0); the subgradient at exactly 0 is 0.
Tensor relu(const Tensor& a);

/// 2D cross-correlation (no kernel flip) with zero padding, the same
/// convention forward and backward. input (Cin,H,W), kernel (Cout,Cin,k,k),
/// bias (Cout); output (Cout,H',W') with H' = (H + 2*padding - k)/stride + 1.
Tensor conv2d(const Tensor& input, const Tensor& kernel, const Tensor& bias,
              int stride = 1, int padding = 0);

/// Stacks rank-3 parts along the channel axis; all parts share H and W.
Tensor concat_channels(const std::vector<Tensor>& parts);

/// Mean of squared differences, as a one-element tensor.
Tensor reduce_mse(const Tensor& pred, const Tensor& target);

/// Sum of all elements, as a one-element tensor.
Tensor reduce_sum(const Tensor& a);

/// Reverse-mode sweep from a one-element loss. Visits each reachable node
/// exactly once in reverse topological order and accumulates dLoss/dLeaf
/// into the grad of every requires_grad leaf. Grads accumulate across
/// calls; use zero_grad() between steps.
void backward(const Tensor& loss);

}  // namespace derain
