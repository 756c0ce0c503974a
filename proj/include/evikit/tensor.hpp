#pragma once

// Dense double-precision tensors with reverse-mode differentiation.
//
// Every op that has at least one input requiring gradients records a node
// carrying its inputs and a backward closure. Nodes are numbered in creation
// order, which is a topological order of the dynamic graph, so backward() is a
// single reverse walk over that linear tape.

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace evikit::nn {

using Shape = std::vector<std::size_t>;

std::size_t numel(const Shape& shape);
std::string to_string(const Shape& shape);

struct TensorNode {
  Shape shape;
  std::vector<double> value;
  std::vector<double> grad;
  bool requires_grad = false;
  std::uint64_t id = 0;
  std::vector<std::shared_ptr<TensorNode>> parents;
  std::function<void(TensorNode&)> backward;

  void ensure_grad()
  {
    if (grad.size() != value.size())
      grad.assign(value.size(), 0.0);
  }
};

class Tensor {
public:
  Tensor() = default;
  Tensor(Shape shape, std::vector<double> data, bool requires_grad = false);

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);

  bool defined() const noexcept { return node_ != nullptr; }
  const Shape& shape() const { return node_->shape; }
  std::size_t dim(std::size_t i) const { return node_->shape.at(i); }
  std::size_t rank() const { return node_->shape.size(); }
  std::size_t numel() const { return node_->value.size(); }

  std::span<double> data() { return node_->value; }
  std::span<const double> data() const { return node_->value; }
  /// Empty until a backward pass has reached this tensor.
  std::span<const double> grad() const { return node_->grad; }
  std::span<double> mutable_grad() { return node_->grad; }

  double item() const;
  bool requires_grad() const { return node_->requires_grad; }
  void set_requires_grad(bool on) { node_->requires_grad = on; }
  void zero_grad() { node_->grad.clear(); }

  /// Same values, cut from the graph.
  Tensor detach() const;

  /// Seeds d(this)/d(this) = 1 (scalar tensors only) and propagates to every
  /// recorded ancestor.
  void backward() const;

  /// Builds an op result; records it on the tape when any input needs gradients.
  static Tensor make_result(Shape shape, std::vector<double> value, std::vector<Tensor> inputs,
                            std::function<void(TensorNode&)> backward);

  TensorNode& node() const { return *node_; }

private:
  explicit Tensor(std::shared_ptr<TensorNode> node) : node_(std::move(node)) {}

  std::shared_ptr<TensorNode> node_;
};

// Elementwise and reduction ops. Shape mismatches throw ValidationError with
// both shapes in the message.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double s);
Tensor relu(const Tensor& x);
Tensor leaky_relu(const Tensor& x, double slope = 0.1);
Tensor sigmoid(const Tensor& x);
Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);

/// Concatenation along the leading (channel) axis; trailing dims must agree.
Tensor concat(const std::vector<Tensor>& parts);

/// C x H x W -> C.
Tensor global_avg_pool(const Tensor& x);

/// x: C x H x W times per-channel weights w: C.
Tensor mul_channels(const Tensor& x, const Tensor& w);

/// y = W x + b with W: out x in, x: in.
Tensor dense(const Tensor& x, const Tensor& weight, const Tensor& bias);

/// x: Ci x H x W, weight: Co x Ci x k x k, bias: Co.
Tensor conv2d(const Tensor& x, const Tensor& weight, const Tensor& bias, int stride = 1, int pad = 0);

/// x: Ci x H x W, weight: Ci x Co x k x k, bias: Co. Output side (H - 1) * stride + k - 2 * pad.
Tensor transposed_conv2d(const Tensor& x, const Tensor& weight, const Tensor& bias, int stride = 2, int pad = 0);

/// Mean of sqrt((pred - target)^2 + eps^2); exactly eps when pred == target.
Tensor charbonnier_loss(const Tensor& pred, const Tensor& target, double eps = 1e-6);

} // namespace evikit::nn
