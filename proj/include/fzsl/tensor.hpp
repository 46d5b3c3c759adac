#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "fzsl/errors.hpp"

namespace fzsl {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& s);
std::string shape_str(const Shape& s);

namespace detail {

struct TensorNode;
using NodePtr = std::shared_ptr<TensorNode>;

/// One operation record: output values plus the inputs and local-gradient
/// rule that produced them. Leaves have no inputs and no rule.
struct TensorNode {
  Shape shape;
  std::vector<double> data;
  std::vector<double> grad;  // empty until first touched
  bool requires_grad = false;
  bool leaf = true;
  const char* op = "leaf";
  std::vector<NodePtr> inputs;
  // Reads this node's grad/data and accumulates into the inputs' grads.
  std::function<void(TensorNode&)> backward_fn;

  std::size_t size() const { return data.size(); }
  void ensure_grad() {
    if (grad.size() != data.size()) grad.assign(data.size(), 0.0);
  }
};

}  // namespace detail

/// Dense real tensor with an optional gradient accumulator. Value-semantic
/// handle to a shared node; copying a Tensor aliases the same values. Data is
/// row-major. Tensors are immutable after forward creation except for
/// gradient accumulation and leaf updates between training steps.
class Tensor {
 public:
  Tensor() = default;

  static Tensor scalar(double v, bool requires_grad = false);
  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double v, bool requires_grad = false);
  static Tensor from_data(Shape shape, std::vector<double> data,
                          bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const;
  std::size_t size() const;
  std::size_t dim() const { return shape().size(); }
  bool is_scalar() const { return defined() && size() == 1 && dim() <= 1; }

  /// Value of a one-element tensor.
  double value() const;
  double at(std::size_t flat_index) const;
  std::span<const double> data() const;

  bool requires_grad() const;
  /// Gradient span; allocates (zero-filled) on first access.
  std::span<const double> grad() const;
  void zero_grad();

  /// Mutable access for leaf updates (optimizer steps, finite differences).
  /// Must only be used between graph builds.
  std::vector<double>& raw_data();
  std::vector<double>& raw_grad();

  detail::TensorNode* node() const { return node_.get(); }
  const detail::NodePtr& node_ptr() const { return node_; }

  explicit Tensor(detail::NodePtr n) : node_(std::move(n)) {}

 private:
  detail::NodePtr node_;
};

/// Topologically ordered view of the operations reachable from a root:
/// every node's inputs precede it, and a backward pass over the reversed
/// list visits each node exactly once.
struct Graph {
  std::vector<detail::TensorNode*> nodes;
};

Graph build_graph(const Tensor& root);

/// Reverse-mode sweep from a scalar loss. Populates grad on every
/// requires-grad tensor in the graph; leaf gradients accumulate across
/// calls, interior gradients are reset per call.
void backward(const Tensor& loss);

// ---- elementwise / structural primitives ----------------------------------

Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& x, double c);        // c * x
Tensor add_const(const Tensor& x, double c);    // x + c
Tensor const_minus(double c, const Tensor& x);  // c - x

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor softmax_rows(const Tensor& s);
Tensor sigmoid(const Tensor& x);
Tensor tanh(const Tensor& x);
Tensor cosine_similarity(const Tensor& u, const Tensor& v);
Tensor mean_pool(const Tensor& grid);  // [h,w,b] -> [b]

/// (max(x, 1e-4))^p, elementwise; p >= 1. Forward and gradient both use the
/// clamped base.
Tensor pow_clamped(const Tensor& x, double p);
/// (max(x, eps_root))^(1/p) with a tiny derivative guard eps_root = 1e-100;
/// p >= 1. Keeps the fractional-power gradient finite at 0 without
/// perturbing in-range aggregator values.
Tensor root_clamped(const Tensor& x, double p);
/// (1/n) * sum_i x_i^p over all elements; p >= 1, x_i >= 0.
Tensor mean_pow(const Tensor& x, double p);

Tensor clamp(const Tensor& x, double lo, double hi);
Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);
Tensor select(const Tensor& m, std::size_t row, std::size_t col);  // scalar
Tensor row(const Tensor& m, std::size_t r);                        // vector
Tensor stack(const std::vector<Tensor>& scalars);                  // [n]
Tensor reshape(const Tensor& x, Shape shape);
Tensor add_rowvec(const Tensor& m, const Tensor& v);  // m[i,j] + v[j]

/// Worst relative error between analytic gradients and central differences
/// (f(t+eps) - f(t-eps)) / (2 eps) over every coordinate of every parameter.
/// Denominator is max(|analytic|, |numeric|, 1e-8). eps must lie in
/// [1e-6, 1e-3].
double grad_check(const std::function<Tensor()>& f,
                  const std::vector<Tensor>& params, double eps);

}  // namespace fzsl
