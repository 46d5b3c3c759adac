#include "fzsl/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <unordered_set>

namespace fzsl {

namespace {

using detail::NodePtr;
using detail::TensorNode;

NodePtr require_node(const Tensor& t) {
  if (!t.defined()) throw UsageError("operation on an undefined tensor");
  return t.node_ptr();
}

NodePtr make_op(const char* op, Shape shape, std::vector<NodePtr> inputs) {
  auto n = std::make_shared<TensorNode>();
  n->shape = std::move(shape);
  n->data.resize(shape_numel(n->shape));
  n->leaf = false;
  n->op = op;
  for (const auto& in : inputs) {
    if (in->requires_grad) n->requires_grad = true;
  }
  n->inputs = std::move(inputs);
  return n;
}

void check_same_shape(const char* op, const TensorNode& a,
                      const TensorNode& b) {
  if (a.shape != b.shape) {
    throw DimensionError(std::string(op) + ": shape mismatch " +
                         shape_str(a.shape) + " vs " + shape_str(b.shape));
  }
}

void accumulate(TensorNode& dst, std::size_t i, double v) {
  dst.grad[i] += v;
}

}  // namespace

std::size_t shape_numel(const Shape& s) {
  std::size_t n = 1;
  for (std::size_t e : s) n *= e;
  return n;
}

std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << "[";
  for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "x" : "") << s[i];
  os << "]";
  return os.str();
}

// ---- Tensor ----------------------------------------------------------------

Tensor Tensor::scalar(double v, bool requires_grad) {
  return from_data({}, {v}, requires_grad);
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  return full(std::move(shape), 0.0, requires_grad);
}

Tensor Tensor::full(Shape shape, double v, bool requires_grad) {
  std::vector<double> data(shape_numel(shape), v);
  return from_data(std::move(shape), std::move(data), requires_grad);
}

Tensor Tensor::from_data(Shape shape, std::vector<double> data,
                         bool requires_grad) {
  if (shape_numel(shape) != data.size()) {
    throw DimensionError("from_data: shape " + shape_str(shape) +
                         " wants " + std::to_string(shape_numel(shape)) +
                         " values, got " + std::to_string(data.size()));
  }
  auto n = std::make_shared<TensorNode>();
  n->shape = std::move(shape);
  n->data = std::move(data);
  n->requires_grad = requires_grad;
  return Tensor(std::move(n));
}

const Shape& Tensor::shape() const {
  if (!defined()) throw UsageError("shape() on an undefined tensor");
  return node_->shape;
}

std::size_t Tensor::size() const {
  if (!defined()) throw UsageError("size() on an undefined tensor");
  return node_->size();
}

double Tensor::value() const {
  if (!is_scalar()) {
    throw UsageError("value() needs a one-element tensor, have shape " +
                     (defined() ? shape_str(node_->shape) : "<undefined>"));
  }
  return node_->data[0];
}

double Tensor::at(std::size_t flat_index) const {
  if (!defined() || flat_index >= node_->data.size()) {
    throw UsageError("at(): index out of range");
  }
  return node_->data[flat_index];
}

std::span<const double> Tensor::data() const {
  if (!defined()) throw UsageError("data() on an undefined tensor");
  return node_->data;
}

bool Tensor::requires_grad() const {
  return defined() && node_->requires_grad;
}

std::span<const double> Tensor::grad() const {
  if (!defined()) throw UsageError("grad() on an undefined tensor");
  node_->ensure_grad();
  return node_->grad;
}

void Tensor::zero_grad() {
  if (!defined()) return;
  node_->grad.assign(node_->data.size(), 0.0);
}

std::vector<double>& Tensor::raw_data() {
  if (!defined()) throw UsageError("raw_data() on an undefined tensor");
  return node_->data;
}

std::vector<double>& Tensor::raw_grad() {
  if (!defined()) throw UsageError("raw_grad() on an undefined tensor");
  node_->ensure_grad();
  return node_->grad;
}

// ---- graph -----------------------------------------------------------------

Graph build_graph(const Tensor& root) {
  Graph g;
  auto r = require_node(root);
  std::unordered_set<TensorNode*> done;
  // Iterative post-order DFS: inputs are emitted before their consumers.
  std::vector<std::pair<TensorNode*, std::size_t>> stack;
  stack.emplace_back(r.get(), 0);
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (done.count(node)) {
      stack.pop_back();
      continue;
    }
    if (next < node->inputs.size()) {
      TensorNode* in = node->inputs[next++].get();
      if (!done.count(in)) stack.emplace_back(in, 0);
    } else {
      done.insert(node);
      g.nodes.push_back(node);
      stack.pop_back();
    }
  }
  return g;
}

void backward(const Tensor& loss) {
  if (!loss.is_scalar()) {
    throw UsageError("backward: loss must be scalar, have shape " +
                     shape_str(loss.shape()));
  }
  Graph g = build_graph(loss);
  // Interior grads are per-call scratch; leaves accumulate across calls.
  for (TensorNode* n : g.nodes) {
    if (!n->leaf) n->grad.assign(n->data.size(), 0.0);
  }
  TensorNode* root = loss.node();
  root->ensure_grad();
  root->grad[0] += 1.0;
  for (auto it = g.nodes.rbegin(); it != g.nodes.rend(); ++it) {
    TensorNode* n = *it;
    if (n->leaf || !n->requires_grad || !n->backward_fn) continue;
    n->backward_fn(*n);
  }
}

// ---- elementwise ops -------------------------------------------------------

namespace {

template <typename Fwd, typename Bwd>
Tensor binary_elementwise(const char* name, const Tensor& a, const Tensor& b,
                          Fwd fwd, Bwd bwd) {
  auto na = require_node(a);
  auto nb = require_node(b);
  check_same_shape(name, *na, *nb);
  auto out = make_op(name, na->shape, {na, nb});
  for (std::size_t i = 0; i < out->data.size(); ++i) {
    out->data[i] = fwd(na->data[i], nb->data[i]);
  }
  out->backward_fn = [bwd](TensorNode& self) {
    TensorNode& x = *self.inputs[0];
    TensorNode& y = *self.inputs[1];
    if (x.requires_grad) x.ensure_grad();
    if (y.requires_grad) y.ensure_grad();
    for (std::size_t i = 0; i < self.size(); ++i) {
      auto [dx, dy] = bwd(x.data[i], y.data[i], self.data[i]);
      if (x.requires_grad) accumulate(x, i, self.grad[i] * dx);
      if (y.requires_grad) accumulate(y, i, self.grad[i] * dy);
    }
  };
  return Tensor(out);
}

template <typename Fwd, typename Bwd>
Tensor unary_elementwise(const char* name, const Tensor& x, Fwd fwd, Bwd bwd) {
  auto nx = require_node(x);
  auto out = make_op(name, nx->shape, {nx});
  for (std::size_t i = 0; i < out->data.size(); ++i) {
    out->data[i] = fwd(nx->data[i]);
  }
  out->backward_fn = [bwd](TensorNode& self) {
    TensorNode& in = *self.inputs[0];
    if (!in.requires_grad) return;
    in.ensure_grad();
    for (std::size_t i = 0; i < self.size(); ++i) {
      accumulate(in, i, self.grad[i] * bwd(in.data[i], self.data[i]));
    }
  };
  return Tensor(out);
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  return binary_elementwise(
      "add", a, b, [](double x, double y) { return x + y; },
      [](double, double, double) { return std::pair<double, double>{1.0, 1.0}; });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  return binary_elementwise(
      "sub", a, b, [](double x, double y) { return x - y; },
      [](double, double, double) { return std::pair<double, double>{1.0, -1.0}; });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  return binary_elementwise(
      "mul", a, b, [](double x, double y) { return x * y; },
      [](double x, double y, double) { return std::pair<double, double>{y, x}; });
}

Tensor scale(const Tensor& x, double c) {
  return unary_elementwise(
      "scale", x, [c](double v) { return c * v; },
      [c](double, double) { return c; });
}

Tensor add_const(const Tensor& x, double c) {
  return unary_elementwise(
      "add_const", x, [c](double v) { return v + c; },
      [](double, double) { return 1.0; });
}

Tensor const_minus(double c, const Tensor& x) {
  return unary_elementwise(
      "const_minus", x, [c](double v) { return c - v; },
      [](double, double) { return -1.0; });
}

Tensor sigmoid(const Tensor& x) {
  return unary_elementwise(
      "sigmoid", x,
      [](double v) {
        // Evaluate on the non-overflowing branch for either sign.
        if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
        double e = std::exp(v);
        return e / (1.0 + e);
      },
      [](double, double s) { return s * (1.0 - s); });
}

Tensor tanh(const Tensor& x) {
  return unary_elementwise(
      "tanh", x, [](double v) { return std::tanh(v); },
      [](double, double t) { return 1.0 - t * t; });
}

// Base clamp of the public pow primitive.
constexpr double kPowClampEps = 1e-4;
// Derivative guard of the 1/p root; tiny so in-range aggregator values are
// untouched.
constexpr double kRootGuardEps = 1e-100;

Tensor pow_clamped(const Tensor& x, double p) {
  if (p < 1.0) {
    throw ParameterError("pow_clamped: p must be >= 1, got " +
                         std::to_string(p));
  }
  return unary_elementwise(
      "pow_clamped", x,
      [p](double v) { return std::pow(std::max(v, kPowClampEps), p); },
      [p](double v, double) {
        if (v < kPowClampEps) return 0.0;  // derivative of the clamped forward
        return p * std::pow(v, p - 1.0);
      });
}

Tensor root_clamped(const Tensor& x, double p) {
  if (p < 1.0) {
    throw ParameterError("root_clamped: p must be >= 1, got " +
                         std::to_string(p));
  }
  double e = 1.0 / p;
  return unary_elementwise(
      "root_clamped", x,
      [e](double v) { return std::pow(std::max(v, kRootGuardEps), e); },
      [e](double v, double) {
        if (v < kRootGuardEps) return 0.0;
        return e * std::pow(v, e - 1.0);
      });
}

Tensor mean_pow(const Tensor& x, double p) {
  if (p < 1.0) {
    throw ParameterError("mean_pow: p must be >= 1, got " + std::to_string(p));
  }
  auto nx = require_node(x);
  if (nx->size() == 0) throw ParameterError("mean_pow: empty input");
  auto out = make_op("mean_pow", Shape{}, {nx});
  double acc = 0.0;
  for (double v : nx->data) acc += std::pow(v, p);
  out->data[0] = acc / static_cast<double>(nx->size());
  out->backward_fn = [p](TensorNode& self) {
    TensorNode& in = *self.inputs[0];
    if (!in.requires_grad) return;
    in.ensure_grad();
    double g = self.grad[0] / static_cast<double>(in.size());
    for (std::size_t i = 0; i < in.size(); ++i) {
      double d = (p == 1.0) ? 1.0 : p * std::pow(in.data[i], p - 1.0);
      accumulate(in, i, g * d);
    }
  };
  return Tensor(out);
}

Tensor clamp(const Tensor& x, double lo, double hi) {
  if (!(lo < hi)) throw ParameterError("clamp: lo must be < hi");
  return unary_elementwise(
      "clamp", x,
      [lo, hi](double v) { return std::min(std::max(v, lo), hi); },
      [lo, hi](double v, double) { return (v >= lo && v <= hi) ? 1.0 : 0.0; });
}

// ---- reductions and structure ----------------------------------------------

Tensor sum(const Tensor& x) {
  auto nx = require_node(x);
  auto out = make_op("sum", Shape{}, {nx});
  double acc = 0.0;
  for (double v : nx->data) acc += v;
  out->data[0] = acc;
  out->backward_fn = [](TensorNode& self) {
    TensorNode& in = *self.inputs[0];
    if (!in.requires_grad) return;
    in.ensure_grad();
    for (std::size_t i = 0; i < in.size(); ++i) {
      accumulate(in, i, self.grad[0]);
    }
  };
  return Tensor(out);
}

Tensor mean(const Tensor& x) {
  auto nx = require_node(x);
  if (nx->size() == 0) throw ParameterError("mean: empty input");
  auto out = make_op("mean", Shape{}, {nx});
  double acc = 0.0;
  for (double v : nx->data) acc += v;
  out->data[0] = acc / static_cast<double>(nx->size());
  out->backward_fn = [](TensorNode& self) {
    TensorNode& in = *self.inputs[0];
    if (!in.requires_grad) return;
    in.ensure_grad();
    double g = self.grad[0] / static_cast<double>(in.size());
    for (std::size_t i = 0; i < in.size(); ++i) accumulate(in, i, g);
  };
  return Tensor(out);
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  auto na = require_node(a);
  auto nb = require_node(b);
  if (na->shape.size() != 2 || nb->shape.size() != 2) {
    throw DimensionError("matmul: need 2-D operands, got " +
                         shape_str(na->shape) + " and " + shape_str(nb->shape));
  }
  std::size_t m = na->shape[0], k = na->shape[1];
  std::size_t k2 = nb->shape[0], n = nb->shape[1];
  if (k != k2) {
    throw DimensionError("matmul: inner extents differ, " +
                         shape_str(na->shape) + " x " + shape_str(nb->shape));
  }
  auto out = make_op("matmul", Shape{m, n}, {na, nb});
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      double acc = 0.0;
      for (std::size_t t = 0; t < k; ++t) {
        acc += na->data[i * k + t] * nb->data[t * n + j];
      }
      out->data[i * n + j] = acc;
    }
  }
  out->backward_fn = [m, k, n](TensorNode& self) {
    TensorNode& A = *self.inputs[0];
    TensorNode& B = *self.inputs[1];
    // dA = dC * B^T ; dB = A^T * dC
    if (A.requires_grad) {
      A.ensure_grad();
      for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t t = 0; t < k; ++t) {
          double acc = 0.0;
          for (std::size_t j = 0; j < n; ++j) {
            acc += self.grad[i * n + j] * B.data[t * n + j];
          }
          accumulate(A, i * k + t, acc);
        }
      }
    }
    if (B.requires_grad) {
      B.ensure_grad();
      for (std::size_t t = 0; t < k; ++t) {
        for (std::size_t j = 0; j < n; ++j) {
          double acc = 0.0;
          for (std::size_t i = 0; i < m; ++i) {
            acc += A.data[i * k + t] * self.grad[i * n + j];
          }
          accumulate(B, t * n + j, acc);
        }
      }
    }
  };
  return Tensor(out);
}

Tensor softmax_rows(const Tensor& s) {
  auto ns = require_node(s);
  if (ns->shape.size() != 2) {
    throw DimensionError("softmax_rows: need a 2-D tensor, got " +
                         shape_str(ns->shape));
  }
  std::size_t n = ns->shape[0], c = ns->shape[1];
  if (c == 0) throw DimensionError("softmax_rows: zero columns");
  auto out = make_op("softmax_rows", ns->shape, {ns});
  for (std::size_t i = 0; i < n; ++i) {
    // Per-row max subtraction for stability; the shift carries no gradient
    // (softmax is shift-invariant, so the gradient is unchanged).
    double mx = ns->data[i * c];
    for (std::size_t j = 1; j < c; ++j) mx = std::max(mx, ns->data[i * c + j]);
    double denom = 0.0;
    for (std::size_t j = 0; j < c; ++j) {
      double e = std::exp(ns->data[i * c + j] - mx);
      out->data[i * c + j] = e;
      denom += e;
    }
    for (std::size_t j = 0; j < c; ++j) out->data[i * c + j] /= denom;
  }
  out->backward_fn = [n, c](TensorNode& self) {
    TensorNode& in = *self.inputs[0];
    if (!in.requires_grad) return;
    in.ensure_grad();
    for (std::size_t i = 0; i < n; ++i) {
      double dot = 0.0;
      for (std::size_t j = 0; j < c; ++j) {
        dot += self.grad[i * c + j] * self.data[i * c + j];
      }
      for (std::size_t j = 0; j < c; ++j) {
        double y = self.data[i * c + j];
        accumulate(in, i * c + j, y * (self.grad[i * c + j] - dot));
      }
    }
  };
  return Tensor(out);
}

Tensor cosine_similarity(const Tensor& u, const Tensor& v) {
  auto nu = require_node(u);
  auto nv = require_node(v);
  if (nu->shape.size() != 1 || nv->shape.size() != 1 ||
      nu->shape[0] != nv->shape[0] || nu->shape[0] == 0) {
    throw DimensionError("cosine_similarity: need equal-length vectors, got " +
                         shape_str(nu->shape) + " and " + shape_str(nv->shape));
  }
  constexpr double kEps = 1e-8;
  std::size_t d = nu->shape[0];
  auto out = make_op("cosine_similarity", Shape{}, {nu, nv});
  double dot = 0.0, su = 0.0, sv = 0.0;
  for (std::size_t i = 0; i < d; ++i) {
    dot += nu->data[i] * nv->data[i];
    su += nu->data[i] * nu->data[i];
    sv += nv->data[i] * nv->data[i];
  }
  double normu = std::sqrt(su + kEps);
  double normv = std::sqrt(sv + kEps);
  double denom = normu * normv + kEps;
  out->data[0] = dot / denom;
  out->backward_fn = [d, dot, normu, normv, denom](TensorNode& self) {
    TensorNode& a = *self.inputs[0];
    TensorNode& b = *self.inputs[1];
    double g = self.grad[0];
    double c = dot / (denom * denom);
    if (a.requires_grad) {
      a.ensure_grad();
      for (std::size_t i = 0; i < d; ++i) {
        accumulate(a, i,
                   g * (b.data[i] / denom - c * normv * a.data[i] / normu));
      }
    }
    if (b.requires_grad) {
      b.ensure_grad();
      for (std::size_t i = 0; i < d; ++i) {
        accumulate(b, i,
                   g * (a.data[i] / denom - c * normu * b.data[i] / normv));
      }
    }
  };
  return Tensor(out);
}

Tensor mean_pool(const Tensor& grid) {
  auto ng = require_node(grid);
  if (ng->shape.size() != 3) {
    throw DimensionError("mean_pool: need [h,w,b] input, got " +
                         shape_str(ng->shape));
  }
  std::size_t h = ng->shape[0], w = ng->shape[1], b = ng->shape[2];
  if (h == 0 || w == 0) {
    throw DimensionError("mean_pool: empty spatial grid " +
                         shape_str(ng->shape));
  }
  auto out = make_op("mean_pool", Shape{b}, {ng});
  double inv = 1.0 / static_cast<double>(h * w);
  for (std::size_t c = 0; c < b; ++c) {
    double acc = 0.0;
    for (std::size_t i = 0; i < h * w; ++i) acc += ng->data[i * b + c];
    out->data[c] = acc * inv;
  }
  out->backward_fn = [h, w, b, inv](TensorNode& self) {
    TensorNode& in = *self.inputs[0];
    if (!in.requires_grad) return;
    in.ensure_grad();
    for (std::size_t c = 0; c < b; ++c) {
      double g = self.grad[c] * inv;
      for (std::size_t i = 0; i < h * w; ++i) accumulate(in, i * b + c, g);
    }
  };
  return Tensor(out);
}

Tensor select(const Tensor& m, std::size_t r, std::size_t c) {
  auto nm = require_node(m);
  if (nm->shape.size() != 2) {
    throw DimensionError("select: need a 2-D tensor, got " +
                         shape_str(nm->shape));
  }
  std::size_t rows = nm->shape[0], cols = nm->shape[1];
  if (r >= rows || c >= cols) {
    throw UsageError("select: index (" + std::to_string(r) + "," +
                     std::to_string(c) + ") outside " + shape_str(nm->shape));
  }
  auto out = make_op("select", Shape{}, {nm});
  out->data[0] = nm->data[r * cols + c];
  out->backward_fn = [r, c, cols](TensorNode& self) {
    TensorNode& in = *self.inputs[0];
    if (!in.requires_grad) return;
    in.ensure_grad();
    accumulate(in, r * cols + c, self.grad[0]);
  };
  return Tensor(out);
}

Tensor row(const Tensor& m, std::size_t r) {
  auto nm = require_node(m);
  if (nm->shape.size() != 2) {
    throw DimensionError("row: need a 2-D tensor, got " + shape_str(nm->shape));
  }
  std::size_t rows = nm->shape[0], cols = nm->shape[1];
  if (r >= rows) throw UsageError("row: index " + std::to_string(r) +
                                  " outside " + shape_str(nm->shape));
  auto out = make_op("row", Shape{cols}, {nm});
  std::copy_n(nm->data.begin() + static_cast<std::ptrdiff_t>(r * cols), cols,
              out->data.begin());
  out->backward_fn = [r, cols](TensorNode& self) {
    TensorNode& in = *self.inputs[0];
    if (!in.requires_grad) return;
    in.ensure_grad();
    for (std::size_t j = 0; j < cols; ++j) {
      accumulate(in, r * cols + j, self.grad[j]);
    }
  };
  return Tensor(out);
}

Tensor stack(const std::vector<Tensor>& scalars) {
  if (scalars.empty()) throw ParameterError("stack: empty input");
  std::vector<NodePtr> inputs;
  inputs.reserve(scalars.size());
  for (const Tensor& t : scalars) {
    if (!t.is_scalar()) {
      throw DimensionError("stack: every element must be a scalar, got " +
                           shape_str(t.shape()));
    }
    inputs.push_back(require_node(t));
  }
  auto out = make_op("stack", Shape{scalars.size()}, std::move(inputs));
  for (std::size_t i = 0; i < out->inputs.size(); ++i) {
    out->data[i] = out->inputs[i]->data[0];
  }
  out->backward_fn = [](TensorNode& self) {
    for (std::size_t i = 0; i < self.inputs.size(); ++i) {
      TensorNode& in = *self.inputs[i];
      if (!in.requires_grad) continue;
      in.ensure_grad();
      accumulate(in, 0, self.grad[i]);
    }
  };
  return Tensor(out);
}

Tensor reshape(const Tensor& x, Shape shape) {
  auto nx = require_node(x);
  if (shape_numel(shape) != nx->size()) {
    throw DimensionError("reshape: " + shape_str(nx->shape) + " to " +
                         shape_str(shape) + " changes element count");
  }
  auto out = make_op("reshape", std::move(shape), {nx});
  out->data = nx->data;
  out->backward_fn = [](TensorNode& self) {
    TensorNode& in = *self.inputs[0];
    if (!in.requires_grad) return;
    in.ensure_grad();
    for (std::size_t i = 0; i < self.size(); ++i) {
      accumulate(in, i, self.grad[i]);
    }
  };
  return Tensor(out);
}

Tensor add_rowvec(const Tensor& m, const Tensor& v) {
  auto nm = require_node(m);
  auto nv = require_node(v);
  if (nm->shape.size() != 2 || nv->shape.size() != 1 ||
      nm->shape[1] != nv->shape[0]) {
    throw DimensionError("add_rowvec: need [n,k] and [k], got " +
                         shape_str(nm->shape) + " and " + shape_str(nv->shape));
  }
  std::size_t n = nm->shape[0], k = nm->shape[1];
  auto out = make_op("add_rowvec", nm->shape, {nm, nv});
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < k; ++j) {
      out->data[i * k + j] = nm->data[i * k + j] + nv->data[j];
    }
  }
  out->backward_fn = [n, k](TensorNode& self) {
    TensorNode& a = *self.inputs[0];
    TensorNode& b = *self.inputs[1];
    if (a.requires_grad) {
      a.ensure_grad();
      for (std::size_t i = 0; i < n * k; ++i) accumulate(a, i, self.grad[i]);
    }
    if (b.requires_grad) {
      b.ensure_grad();
      for (std::size_t j = 0; j < k; ++j) {
        double acc = 0.0;
        for (std::size_t i = 0; i < n; ++i) acc += self.grad[i * k + j];
        accumulate(b, j, acc);
      }
    }
  };
  return Tensor(out);
}

// ---- gradient checking -------------------------------------------------------

double grad_check(const std::function<Tensor()>& f,
                  const std::vector<Tensor>& params, double eps) {
  if (eps < 1e-6 || eps > 1e-3) {
    throw ParameterError("grad_check: eps must lie in [1e-6, 1e-3]");
  }
  for (const Tensor& p : params) const_cast<Tensor&>(p).zero_grad();
  Tensor loss = f();
  backward(loss);
  std::vector<std::vector<double>> analytic;
  analytic.reserve(params.size());
  for (const Tensor& p : params) {
    auto g = p.grad();
    analytic.emplace_back(g.begin(), g.end());
  }
  double worst = 0.0;
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    auto& data = const_cast<Tensor&>(params[pi]).raw_data();
    for (std::size_t i = 0; i < data.size(); ++i) {
      double orig = data[i];
      data[i] = orig + eps;
      double fp = f().value();
      data[i] = orig - eps;
      double fm = f().value();
      data[i] = orig;
      double numeric = (fp - fm) / (2.0 * eps);
      double ana = analytic[pi][i];
      double denom = std::max({std::abs(ana), std::abs(numeric), 1e-8});
      worst = std::max(worst, std::abs(ana - numeric) / denom);
    }
  }
  return worst;
}

}  // namespace fzsl
