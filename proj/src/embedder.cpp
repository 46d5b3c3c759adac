#include "fzsl/embedder.hpp"

#include <cmath>

#include "fzsl/rng.hpp"

namespace fzsl {

EmbedderParams init_params(std::size_t b_in, std::size_t b, std::size_t m,
                           std::uint64_t seed, bool hidden) {
  if (b_in == 0 || b == 0 || m == 0) {
    throw ParameterError("init_params: dimensions must be positive");
  }
  if (!hidden && b != b_in) {
    throw ParameterError(
        "init_params: identity head requires b == b_in, got " +
        std::to_string(b) + " vs " + std::to_string(b_in));
  }
  Rng rng(seed);
  EmbedderParams p;
  if (hidden) {
    double std_w = 1.0 / std::sqrt(static_cast<double>(b_in));
    std::vector<double> w(b_in * b);
    for (double& v : w) v = rng.normal(0.0, std_w);
    p.hidden_w = Tensor::from_data({b_in, b}, std::move(w), true);
    p.hidden_b = Tensor::zeros({b}, true);
  }
  double std_v = 1.0 / std::sqrt(static_cast<double>(b));
  std::vector<double> v(b * m);
  for (double& x : v) x = rng.normal(0.0, std_v);
  p.V = Tensor::from_data({b, m}, std::move(v), true);
  return p;
}

Tensor embed_batch(const EmbedderParams& params, const Tensor& rows) {
  if (rows.dim() != 2) {
    throw DimensionError("embed_batch: need [n, B_in] rows, got " +
                         shape_str(rows.shape()));
  }
  if (!params.has_hidden()) {
    if (rows.shape()[1] != params.feature_dim()) {
      throw DimensionError("embed_batch: feature dim " +
                           std::to_string(rows.shape()[1]) +
                           " does not match configured " +
                           std::to_string(params.feature_dim()));
    }
    return rows;
  }
  if (rows.shape()[1] != params.hidden_w.shape()[0]) {
    throw DimensionError("embed_batch: feature dim " +
                         std::to_string(rows.shape()[1]) +
                         " does not match configured " +
                         std::to_string(params.hidden_w.shape()[0]));
  }
  return tanh(add_rowvec(matmul(rows, params.hidden_w), params.hidden_b));
}

Tensor embed(const EmbedderParams& params, const Tensor& input) {
  Tensor vec;
  if (input.dim() == 3) {
    vec = mean_pool(input);
  } else if (input.dim() == 1) {
    vec = input;
  } else {
    throw DimensionError("embed: need a [B_in] vector or [h,w,B_in] grid, got " +
                         shape_str(input.shape()));
  }
  Tensor out =
      embed_batch(params, reshape(vec, {std::size_t{1}, vec.shape()[0]}));
  return reshape(out, {out.shape()[1]});
}

Tensor project(const Tensor& x, const Tensor& V) {
  if (x.dim() != 1 || V.dim() != 2 || x.shape()[0] != V.shape()[0]) {
    throw DimensionError("project: need [B] and [B, M], got " +
                         shape_str(x.shape()) + " and " + shape_str(V.shape()));
  }
  Tensor r = matmul(reshape(x, {std::size_t{1}, x.shape()[0]}), V);
  return reshape(r, {r.shape()[1]});
}

}  // namespace fzsl
