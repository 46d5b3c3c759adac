#pragma once

#include <cstdint>

#include "fzsl/tensor.hpp"

namespace fzsl {

/// Desk-scale feature head: optional one-hidden-layer transform of the raw
/// feature vector followed by the linear projection V into attribute space.
/// With no hidden layer the head is the identity and B == B_in.
struct EmbedderParams {
  Tensor hidden_w;  // [B_in x B], undefined when the head is the identity
  Tensor hidden_b;  // [B]
  Tensor V;         // [B x M]
  bool train_hidden = true;  // phase flag: false freezes the hidden transform

  bool has_hidden() const { return hidden_w.defined(); }
  std::size_t feature_dim() const { return V.shape()[0]; }
  std::size_t attr_dim() const { return V.shape()[1]; }
};

/// Deterministic initialization: V ~ N(0, 1/B), hidden weights scaled by
/// fan-in. hidden = false gives the identity head (B must equal b_in).
EmbedderParams init_params(std::size_t b_in, std::size_t b, std::size_t m,
                           std::uint64_t seed, bool hidden = false);

/// Single input: [B_in] vector or [h,w,B_in] grid (mean-pooled) -> [B].
Tensor embed(const EmbedderParams& params, const Tensor& input);

/// Batched rows: [n, B_in] -> [n, B].
Tensor embed_batch(const EmbedderParams& params, const Tensor& rows);

/// V^T x: [B] -> [M].
Tensor project(const Tensor& x, const Tensor& V);

}  // namespace fzsl
