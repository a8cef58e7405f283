// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <vector>

#include "pig/rng.hpp"
#include "pig/tensor.hpp"

namespace pig {

// Named trainable leaf. The tensor handle is shared with the module that
// owns it; the optimizer mutates data in place between forward passes.
struct Parameter {
  std::string name;
  Tensor tensor;
  bool trainable = true;
};

using ParamList = std::vector<Parameter>;

void collect(ParamList& out, const std::string& name, const Tensor& t);

// Xavier-uniform for projection matrices, zeros for biases.
Tensor xavier_uniform(size_t fan_in, size_t fan_out, Rng& rng);
// Small-normal init used for learned tokens and positional tables.
Tensor token_init(const std::vector<size_t>& shape, Rng& rng, double stddev = 0.02);

struct Linear {
  Tensor weight;  // in x out
  Tensor bias;    // out
  bool has_bias = true;

  static Linear make(size_t in, size_t out, Rng& rng, bool bias = true);
  Tensor forward(const Tensor& x) const;  // x: rows x in
  void collect_params(ParamList& out, const std::string& prefix) const;
};

struct LayerNormParams {
  Tensor gamma;
  Tensor beta;

  static LayerNormParams make(size_t d);
  Tensor forward(const Tensor& x) const;
  void collect_params(ParamList& out, const std::string& prefix) const;
};

// Per-head projections stored separately so the informativeness selector can
// reuse individual head weights directly.
struct AttentionHead {
  Tensor w_q, w_k, w_v;  // d x dh
  Tensor b_q, b_k, b_v;  // dh
};

struct MultiHeadAttention {
  size_t dim = 0;
  size_t heads = 0;
  std::vector<AttentionHead> head;
  Tensor w_o;  // d x d
  Tensor b_o;  // d

  static MultiHeadAttention make(size_t dim, size_t heads, Rng& rng);
  size_t head_dim() const { return dim / heads; }
  void collect_params(ParamList& out, const std::string& prefix) const;
};

struct AttentionResult {
  Tensor out;                  // L_q x d
  std::vector<Tensor> scores;  // per head, L_q x L_k, pre-output-projection softmax
};

// Scaled dot-product attention, scale 1/sqrt(d/heads). Masked positions get
// exactly zero score. q: L_q x d, k/v: L_k x d.
AttentionResult multi_head_attention(const Tensor& q, const Tensor& k, const Tensor& v,
                                     const MultiHeadAttention& params, bool causal = false);

// Pre-LN transformer block: x + Attn(LN1(x)), then + MLP(LN2(.)).
struct TransformerBlock {
  LayerNormParams ln1, ln2;
  MultiHeadAttention attn;
  Linear mlp_in, mlp_out;

  static TransformerBlock make(size_t dim, size_t heads, size_t mlp_hidden, Rng& rng);
  void collect_params(ParamList& out, const std::string& prefix) const;
};

struct BlockResult {
  Tensor out;
  Tensor attn_input;           // LN1 output, the layer's Q/K/V source
  std::vector<Tensor> scores;  // per-head attention of this block
};

BlockResult transformer_block_forward(const TransformerBlock& block, const Tensor& x, bool causal);

}  // namespace pig
