// SPDX-License-Identifier: Apache-2.0

#include "pig/nn.hpp"

#include <cmath>

#include "pig/errors.hpp"

namespace pig {

void collect(ParamList& out, const std::string& name, const Tensor& t) {
  out.push_back(Parameter{name, t, true});
}

Tensor xavier_uniform(size_t fan_in, size_t fan_out, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  auto t = Tensor::zeros({fan_in, fan_out}, true);
  for (double& v : t.mutable_data()) v = rng.uniform(-limit, limit);
  return t;
}

Tensor token_init(const std::vector<size_t>& shape, Rng& rng, double stddev) {
  auto t = Tensor::zeros(shape, true);
  for (double& v : t.mutable_data()) v = rng.normal(0.0, stddev);
  return t;
}

Linear Linear::make(size_t in, size_t out, Rng& rng, bool bias) {
  Linear l;
  l.weight = xavier_uniform(in, out, rng);
  l.has_bias = bias;
  if (bias) l.bias = Tensor::zeros({out}, true);
  return l;
}

Tensor Linear::forward(const Tensor& x) const {
  Tensor y = matmul(x, weight);
  return has_bias ? add_row_broadcast(y, bias) : y;
}

void Linear::collect_params(ParamList& out, const std::string& prefix) const {
  collect(out, prefix + ".weight", weight);
  if (has_bias) collect(out, prefix + ".bias", bias);
}

LayerNormParams LayerNormParams::make(size_t d) {
  LayerNormParams ln;
  ln.gamma = Tensor::full({d}, 1.0, true);
  ln.beta = Tensor::zeros({d}, true);
  return ln;
}

Tensor LayerNormParams::forward(const Tensor& x) const { return layer_norm(x, gamma, beta); }

void LayerNormParams::collect_params(ParamList& out, const std::string& prefix) const {
  collect(out, prefix + ".gamma", gamma);
  collect(out, prefix + ".beta", beta);
}

MultiHeadAttention MultiHeadAttention::make(size_t dim, size_t heads, Rng& rng) {
  if (heads == 0 || dim % heads != 0) {
    throw ConfigError("attention dim " + std::to_string(dim) + " not divisible by heads " +
                      std::to_string(heads));
  }
  MultiHeadAttention m;
  m.dim = dim;
  m.heads = heads;
  const size_t dh = dim / heads;
  m.head.resize(heads);
  for (auto& h : m.head) {
    h.w_q = xavier_uniform(dim, dh, rng);
    h.w_k = xavier_uniform(dim, dh, rng);
    h.w_v = xavier_uniform(dim, dh, rng);
    h.b_q = Tensor::zeros({dh}, true);
    h.b_k = Tensor::zeros({dh}, true);
    h.b_v = Tensor::zeros({dh}, true);
  }
  m.w_o = xavier_uniform(dim, dim, rng);
  m.b_o = Tensor::zeros({dim}, true);
  return m;
}

void MultiHeadAttention::collect_params(ParamList& out, const std::string& prefix) const {
  for (size_t i = 0; i < head.size(); ++i) {
    const std::string hp = prefix + ".h" + std::to_string(i);
    collect(out, hp + ".w_q", head[i].w_q);
    collect(out, hp + ".w_k", head[i].w_k);
    collect(out, hp + ".w_v", head[i].w_v);
    collect(out, hp + ".b_q", head[i].b_q);
    collect(out, hp + ".b_k", head[i].b_k);
    collect(out, hp + ".b_v", head[i].b_v);
  }
  collect(out, prefix + ".w_o", w_o);
  collect(out, prefix + ".b_o", b_o);
}

AttentionResult multi_head_attention(const Tensor& q, const Tensor& k, const Tensor& v,
                                     const MultiHeadAttention& params, bool causal) {
  if (q.cols() != params.dim || k.cols() != params.dim || v.cols() != params.dim) {
    throw ShapeError("attention: inputs must have width " + std::to_string(params.dim) + ", got " +
                     q.shape_str() + "/" + k.shape_str() + "/" + v.shape_str());
  }
  if (k.rows() != v.rows()) {
    throw ShapeError("attention: key/value length mismatch " + k.shape_str() + " vs " +
                     v.shape_str());
  }
  const double inv_scale = 1.0 / std::sqrt(static_cast<double>(params.head_dim()));
  AttentionResult res;
  std::vector<Tensor> pooled;
  pooled.reserve(params.heads);
  res.scores.reserve(params.heads);
  for (const auto& h : params.head) {
    Tensor qh = add_row_broadcast(matmul(q, h.w_q), h.b_q);
    Tensor kh = add_row_broadcast(matmul(k, h.w_k), h.b_k);
    Tensor vh = add_row_broadcast(matmul(v, h.w_v), h.b_v);
    Tensor att = softmax_rows(scale(matmul_nt(qh, kh), inv_scale), causal);
    res.scores.push_back(att);
    pooled.push_back(matmul(att, vh));
  }
  res.out = add_row_broadcast(matmul(concat_cols(pooled), params.w_o), params.b_o);
  return res;
}

TransformerBlock TransformerBlock::make(size_t dim, size_t heads, size_t mlp_hidden, Rng& rng) {
  TransformerBlock b;
  b.ln1 = LayerNormParams::make(dim);
  b.ln2 = LayerNormParams::make(dim);
  b.attn = MultiHeadAttention::make(dim, heads, rng);
  b.mlp_in = Linear::make(dim, mlp_hidden, rng);
  b.mlp_out = Linear::make(mlp_hidden, dim, rng);
  return b;
}

void TransformerBlock::collect_params(ParamList& out, const std::string& prefix) const {
  ln1.collect_params(out, prefix + ".ln1");
  ln2.collect_params(out, prefix + ".ln2");
  attn.collect_params(out, prefix + ".attn");
  mlp_in.collect_params(out, prefix + ".mlp_in");
  mlp_out.collect_params(out, prefix + ".mlp_out");
}

BlockResult transformer_block_forward(const TransformerBlock& block, const Tensor& x, bool causal) {
  BlockResult r;
  r.attn_input = block.ln1.forward(x);
  AttentionResult att = multi_head_attention(r.attn_input, r.attn_input, r.attn_input, block.attn, causal);
  r.scores = std::move(att.scores);
  Tensor h = add(x, att.out);
  Tensor m = block.mlp_out.forward(gelu(block.mlp_in.forward(block.ln2.forward(h))));
  r.out = add(h, m);
  return r;
}

}  // namespace pig
