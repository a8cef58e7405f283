// SPDX-License-Identifier: Apache-2.0

#include "pig/fusioner.hpp"

#include "pig/errors.hpp"

namespace pig {

Fusioner::Fusioner(const RunConfig& cfg, Rng& rng) {
  dim_ = cfg.model_d;
  attn_ = MultiHeadAttention::make(dim_, cfg.model_fusioner_heads, rng);
  ln_attn_ = LayerNormParams::make(dim_);
  fc_ = Linear::make(dim_, dim_, rng);
  ln_out_ = LayerNormParams::make(dim_);
}

FusionResult Fusioner::fuse(const Tensor& pseudo_query, const Tensor& video_tokens,
                            const Tensor& frame_tokens) const {
  if (pseudo_query.size() != dim_) {
    throw ShapeError("fuse: query " + pseudo_query.shape_str() + " does not match d=" +
                     std::to_string(dim_));
  }
  if (video_tokens.cols() != dim_ || frame_tokens.cols() != dim_) {
    throw ShapeError("fuse: token width mismatch, " + video_tokens.shape_str() + " / " +
                     frame_tokens.shape_str());
  }
  Tensor q = reshape(pseudo_query, {1, dim_});
  Tensor kv = concat_rows({video_tokens, frame_tokens});
  AttentionResult att = multi_head_attention(q, kv, kv, attn_);
  Tensor pooled = ln_attn_.forward(att.out);
  Tensor out = ln_out_.forward(add(fc_.forward(pooled), pooled));
  FusionResult res;
  res.video_repr = reshape(out, {dim_});
  res.attention = std::move(att.scores);
  return res;
}

void Fusioner::collect_params(ParamList& out, const std::string& prefix) const {
  attn_.collect_params(out, prefix + ".attn");
  ln_attn_.collect_params(out, prefix + ".ln_attn");
  fc_.collect_params(out, prefix + ".fc");
  ln_out_.collect_params(out, prefix + ".ln_out");
}

}  // namespace pig
