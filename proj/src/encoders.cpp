// SPDX-License-Identifier: Apache-2.0

#include "pig/encoders.hpp"

#include <cmath>
#include <iostream>

#include "pig/errors.hpp"
#include "pig/its.hpp"

namespace pig {

VideoEncoder::VideoEncoder(const RunConfig& cfg, Rng& rng) {
  dim_ = cfg.model_d;
  heads_ = cfg.model_heads;
  frames_ = cfg.data_m;
  patches_ = cfg.data_n;
  input_dim_ = cfg.data_d_in;
  its_scale_ = cfg.model_its_scale;
  patch_embed_ = Linear::make(input_dim_, dim_, rng);
  video_tokens_ = token_init({kVideoTokenCount, dim_}, rng);
  frame_cls_ = token_init({1, dim_}, rng);
  const uint64_t seq_len = kVideoTokenCount + frames_ * (1 + patches_);
  positions_ = token_init({seq_len, dim_}, rng);
  for (uint64_t i = 0; i < cfg.model_enc_depth; ++i) {
    blocks_.push_back(TransformerBlock::make(dim_, heads_, cfg.model_mlp_ratio * dim_, rng));
  }
  ln_final_ = LayerNormParams::make(dim_);
  visual_proj_ = Linear::make(dim_, dim_, rng, /*bias=*/false);
}

double VideoEncoder::its_scale_denom() const {
  if (its_scale_ == ItsScale::paper_literal) {
    return std::sqrt(static_cast<double>(dim_) / static_cast<double>(patches_));
  }
  return std::sqrt(static_cast<double>(dim_) / static_cast<double>(heads_));
}

MultiGrainFeatures VideoEncoder::encode(const RawVideo& video) const {
  if (video.frames != frames_ || video.patches_per_frame != patches_ ||
      video.feature_dim != input_dim_) {
    throw DataError("encode_video: input " + std::to_string(video.frames) + "x" +
                    std::to_string(video.patches_per_frame) + "x" +
                    std::to_string(video.feature_dim) + " does not match encoder config " +
                    std::to_string(frames_) + "x" + std::to_string(patches_) + "x" +
                    std::to_string(input_dim_));
  }
  if (video.patches.size() != video.frames * video.patches_per_frame * video.feature_dim) {
    throw DataError("encode_video: patch buffer size mismatch");
  }

  Tensor raw = Tensor::from_data({frames_ * patches_, input_dim_}, video.patches);
  Tensor embedded = patch_embed_.forward(raw);  // (m*n) x d

  // Sequence: [video tokens; per frame: frame cls + its patches].
  std::vector<Tensor> rows;
  rows.reserve(1 + 2 * frames_);
  rows.push_back(video_tokens_);
  for (uint64_t f = 0; f < frames_; ++f) {
    rows.push_back(frame_cls_);
    rows.push_back(slice_rows(embedded, f * patches_, patches_));
  }
  Tensor x = add(concat_rows(rows), positions_);

  Tensor last_attn_input;
  for (size_t b = 0; b < blocks_.size(); ++b) {
    BlockResult r = transformer_block_forward(blocks_[b], x, /*causal=*/false);
    if (b + 1 == blocks_.size()) last_attn_input = r.attn_input;
    x = r.out;
  }
  Tensor out = ln_final_.forward(x);
  Tensor projected = visual_proj_.forward(out);

  std::vector<size_t> frame_rows(frames_), patch_rows(frames_ * patches_);
  for (uint64_t f = 0; f < frames_; ++f) {
    const size_t base = kVideoTokenCount + f * (1 + patches_);
    frame_rows[f] = base;
    for (uint64_t p = 0; p < patches_; ++p) patch_rows[f * patches_ + p] = base + 1 + p;
  }

  MultiGrainFeatures feats;
  feats.frames = frames_;
  feats.patches_per_frame = patches_;
  feats.video_tokens = slice_rows(projected, 0, kVideoTokenCount);
  feats.frame_tokens = gather_rows(projected, frame_rows);
  feats.patch_tokens = gather_rows(projected, patch_rows);
  feats.cls_query = slice_rows(last_attn_input, 0, 1);
  Tensor patch_keys = gather_rows(last_attn_input, patch_rows);
  feats.patch_attention = informativeness(feats.cls_query, patch_keys, blocks_.back().attn,
                                          its_scale_denom(), frames_, patches_)
                              .per_head;
  return feats;
}

void VideoEncoder::collect_params(ParamList& out, const std::string& prefix) const {
  patch_embed_.collect_params(out, prefix + ".patch_embed");
  collect(out, prefix + ".video_tokens", video_tokens_);
  collect(out, prefix + ".frame_cls", frame_cls_);
  collect(out, prefix + ".positions", positions_);
  for (size_t i = 0; i < blocks_.size(); ++i) {
    blocks_[i].collect_params(out, prefix + ".block" + std::to_string(i));
  }
  ln_final_.collect_params(out, prefix + ".ln_final");
  visual_proj_.collect_params(out, prefix + ".proj");
}

TextEncoder::TextEncoder(const RunConfig& cfg, Rng& rng) {
  dim_ = cfg.model_d;
  max_len_ = cfg.model_max_text_len;
  input_dim_ = cfg.data_d_in;
  token_embed_ = Linear::make(input_dim_, dim_, rng);
  bos_ = token_init({1, dim_}, rng);
  eos_ = token_init({1, dim_}, rng);
  pad_ = token_init({1, dim_}, rng);
  positions_ = token_init({max_len_ + 2, dim_}, rng);
  for (uint64_t i = 0; i < cfg.model_enc_depth; ++i) {
    blocks_.push_back(TransformerBlock::make(dim_, cfg.model_heads, cfg.model_mlp_ratio * dim_, rng));
  }
  ln_final_ = LayerNormParams::make(dim_);
  text_proj_ = Linear::make(dim_, dim_, rng, /*bias=*/false);
}

Tensor TextEncoder::forward_embedded(const Tensor& rows, size_t read_pos) const {
  if (rows.cols() != dim_) {
    throw ShapeError("text encoder: embedded rows must have width " + std::to_string(dim_));
  }
  if (rows.rows() > positions_.rows()) {
    throw ShapeError("text encoder: sequence length " + std::to_string(rows.rows()) +
                     " exceeds position table " + std::to_string(positions_.rows()));
  }
  if (read_pos >= rows.rows()) throw UsageError("text encoder: read position out of range");
  Tensor x = add(rows, slice_rows(positions_, 0, rows.rows()));
  for (const auto& block : blocks_) {
    x = transformer_block_forward(block, x, /*causal=*/true).out;
  }
  Tensor out = ln_final_.forward(x);
  Tensor picked = slice_rows(out, read_pos, 1);
  return reshape(text_proj_.forward(picked), {dim_});
}

Tensor TextEncoder::encode(const RawText& text) const {
  if (text.length == 0) throw DataError("encode_text: empty input");
  if (text.feature_dim != input_dim_) {
    throw DataError("encode_text: token width " + std::to_string(text.feature_dim) +
                    " does not match encoder input dim " + std::to_string(input_dim_));
  }
  uint64_t len = text.length;
  if (len > max_len_) {
    std::cerr << "warning: text length " << len << " exceeds max " << max_len_
              << ", truncating\n";
    len = max_len_;
  }
  Tensor tokens = Tensor::from_data({len, input_dim_},
                                    std::vector<double>(text.tokens.begin(),
                                                        text.tokens.begin() + len * input_dim_));
  std::vector<Tensor> rows{bos_, token_embed_.forward(tokens), eos_};
  for (uint64_t i = len; i < max_len_; ++i) rows.push_back(pad_);
  return forward_embedded(concat_rows(rows), /*read_pos=*/len + 1);
}

void TextEncoder::collect_params(ParamList& out, const std::string& prefix) const {
  token_embed_.collect_params(out, prefix + ".token_embed");
  collect(out, prefix + ".bos", bos_);
  collect(out, prefix + ".eos", eos_);
  collect(out, prefix + ".pad", pad_);
  collect(out, prefix + ".positions", positions_);
  for (size_t i = 0; i < blocks_.size(); ++i) {
    blocks_[i].collect_params(out, prefix + ".block" + std::to_string(i));
  }
  ln_final_.collect_params(out, prefix + ".ln_final");
  text_proj_.collect_params(out, prefix + ".proj");
}

}  // namespace pig
