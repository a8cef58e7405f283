// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <vector>

#include "pig/config.hpp"
#include "pig/data.hpp"
#include "pig/nn.hpp"
#include "pig/tensor.hpp"

namespace pig {

inline constexpr uint64_t kVideoTokenCount = 4;

// Everything the rest of the pipeline consumes from one encoded video.
struct MultiGrainFeatures {
  uint64_t frames = 0;
  uint64_t patches_per_frame = 0;
  Tensor video_tokens;     // 4 x d, projected
  Tensor frame_tokens;     // m x d, projected
  Tensor patch_tokens;     // (m*n) x d, projected; logical layout m x n x d
  // Final-layer attention of the first video class token over patch keys,
  // one softmax row per head.
  Tensor patch_attention;  // heads x (m*n)
  // The pre-W_Q input of that final attention layer at the class position.
  Tensor cls_query;        // 1 x d
};

// ViT-style encoder over [4 video tokens; per frame: frame cls + patches]
// with full self-attention and a shared visual projection applied to every
// granularity.
class VideoEncoder {
 public:
  VideoEncoder() = default;
  VideoEncoder(const RunConfig& cfg, Rng& rng);

  MultiGrainFeatures encode(const RawVideo& video) const;
  void collect_params(ParamList& out, const std::string& prefix) const;

  uint64_t dim() const { return dim_; }
  uint64_t frames() const { return frames_; }
  uint64_t patches_per_frame() const { return patches_; }
  const MultiHeadAttention& final_attention() const { return blocks_.back().attn; }
  double its_scale_denom() const;

 private:
  uint64_t dim_ = 0, heads_ = 0, frames_ = 0, patches_ = 0, input_dim_ = 0;
  ItsScale its_scale_ = ItsScale::per_head;
  Linear patch_embed_;
  Tensor video_tokens_;  // 4 x d learned
  Tensor frame_cls_;     // 1 x d learned, prepended to every frame
  Tensor positions_;     // sequence-length x d learned
  std::vector<TransformerBlock> blocks_;
  LayerNormParams ln_final_;
  Linear visual_proj_;   // shared across granularities, no bias
};

// Causal transformer over [bos, tokens..., eos, pad...]; the eos-position
// output through the text projection is the text feature.
class TextEncoder {
 public:
  TextEncoder() = default;
  TextEncoder(const RunConfig& cfg, Rng& rng);

  // Over-length inputs are truncated to max_len with a stderr warning.
  Tensor encode(const RawText& text) const;  // returns {d}

  // Core transform on already-embedded rows; exposed so causal-mask
  // consequences can be exercised on arbitrary sequences.
  Tensor forward_embedded(const Tensor& rows, size_t read_pos) const;

  void collect_params(ParamList& out, const std::string& prefix) const;

  uint64_t dim() const { return dim_; }
  uint64_t max_len() const { return max_len_; }

  const std::vector<TransformerBlock>& blocks() const { return blocks_; }
  const LayerNormParams& final_norm() const { return ln_final_; }
  const Linear& output_proj() const { return text_proj_; }

 private:
  uint64_t dim_ = 0, max_len_ = 0, input_dim_ = 0;
  Linear token_embed_;
  Tensor bos_, eos_, pad_;  // 1 x d each
  Tensor positions_;        // (max_len + 2) x d
  std::vector<TransformerBlock> blocks_;
  LayerNormParams ln_final_;
  Linear text_proj_;  // d -> d, no bias
};

}  // namespace pig
