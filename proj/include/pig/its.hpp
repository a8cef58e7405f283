// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "pig/nn.hpp"
#include "pig/tensor.hpp"

namespace pig {

// Per-patch importance from the video encoder's final attention layer:
// softmax over patch keys per head, then an elementwise max across heads.
struct InformativenessMatrix {
  uint64_t frames = 0;
  uint64_t patches_per_frame = 0;
  Tensor per_head;  // heads x (frames * patches)
  Tensor scores;    // frames x patches, entries in [0, 1]
};

struct SelectedPatches {
  Tensor tokens;  // k x d, rows of the patch feature matrix
  std::vector<std::pair<uint64_t, uint64_t>> indices;  // (frame, patch), descending score
};

// Scores every patch key against the class-token query using the given
// attention layer's per-head Q/K projections (reused, not retrained).
// scale_denom is sqrt(d/heads) or the literal sqrt(d/n) variant.
InformativenessMatrix informativeness(const Tensor& cls_query, const Tensor& patch_keys,
                                      const MultiHeadAttention& attn, double scale_denom,
                                      uint64_t frames, uint64_t patches_per_frame);

// Builds the matrix from already-computed per-head attention rows.
InformativenessMatrix informativeness_from_attention(const Tensor& per_head, uint64_t frames,
                                                     uint64_t patches_per_frame);

// Top-k over the flattened frames x patches grid, ties broken by smaller
// flattened index; selection order is descending score. Gradients flow
// through the gathered token values, never through the indices.
SelectedPatches select_top_k(const InformativenessMatrix& im, const Tensor& patch_tokens,
                             uint64_t k);

}  // namespace pig
