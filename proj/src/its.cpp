// SPDX-License-Identifier: Apache-2.0

#include "pig/its.hpp"

#include <algorithm>
#include <numeric>

#include "pig/errors.hpp"

namespace pig {

InformativenessMatrix informativeness(const Tensor& cls_query, const Tensor& patch_keys,
                                      const MultiHeadAttention& attn, double scale_denom,
                                      uint64_t frames, uint64_t patches_per_frame) {
  if (cls_query.rows() != 1 || cls_query.cols() != attn.dim) {
    throw ConfigError("informativeness: cls query must be 1x" + std::to_string(attn.dim) +
                      ", got " + cls_query.shape_str());
  }
  if (patch_keys.cols() != attn.dim) {
    throw ConfigError("informativeness: patch keys width " + patch_keys.shape_str() +
                      " does not match attention dim " + std::to_string(attn.dim));
  }
  if (patch_keys.rows() != frames * patches_per_frame) {
    throw ConfigError("informativeness: key count does not equal frames*patches");
  }
  const double inv_scale = 1.0 / scale_denom;
  std::vector<Tensor> rows;
  rows.reserve(attn.heads);
  for (const auto& h : attn.head) {
    Tensor q = add_row_broadcast(matmul(cls_query, h.w_q), h.b_q);
    Tensor k = add_row_broadcast(matmul(patch_keys, h.w_k), h.b_k);
    rows.push_back(softmax_rows(scale(matmul_nt(q, k), inv_scale)));
  }
  return informativeness_from_attention(concat_rows(rows), frames, patches_per_frame);
}

InformativenessMatrix informativeness_from_attention(const Tensor& per_head, uint64_t frames,
                                                     uint64_t patches_per_frame) {
  if (per_head.cols() != frames * patches_per_frame) {
    throw ConfigError("informativeness: attention width does not equal frames*patches");
  }
  InformativenessMatrix im;
  im.frames = frames;
  im.patches_per_frame = patches_per_frame;
  im.per_head = per_head;
  Tensor best = slice_rows(per_head, 0, 1);
  for (size_t h = 1; h < per_head.rows(); ++h) {
    best = elementwise_max(best, slice_rows(per_head, h, 1));
  }
  im.scores = reshape(best, {frames, patches_per_frame});
  return im;
}

SelectedPatches select_top_k(const InformativenessMatrix& im, const Tensor& patch_tokens,
                             uint64_t k) {
  const uint64_t total = im.frames * im.patches_per_frame;
  if (k < 1 || k > total) {
    throw UsageError("select_top_k: k=" + std::to_string(k) + " outside [1, " +
                     std::to_string(total) + "]");
  }
  if (patch_tokens.rows() != total) {
    throw ShapeError("select_top_k: token rows " + patch_tokens.shape_str() +
                     " do not match score grid " + std::to_string(total));
  }
  const auto& s = im.scores.data();
  std::vector<size_t> order(total);
  std::iota(order.begin(), order.end(), size_t{0});
  std::sort(order.begin(), order.end(), [&s](size_t a, size_t b) {
    if (s[a] != s[b]) return s[a] > s[b];
    return a < b;
  });
  order.resize(k);

  SelectedPatches sel;
  sel.tokens = gather_rows(patch_tokens, order);
  sel.indices.reserve(k);
  for (size_t idx : order) {
    sel.indices.emplace_back(idx / im.patches_per_frame, idx % im.patches_per_frame);
  }
  return sel;
}

}  // namespace pig
