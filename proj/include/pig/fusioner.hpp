// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <vector>

#include "pig/config.hpp"
#include "pig/nn.hpp"
#include "pig/tensor.hpp"

namespace pig {

struct FusionResult {
  Tensor video_repr;               // {d}
  std::vector<Tensor> attention;   // per head, 1 x (4 + m) pooling weights
};

// Attention pooling of [video tokens; frame tokens] guided by the pseudo
// query, deliberately without a residual from the query: the pooled value
// goes through LN, then a d->d FC with residual and a second LN.
class Fusioner {
 public:
  Fusioner() = default;
  Fusioner(const RunConfig& cfg, Rng& rng);

  FusionResult fuse(const Tensor& pseudo_query, const Tensor& video_tokens,
                    const Tensor& frame_tokens) const;

  void collect_params(ParamList& out, const std::string& prefix) const;

  // Test hook for the structural no-query-residual property.
  MultiHeadAttention& attention_params() { return attn_; }

 private:
  uint64_t dim_ = 0;
  MultiHeadAttention attn_;
  LayerNormParams ln_attn_;
  Linear fc_;
  LayerNormParams ln_out_;
};

}  // namespace pig
