// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <vector>

#include "pig/config.hpp"
#include "pig/encoders.hpp"
#include "pig/nn.hpp"
#include "pig/tensor.hpp"

namespace pig {

// Causal transformer mapping the coarse-to-fine visual token sequence
// [bos; video tokens; frame tokens; selected patches; eos] to a single
// text-space embedding read at the eos position.
class PseudoQueryGenerator {
 public:
  PseudoQueryGenerator() = default;
  // When cfg asks for copy_text init and the text encoder's blocks match
  // this generator's shape, transformer weights start as a copy of them.
  PseudoQueryGenerator(const RunConfig& cfg, Rng& rng, const TextEncoder* init_from);

  // Inputs already restricted to the configured granularity subset.
  Tensor generate(const std::vector<Tensor>& content_parts) const;  // returns {d}

  // Final-layer output at every position (after the final norm), for
  // causality checks; t_p is row L-1 through the output projection.
  Tensor generate_all_positions(const std::vector<Tensor>& content_parts) const;

  void collect_params(ParamList& out, const std::string& prefix) const;

  uint64_t dim() const { return dim_; }
  uint64_t max_seq_len() const { return positions_.defined() ? positions_.rows() : 0; }

 private:
  Tensor build_sequence(const std::vector<Tensor>& content_parts) const;
  Tensor run_blocks(const Tensor& seq) const;

  uint64_t dim_ = 0;
  Linear input_proj_;  // fresh d -> d map, near-identity at init
  Tensor bos_, eos_;   // 1 x d learned
  Tensor positions_;   // (4 + m + k + 2) x d learned
  std::vector<TransformerBlock> blocks_;
  LayerNormParams ln_final_;
  Linear out_proj_;    // d -> d, no bias
};

}  // namespace pig
