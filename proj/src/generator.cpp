// SPDX-License-Identifier: Apache-2.0

#include "pig/generator.hpp"

#include "pig/errors.hpp"

namespace pig {

namespace {

Tensor deep_copy(const Tensor& t) {
  return Tensor::from_data(t.shape(), t.data(), /*requires_grad=*/true);
}

void copy_block_weights(TransformerBlock& dst, const TransformerBlock& src) {
  dst.ln1.gamma = deep_copy(src.ln1.gamma);
  dst.ln1.beta = deep_copy(src.ln1.beta);
  dst.ln2.gamma = deep_copy(src.ln2.gamma);
  dst.ln2.beta = deep_copy(src.ln2.beta);
  for (size_t h = 0; h < dst.attn.head.size(); ++h) {
    dst.attn.head[h].w_q = deep_copy(src.attn.head[h].w_q);
    dst.attn.head[h].w_k = deep_copy(src.attn.head[h].w_k);
    dst.attn.head[h].w_v = deep_copy(src.attn.head[h].w_v);
    dst.attn.head[h].b_q = deep_copy(src.attn.head[h].b_q);
    dst.attn.head[h].b_k = deep_copy(src.attn.head[h].b_k);
    dst.attn.head[h].b_v = deep_copy(src.attn.head[h].b_v);
  }
  dst.attn.w_o = deep_copy(src.attn.w_o);
  dst.attn.b_o = deep_copy(src.attn.b_o);
  dst.mlp_in.weight = deep_copy(src.mlp_in.weight);
  dst.mlp_in.bias = deep_copy(src.mlp_in.bias);
  dst.mlp_out.weight = deep_copy(src.mlp_out.weight);
  dst.mlp_out.bias = deep_copy(src.mlp_out.bias);
}

}  // namespace

PseudoQueryGenerator::PseudoQueryGenerator(const RunConfig& cfg, Rng& rng,
                                           const TextEncoder* init_from) {
  dim_ = cfg.model_d;
  input_proj_ = Linear::make(dim_, dim_, rng);
  // Near-identity start so early training passes visual features through.
  for (size_t i = 0; i < dim_; ++i) {
    for (size_t j = 0; j < dim_; ++j) {
      input_proj_.weight.mutable_data()[i * dim_ + j] = (i == j ? 1.0 : 0.0) + rng.normal(0.0, 1e-3);
    }
  }
  bos_ = token_init({1, dim_}, rng);
  eos_ = token_init({1, dim_}, rng);
  const uint64_t seq_len = kVideoTokenCount + cfg.data_m + cfg.model_k + 2;
  positions_ = token_init({seq_len, dim_}, rng);
  for (uint64_t i = 0; i < cfg.model_gen_depth; ++i) {
    blocks_.push_back(TransformerBlock::make(dim_, cfg.model_heads, cfg.model_mlp_ratio * dim_, rng));
  }
  ln_final_ = LayerNormParams::make(dim_);
  out_proj_ = Linear::make(dim_, dim_, rng, /*bias=*/false);

  const bool shapes_match = init_from != nullptr &&
                            init_from->blocks().size() == blocks_.size() &&
                            init_from->dim() == dim_;
  if (cfg.model_generator_init == GeneratorInit::copy_text && shapes_match) {
    for (size_t b = 0; b < blocks_.size(); ++b) copy_block_weights(blocks_[b], init_from->blocks()[b]);
    ln_final_.gamma = deep_copy(init_from->final_norm().gamma);
    ln_final_.beta = deep_copy(init_from->final_norm().beta);
    out_proj_.weight = deep_copy(init_from->output_proj().weight);
  }
}

Tensor PseudoQueryGenerator::build_sequence(const std::vector<Tensor>& content_parts) const {
  if (content_parts.empty()) throw UsageError("generator: empty input");
  for (const Tensor& part : content_parts) {
    if (part.cols() != dim_) {
      throw ShapeError("generator: content width " + part.shape_str() + " does not match d=" +
                       std::to_string(dim_));
    }
  }
  Tensor content = content_parts.size() == 1 ? content_parts[0] : concat_rows(content_parts);
  Tensor projected = input_proj_.forward(content);
  Tensor seq = concat_rows({bos_, projected, eos_});
  if (seq.rows() > positions_.rows()) {
    throw ShapeError("generator: sequence length " + std::to_string(seq.rows()) +
                     " exceeds position table " + std::to_string(positions_.rows()));
  }
  return add(seq, slice_rows(positions_, 0, seq.rows()));
}

Tensor PseudoQueryGenerator::run_blocks(const Tensor& seq) const {
  Tensor x = seq;
  for (const auto& block : blocks_) {
    x = transformer_block_forward(block, x, /*causal=*/true).out;
  }
  return ln_final_.forward(x);
}

Tensor PseudoQueryGenerator::generate(const std::vector<Tensor>& content_parts) const {
  Tensor out = run_blocks(build_sequence(content_parts));
  Tensor eos_row = slice_rows(out, out.rows() - 1, 1);
  return reshape(out_proj_.forward(eos_row), {dim_});
}

Tensor PseudoQueryGenerator::generate_all_positions(const std::vector<Tensor>& content_parts) const {
  return run_blocks(build_sequence(content_parts));
}

void PseudoQueryGenerator::collect_params(ParamList& out, const std::string& prefix) const {
  input_proj_.collect_params(out, prefix + ".input_proj");
  collect(out, prefix + ".bos", bos_);
  collect(out, prefix + ".eos", eos_);
  collect(out, prefix + ".positions", positions_);
  for (size_t i = 0; i < blocks_.size(); ++i) {
    blocks_[i].collect_params(out, prefix + ".block" + std::to_string(i));
  }
  ln_final_.collect_params(out, prefix + ".ln_final");
  out_proj_.collect_params(out, prefix + ".proj");
}

}  // namespace pig
