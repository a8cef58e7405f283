// SPDX-License-Identifier: Apache-2.0

#include "pig/model.hpp"

#include "pig/errors.hpp"
#include "pig/serialize.hpp"

namespace pig {

namespace {
constexpr uint64_t kStreamModelInit = 0x3000000000ULL;
}

PigModel::PigModel(const RunConfig& cfg) : cfg_(cfg) {
  cfg_.validate();
  Rng rng = Rng::derive(cfg.train_seed, kStreamModelInit);
  video_enc_ = VideoEncoder(cfg, rng);
  text_enc_ = TextEncoder(cfg, rng);
  generator_ = PseudoQueryGenerator(cfg, rng, &text_enc_);
  fusioner_ = Fusioner(cfg, rng);
  temperature_ = Temperature::make(cfg.train_tau_init, cfg.train_tau_max);
}

InformativenessMatrix PigModel::informativeness_of(const MultiGrainFeatures& f) const {
  return informativeness_from_attention(f.patch_attention, f.frames, f.patches_per_frame);
}

SelectedPatches PigModel::select_patches(const MultiGrainFeatures& f,
                                         const InformativenessMatrix& im) const {
  return select_top_k(im, f.patch_tokens, cfg_.model_k);
}

std::vector<Tensor> PigModel::generator_inputs(const MultiGrainFeatures& f,
                                               const SelectedPatches& sel) const {
  switch (cfg_.model_generator_input) {
    case GeneratorInput::full: return {f.video_tokens, f.frame_tokens, sel.tokens};
    case GeneratorInput::xv: return {f.video_tokens};
    case GeneratorInput::xv_xf: return {f.video_tokens, f.frame_tokens};
    case GeneratorInput::xf_xip: return {f.frame_tokens, sel.tokens};
  }
  throw ConfigError("unreachable generator input variant");
}

VideoForward PigModel::forward_video(const RawVideo& video) const {
  VideoForward out;
  out.features = encode_video(video);
  out.informativeness = informativeness_of(out.features);
  out.selected = select_patches(out.features, out.informativeness);
  out.pseudo_query = generator_.generate(generator_inputs(out.features, out.selected));
  out.video_repr =
      fusioner_.fuse(out.pseudo_query, out.features.video_tokens, out.features.frame_tokens)
          .video_repr;
  return out;
}

ParamList PigModel::parameters() const {
  ParamList params;
  video_enc_.collect_params(params, "video_encoder");
  text_enc_.collect_params(params, "text_encoder");
  generator_.collect_params(params, "generator");
  fusioner_.collect_params(params, "fusioner");
  collect(params, "loss.log_tau", temperature_.log_tau);
  return params;
}

uint64_t PigModel::param_hash() const {
  ByteWriter w;
  for (const Parameter& p : parameters()) {
    w.str(p.name);
    w.f64_array(p.tensor.data());
  }
  return fnv1a64(w.bytes());
}

}  // namespace pig
