// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <vector>

#include "pig/config.hpp"
#include "pig/data.hpp"
#include "pig/encoders.hpp"
#include "pig/fusioner.hpp"
#include "pig/generator.hpp"
#include "pig/its.hpp"
#include "pig/objectives.hpp"

namespace pig {

// One video's full offline pipeline: encode, score patches, select,
// generate the pseudo query, fuse into the served representation.
struct VideoForward {
  MultiGrainFeatures features;
  InformativenessMatrix informativeness;
  SelectedPatches selected;
  Tensor pseudo_query;  // {d}
  Tensor video_repr;    // {d}, unnormalized
};

class PigModel {
 public:
  PigModel() = default;
  explicit PigModel(const RunConfig& cfg);

  const RunConfig& config() const { return cfg_; }

  MultiGrainFeatures encode_video(const RawVideo& video) const { return video_enc_.encode(video); }
  Tensor encode_text(const RawText& text) const { return text_enc_.encode(text); }

  InformativenessMatrix informativeness_of(const MultiGrainFeatures& f) const;
  SelectedPatches select_patches(const MultiGrainFeatures& f,
                                 const InformativenessMatrix& im) const;
  // Content sequence for the generator under the configured granularity.
  std::vector<Tensor> generator_inputs(const MultiGrainFeatures& f,
                                       const SelectedPatches& sel) const;

  VideoForward forward_video(const RawVideo& video) const;

  ParamList parameters() const;
  // Content hash over (name, f64 data) of every parameter, in order.
  uint64_t param_hash() const;

  VideoEncoder& video_encoder() { return video_enc_; }
  TextEncoder& text_encoder() { return text_enc_; }
  PseudoQueryGenerator& generator() { return generator_; }
  Fusioner& fusioner() { return fusioner_; }
  Temperature& temperature() { return temperature_; }
  const Temperature& temperature() const { return temperature_; }

 private:
  RunConfig cfg_;
  VideoEncoder video_enc_;
  TextEncoder text_enc_;
  PseudoQueryGenerator generator_;
  Fusioner fusioner_;
  Temperature temperature_;
};

}  // namespace pig
