// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "pig/config.hpp"

namespace pig {

// Synthetic feature patches, not pixels: m frames of n patch vectors each.
struct RawVideo {
  uint64_t frames = 0;
  uint64_t patches_per_frame = 0;
  uint64_t feature_dim = 0;
  std::vector<double> patches;  // frames x patches x dim, row-major

  const double* patch(uint64_t f, uint64_t p) const {
    return patches.data() + (f * patches_per_frame + p) * feature_dim;
  }
};

struct RawText {
  uint64_t length = 0;
  uint64_t feature_dim = 0;
  std::vector<double> tokens;  // length x dim

  const double* token(uint64_t i) const { return tokens.data() + i * feature_dim; }
};

// Generation recipe. Each pair shares a latent z; text tokens are a linear
// view of z plus noise, and p_info patches per frame carry a drifting view
// of z while the rest are pure noise.
struct SyntheticSpec {
  uint64_t n_pairs = 2000;
  uint64_t z_dim = 16;
  uint64_t d_in = 32;
  uint64_t m = 8;
  uint64_t n = 16;
  uint64_t p_info = 2;
  double sigma_video = 1.0;
  double sigma_text = 0.05;
  double sigma_patch = 0.1;
  uint64_t text_len = 6;
  double drift = 0.25;
  double train_frac = 0.7;
  double val_frac = 0.15;
  uint64_t seed = 0;
  // Test hook: share one projection between text and video sides so the
  // noiseless dataset is separable by raw feature match.
  bool tie_projections = false;

  static SyntheticSpec from_config(const RunConfig& cfg);
};

enum class Split : uint8_t { train = 0, val = 1, test = 2 };

struct PairedDataset {
  SyntheticSpec spec;
  std::vector<uint64_t> ids;
  std::vector<RawVideo> videos;
  std::vector<RawText> texts;
  // Planted signal positions, per video: m * p_info flattened (frame * n + patch).
  std::vector<std::vector<uint64_t>> signal_patches;
  uint64_t n_train = 0;
  uint64_t n_val = 0;

  uint64_t size() const { return ids.size(); }
  Split split_of(uint64_t idx) const;
  std::vector<uint64_t> indices_of(Split s) const;

  // Audited accessors; the trainer asserts the test-split counter stays flat.
  const RawVideo& video(uint64_t idx) const;
  const RawText& text(uint64_t idx) const;
  const std::array<uint64_t, 3>& access_counts() const { return access_counts_; }

  void save(const std::string& path) const;
  static PairedDataset load(const std::string& path);

 private:
  mutable std::array<uint64_t, 3> access_counts_{};
};

// Deterministic in (spec, seed); per-pair RNG streams keep pairs independent
// of generation order.
PairedDataset generate_dataset(const SyntheticSpec& spec);

}  // namespace pig
