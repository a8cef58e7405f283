// SPDX-License-Identifier: Apache-2.0

#include "pig/data.hpp"

#include <algorithm>
#include <cmath>

#include "pig/errors.hpp"
#include "pig/rng.hpp"
#include "pig/serialize.hpp"

namespace pig {

namespace {

constexpr uint64_t kStreamProjections = 0x1000000000ULL;
constexpr uint64_t kStreamPairs = 0x2000000000ULL;
constexpr uint32_t kDatasetVersion = 1;

}  // namespace

SyntheticSpec SyntheticSpec::from_config(const RunConfig& cfg) {
  SyntheticSpec s;
  s.n_pairs = cfg.data_n_pairs;
  s.z_dim = cfg.data_z_dim;
  s.d_in = cfg.data_d_in;
  s.m = cfg.data_m;
  s.n = cfg.data_n;
  s.p_info = cfg.data_p_info;
  s.sigma_video = cfg.data_sigma_video;
  s.sigma_text = cfg.data_sigma_text;
  s.sigma_patch = cfg.data_sigma_patch;
  s.text_len = cfg.data_text_len;
  s.drift = cfg.data_drift;
  s.train_frac = cfg.data_train_frac;
  s.val_frac = cfg.data_val_frac;
  s.seed = cfg.data_seed;
  return s;
}

Split PairedDataset::split_of(uint64_t idx) const {
  if (idx < n_train) return Split::train;
  if (idx < n_train + n_val) return Split::val;
  return Split::test;
}

std::vector<uint64_t> PairedDataset::indices_of(Split s) const {
  std::vector<uint64_t> out;
  for (uint64_t i = 0; i < size(); ++i) {
    if (split_of(i) == s) out.push_back(i);
  }
  return out;
}

const RawVideo& PairedDataset::video(uint64_t idx) const {
  if (idx >= size()) throw UsageError("dataset index " + std::to_string(idx) + " out of range");
  ++access_counts_[static_cast<size_t>(split_of(idx))];
  return videos[idx];
}

const RawText& PairedDataset::text(uint64_t idx) const {
  if (idx >= size()) throw UsageError("dataset index " + std::to_string(idx) + " out of range");
  ++access_counts_[static_cast<size_t>(split_of(idx))];
  return texts[idx];
}

PairedDataset generate_dataset(const SyntheticSpec& spec) {
  if (spec.p_info > spec.n) throw UsageError("p_info exceeds patches per frame");
  if (spec.train_frac + spec.val_frac >= 1.0) throw UsageError("splits leave no test data");

  PairedDataset ds;
  ds.spec = spec;
  ds.n_train = static_cast<uint64_t>(std::floor(spec.train_frac * static_cast<double>(spec.n_pairs)));
  ds.n_val = static_cast<uint64_t>(std::floor(spec.val_frac * static_cast<double>(spec.n_pairs)));

  // Shared projections and the temporal drift direction come from a
  // dataset-level stream; pairs never touch it.
  Rng shared = Rng::derive(spec.seed, kStreamProjections);
  const double col_scale = 1.0 / std::sqrt(static_cast<double>(spec.z_dim));
  std::vector<double> text_proj(spec.d_in * spec.z_dim);
  std::vector<double> video_proj(spec.d_in * spec.z_dim);
  for (double& v : text_proj) v = shared.normal(0.0, col_scale);
  if (spec.tie_projections) {
    video_proj = text_proj;
  } else {
    for (double& v : video_proj) v = shared.normal(0.0, col_scale);
  }
  std::vector<double> drift_dir(spec.z_dim);
  double norm = 0.0;
  for (double& v : drift_dir) {
    v = shared.normal();
    norm += v * v;
  }
  norm = std::sqrt(norm);
  for (double& v : drift_dir) v /= norm;

  auto project = [&](const std::vector<double>& proj, const std::vector<double>& z,
                     double* out) {
    for (uint64_t i = 0; i < spec.d_in; ++i) {
      double acc = 0.0;
      for (uint64_t j = 0; j < spec.z_dim; ++j) acc += proj[i * spec.z_dim + j] * z[j];
      out[i] = acc;
    }
  };

  ds.ids.resize(spec.n_pairs);
  ds.videos.resize(spec.n_pairs);
  ds.texts.resize(spec.n_pairs);
  ds.signal_patches.resize(spec.n_pairs);

  std::vector<double> z(spec.z_dim), zf(spec.z_dim);
  for (uint64_t pair = 0; pair < spec.n_pairs; ++pair) {
    Rng rng = Rng::derive(spec.seed, kStreamPairs + pair);
    ds.ids[pair] = pair;

    for (double& v : z) v = rng.normal();

    RawText& text = ds.texts[pair];
    text.length = spec.text_len;
    text.feature_dim = spec.d_in;
    text.tokens.resize(spec.text_len * spec.d_in);
    for (uint64_t t = 0; t < spec.text_len; ++t) {
      double* tok = text.tokens.data() + t * spec.d_in;
      project(text_proj, z, tok);
      for (uint64_t i = 0; i < spec.d_in; ++i) tok[i] += spec.sigma_text * rng.normal();
    }

    RawVideo& vid = ds.videos[pair];
    vid.frames = spec.m;
    vid.patches_per_frame = spec.n;
    vid.feature_dim = spec.d_in;
    vid.patches.resize(spec.m * spec.n * spec.d_in);
    auto& signal = ds.signal_patches[pair];
    signal.reserve(spec.m * spec.p_info);

    for (uint64_t f = 0; f < spec.m; ++f) {
      for (uint64_t j = 0; j < spec.z_dim; ++j) {
        zf[j] = z[j] + spec.drift * static_cast<double>(f) * drift_dir[j];
      }
      // Signal positions: partial Fisher-Yates over [0, n).
      std::vector<uint64_t> pool(spec.n);
      for (uint64_t j = 0; j < spec.n; ++j) pool[j] = j;
      std::vector<uint64_t> chosen;
      for (uint64_t c = 0; c < spec.p_info; ++c) {
        const uint64_t pick = c + rng.next_below(spec.n - c);
        std::swap(pool[c], pool[pick]);
        chosen.push_back(pool[c]);
      }
      std::sort(chosen.begin(), chosen.end());
      std::vector<bool> is_signal(spec.n, false);
      for (uint64_t p : chosen) {
        is_signal[p] = true;
        signal.push_back(f * spec.n + p);
      }
      for (uint64_t p = 0; p < spec.n; ++p) {
        double* out = vid.patches.data() + (f * spec.n + p) * spec.d_in;
        if (is_signal[p]) {
          project(video_proj, zf, out);
          for (uint64_t i = 0; i < spec.d_in; ++i) out[i] += spec.sigma_patch * rng.normal();
        } else {
          for (uint64_t i = 0; i < spec.d_in; ++i) out[i] = spec.sigma_video * rng.normal();
        }
      }
    }
  }
  return ds;
}

void PairedDataset::save(const std::string& path) const {
  ByteWriter w;
  w.magic("PIGD");
  w.u32(kDatasetVersion);
  w.u64(spec.n_pairs);
  w.u64(spec.z_dim);
  w.u64(spec.d_in);
  w.u64(spec.m);
  w.u64(spec.n);
  w.u64(spec.p_info);
  w.f64(spec.sigma_video);
  w.f64(spec.sigma_text);
  w.f64(spec.sigma_patch);
  w.u64(spec.text_len);
  w.f64(spec.drift);
  w.f64(spec.train_frac);
  w.f64(spec.val_frac);
  w.u64(spec.seed);
  w.u8(spec.tie_projections ? 1 : 0);
  w.u64(n_train);
  w.u64(n_val);
  w.u64(size());
  for (uint64_t i = 0; i < size(); ++i) {
    w.u64(ids[i]);
    w.f64_array(videos[i].patches);
    w.f64_array(texts[i].tokens);
    w.u64_array(signal_patches[i]);
  }
  w.write_file(path);
}

PairedDataset PairedDataset::load(const std::string& path) {
  ByteReader r = ByteReader::from_file(path);
  r.expect_magic("PIGD", "dataset file " + path);
  const uint32_t version = r.u32();
  if (version != kDatasetVersion) {
    throw FormatError("dataset file " + path + ": unsupported version " + std::to_string(version));
  }
  PairedDataset ds;
  ds.spec.n_pairs = r.u64();
  ds.spec.z_dim = r.u64();
  ds.spec.d_in = r.u64();
  ds.spec.m = r.u64();
  ds.spec.n = r.u64();
  ds.spec.p_info = r.u64();
  ds.spec.sigma_video = r.f64();
  ds.spec.sigma_text = r.f64();
  ds.spec.sigma_patch = r.f64();
  ds.spec.text_len = r.u64();
  ds.spec.drift = r.f64();
  ds.spec.train_frac = r.f64();
  ds.spec.val_frac = r.f64();
  ds.spec.seed = r.u64();
  ds.spec.tie_projections = r.u8() != 0;
  ds.n_train = r.u64();
  ds.n_val = r.u64();
  const uint64_t count = r.u64();
  ds.ids.resize(count);
  ds.videos.resize(count);
  ds.texts.resize(count);
  ds.signal_patches.resize(count);
  for (uint64_t i = 0; i < count; ++i) {
    ds.ids[i] = r.u64();
    ds.videos[i].frames = ds.spec.m;
    ds.videos[i].patches_per_frame = ds.spec.n;
    ds.videos[i].feature_dim = ds.spec.d_in;
    ds.videos[i].patches = r.f64_array();
    ds.texts[i].length = ds.spec.text_len;
    ds.texts[i].feature_dim = ds.spec.d_in;
    ds.texts[i].tokens = r.f64_array();
    ds.signal_patches[i] = r.u64_array();
  }
  return ds;
}

}  // namespace pig
