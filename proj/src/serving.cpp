// SPDX-License-Identifier: Apache-2.0

#include "pig/serving.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <sstream>
#include <unordered_set>

#include "pig/errors.hpp"
#include "pig/objectives.hpp"
#include "pig/serialize.hpp"

namespace pig {

namespace {
constexpr uint32_t kIndexVersion = 1;
}

void RetrievalIndex::add(uint64_t id, const std::vector<double>& vec) {
  if (vec.size() != dim_) {
    throw ShapeError("index add: vector size " + std::to_string(vec.size()) +
                     " does not match index dim " + std::to_string(dim_));
  }
  for (const auto& e : entries_) {
    if (e.id == id) throw DataError("index add: duplicate video id " + std::to_string(id));
  }
  double norm_sq = 0.0;
  for (double v : vec) norm_sq += v * v;
  if (norm_sq < 1e-24) throw NumericError("index add: zero-norm vector for id " + std::to_string(id));
  const double inv = 1.0 / std::sqrt(norm_sq);
  IndexEntry e;
  e.id = id;
  e.vec.resize(dim_);
  for (size_t i = 0; i < dim_; ++i) e.vec[i] = static_cast<float>(vec[i] * inv);
  entries_.push_back(std::move(e));
}

std::vector<std::pair<uint64_t, double>> RetrievalIndex::query(
    const std::vector<double>& text_embedding, size_t top) const {
  if (entries_.empty()) throw UsageError("query: index is empty");
  if (text_embedding.size() != dim_) {
    throw ShapeError("query: embedding size " + std::to_string(text_embedding.size()) +
                     " does not match index dim " + std::to_string(dim_));
  }
  double norm_sq = 0.0;
  for (double v : text_embedding) norm_sq += v * v;
  if (norm_sq < 1e-24) throw NumericError("query: zero-norm embedding");
  const double inv = 1.0 / std::sqrt(norm_sq);

  std::vector<std::pair<uint64_t, double>> scored(entries_.size());
  for (size_t e = 0; e < entries_.size(); ++e) {
    double dot = 0.0;
    for (size_t i = 0; i < dim_; ++i) {
      dot += static_cast<double>(entries_[e].vec[i]) * text_embedding[i] * inv;
    }
    scored[e] = {entries_[e].id, dot};
  }
  std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  scored.resize(std::min(top, scored.size()));
  return scored;
}

void RetrievalIndex::save(const std::string& path) const {
  ByteWriter w;
  w.magic("PIGX");
  w.u32(kIndexVersion);
  w.u32(dim_);
  w.u64(entries_.size());
  for (const auto& e : entries_) {
    w.u64(e.id);
    for (float v : e.vec) w.f32(v);
  }
  w.magic("META");
  w.u64(ckpt_hash);
  w.u64(config_hash);
  w.write_file(path);
}

RetrievalIndex RetrievalIndex::load(const std::string& path) {
  ByteReader r = ByteReader::from_file(path);
  r.expect_magic("PIGX", "index file " + path);
  const uint32_t version = r.u32();
  if (version != kIndexVersion) {
    throw FormatError("index " + path + ": unsupported version " + std::to_string(version));
  }
  RetrievalIndex idx(r.u32());
  const uint64_t count = r.u64();
  idx.entries_.resize(count);
  for (uint64_t i = 0; i < count; ++i) {
    idx.entries_[i].id = r.u64();
    idx.entries_[i].vec.resize(idx.dim_);
    for (uint32_t j = 0; j < idx.dim_; ++j) idx.entries_[i].vec[j] = r.f32();
  }
  if (r.remaining() >= 4 + 16) {
    r.expect_magic("META", "index trailer");
    idx.ckpt_hash = r.u64();
    idx.config_hash = r.u64();
  }
  return idx;
}

RetrievalIndex build_index(const PigModel& model, const PairedDataset& ds,
                           const std::vector<uint64_t>& dataset_indices) {
  NoGradGuard ng;
  RetrievalIndex idx(static_cast<uint32_t>(model.config().model_d));
  std::unordered_set<uint64_t> seen;
  for (uint64_t i : dataset_indices) {
    const uint64_t id = ds.ids[i];
    if (!seen.insert(id).second) {
      throw DataError("build_index: duplicate video id " + std::to_string(id));
    }
    VideoForward fv = model.forward_video(ds.video(i));
    fv.video_repr.check_finite("video representation " + std::to_string(id));
    idx.add(id, fv.video_repr.data());
  }
  idx.ckpt_hash = model.param_hash();
  idx.config_hash = model.config().hash();
  const auto now = std::chrono::system_clock::now().time_since_epoch();
  idx.built_at = std::to_string(std::chrono::duration_cast<std::chrono::seconds>(now).count());
  return idx;
}

// ---------------------------------------------------------------- flops

namespace {

// MACs of one pre-LN transformer block on a length-L sequence.
uint64_t block_macs(uint64_t L, uint64_t d, uint64_t mlp_ratio) {
  const uint64_t qkv = 3 * L * d * d;
  const uint64_t attn = 2 * L * L * d;  // scores + weighted values, summed over heads
  const uint64_t out = L * d * d;
  const uint64_t mlp = 2 * L * d * (mlp_ratio * d);
  return qkv + attn + out + mlp;
}

}  // namespace

FlopsReport account_flops(const RunConfig& cfg) {
  const uint64_t d = cfg.model_d;
  const uint64_t m = cfg.data_m;
  const uint64_t n = cfg.data_n;
  const uint64_t k = cfg.model_k;
  const uint64_t heads = cfg.model_heads;
  const uint64_t dh = d / heads;

  FlopsReport rep;

  // Video encoder: patch embedding, enc_depth blocks over the full token
  // sequence, shared visual projection of every row.
  const uint64_t L_v = kVideoTokenCount + m * (1 + n);
  rep.offline_video_encode_flops = m * n * cfg.data_d_in * d +
                                   cfg.model_enc_depth * block_macs(L_v, d, cfg.model_mlp_ratio) +
                                   L_v * d * d;

  // Selection scoring (per-head Q/K projections + logits over m*n keys),
  // then the generator on [bos; 4 + m + k tokens; eos].
  const uint64_t its = heads * (d * dh + m * n * d * dh + m * n * dh);
  const uint64_t L_g = kVideoTokenCount + m + k + 2;
  rep.offline_generate_flops = its + (kVideoTokenCount + m + k) * d * d +
                               cfg.model_gen_depth * block_macs(L_g, d, cfg.model_mlp_ratio) +
                               d * d;

  // Fusioner: one query over 4 + m keys, output projection, FC.
  const uint64_t K_f = kVideoTokenCount + m;
  rep.offline_fuse_flops = (1 + 2 * K_f) * d * d + 2 * K_f * d + d * d + d * d;

  // The serving claim: one stored vector, one dot product.
  rep.online_per_matching_flops = d;
  rep.storage_bytes_per_video = 4 * d;
  return rep;
}

std::string human_count(uint64_t value) {
  std::ostringstream os;
  os.setf(std::ios::fixed);
  const double v = static_cast<double>(value);
  if (v >= 0.1 * 1024.0 * 1024.0 * 1024.0) {
    os.precision(2);
    os << v / (1024.0 * 1024.0 * 1024.0) << "G";
  } else if (v >= 0.1 * 1024.0 * 1024.0) {
    os.precision(2);
    os << v / (1024.0 * 1024.0) << "M";
  } else if (v >= 0.1 * 1024.0) {
    os.precision(1);
    os << v / 1024.0 << "K";
  } else {
    os << value;
  }
  return os.str();
}

std::string human_bytes(uint64_t bytes) { return human_count(bytes) + "B"; }

std::string FlopsReport::table() const {
  std::ostringstream os;
  os << "quantity                          raw            human\n";
  auto row = [&os](const char* name, uint64_t raw, const std::string& human) {
    os << name;
    for (size_t i = std::string(name).size(); i < 34; ++i) os << ' ';
    std::string r = std::to_string(raw);
    os << r;
    for (size_t i = r.size(); i < 15; ++i) os << ' ';
    os << human << "\n";
  };
  row("offline_video_encode_flops", offline_video_encode_flops, human_count(offline_video_encode_flops));
  row("offline_generate_flops", offline_generate_flops, human_count(offline_generate_flops));
  row("offline_fuse_flops", offline_fuse_flops, human_count(offline_fuse_flops));
  row("online_per_matching_flops", online_per_matching_flops, human_count(online_per_matching_flops));
  row("storage_bytes_per_video", storage_bytes_per_video, human_bytes(storage_bytes_per_video));
  return os.str();
}

}  // namespace pig
