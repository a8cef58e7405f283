// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "pig/config.hpp"
#include "pig/data.hpp"
#include "pig/model.hpp"

namespace pig {

struct IndexEntry {
  uint64_t id = 0;
  std::vector<float> vec;  // L2-normalized at build time
};

// Persisted gallery with exact brute-force dot-product search. Vectors are
// stored f32; scoring upcasts to f64. File layout, all little-endian:
//   "PIGX" | u32 version=1 | u32 d | u64 N | N x ( u64 id | d x f32 )
// followed by a "META" trailer carrying the builder checkpoint hash and the
// config hash. No timestamp is persisted, so rebuilds are byte-identical.
class RetrievalIndex {
 public:
  RetrievalIndex() = default;
  explicit RetrievalIndex(uint32_t dim) : dim_(dim) {}

  uint32_t dim() const { return dim_; }
  uint64_t size() const { return entries_.size(); }
  const IndexEntry& entry(size_t i) const { return entries_[i]; }

  // L2-normalizes and stores as f32; duplicate ids are a build error.
  void add(uint64_t id, const std::vector<double>& vec);

  // Exact scan: descending dot product, ties by ascending id, exactly
  // min(top, N) results. The query is normalized internally.
  std::vector<std::pair<uint64_t, double>> query(const std::vector<double>& text_embedding,
                                                 size_t top) const;

  void save(const std::string& path) const;
  static RetrievalIndex load(const std::string& path);

  uint64_t ckpt_hash = 0;
  uint64_t config_hash = 0;
  std::string built_at;  // in-memory provenance only, never serialized

 private:
  uint32_t dim_ = 0;
  std::vector<IndexEntry> entries_;
};

// Offline pipeline over the given dataset rows: encode, generate, fuse,
// normalize, store.
RetrievalIndex build_index(const PigModel& model, const PairedDataset& ds,
                           const std::vector<uint64_t>& dataset_indices);

// Analytic multiply-accumulate counts (1 MAC = 1 FLOP, the convention under
// which a d=512 dot product reports 0.5K). Matrix products only; softmax,
// layer norm, and activations are not counted.
struct FlopsReport {
  uint64_t offline_video_encode_flops = 0;
  uint64_t offline_generate_flops = 0;  // informativeness scoring + generator
  uint64_t offline_fuse_flops = 0;
  uint64_t online_per_matching_flops = 0;  // exactly d
  uint64_t storage_bytes_per_video = 0;    // 4 * d (f32)

  std::string table() const;
};

FlopsReport account_flops(const RunConfig& cfg);

// 512 -> "0.5K", 2048 -> "2.0K" (binary K).
std::string human_count(uint64_t value);
std::string human_bytes(uint64_t bytes);

}  // namespace pig
