// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "pig/data.hpp"
#include "pig/model.hpp"
#include "pig/objectives.hpp"

namespace pig {

// Full training state: parameters, optimizer moments, step counter, RNG
// position, and the config hash that produced them. Serialization is
// deterministic; save -> load -> save is byte-identical.
struct Checkpoint {
  uint64_t config_hash = 0;
  uint64_t step = 0;
  std::array<uint64_t, 4> rng_state{};
  std::vector<std::pair<std::string, std::vector<double>>> blobs;

  void save(const std::string& path) const;
  static Checkpoint load(const std::string& path);

  // Identity of the model weights alone (optimizer blobs excluded); the
  // serving index records this to pin which checkpoint built it.
  uint64_t model_hash() const;
};

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

class Adam {
 public:
  Adam() = default;
  Adam(const ParamList& params, AdamConfig cfg = {});

  // Applies one update to every trainable parameter that has a gradient.
  void step(ParamList& params, double lr);
  uint64_t steps() const { return t_; }

  void export_blobs(const ParamList& params,
                    std::vector<std::pair<std::string, std::vector<double>>>& out) const;
  void import_blobs(const ParamList& params,
                    const std::vector<std::pair<std::string, std::vector<double>>>& in);

 private:
  AdamConfig cfg_;
  uint64_t t_ = 0;
  std::vector<std::vector<double>> m_, v_;
};

struct StepLog {
  uint64_t step = 0;
  double l_cons = 0, l_recon = 0, total = 0;
  std::string line() const;
};

struct EvalRecord {
  uint64_t step = 0;
  RetrievalMetrics metrics;
};

struct StageResult {
  std::vector<StepLog> logs;
  std::vector<EvalRecord> evals;
  bool aborted_nan = false;
  uint64_t steps_run = 0;
};

// Two-stage optimization. Stage 1 minimizes the reconstruction loss with
// everything but the generator frozen; stage 2 fine-tunes the whole model
// on contrastive + alpha * reconstruction. Single-threaded and
// deterministic in (config, seed).
class Trainer {
 public:
  Trainer(PigModel& model, const PairedDataset& dataset, std::ostream* log = nullptr);

  StageResult run_stage1();
  StageResult run_stage2();

  Checkpoint checkpoint() const;
  void restore(const Checkpoint& ckpt);

  uint64_t step_count() const { return step_; }

 private:
  struct BatchLoss {
    Tensor total;
    double l_cons = 0, l_recon = 0;
  };

  std::vector<uint64_t> sample_batch(size_t batch_size);
  BatchLoss stage1_loss(const std::vector<uint64_t>& batch);
  BatchLoss stage2_loss(const std::vector<uint64_t>& batch);
  uint64_t frozen_hash() const;
  void log_step(const StepLog& entry);

  PigModel& model_;
  const PairedDataset& dataset_;
  RunConfig cfg_;
  std::vector<uint64_t> train_indices_;
  ParamList params_;
  Adam adam_;
  Rng rng_;
  uint64_t step_ = 0;
  std::ostream* log_ = nullptr;
};

// Loads checkpointed parameters into a model built from the same config.
void apply_checkpoint(PigModel& model, const Checkpoint& ckpt);
Checkpoint capture_checkpoint(const PigModel& model);

// Mean cosine(pseudo query, text feature) over a split; the stage-1 target.
double mean_pseudo_query_cosine(const PigModel& model, const PairedDataset& ds, Split split);

// Direct (index-free) retrieval metrics over a split.
RetrievalMetrics evaluate_split(const PigModel& model, const PairedDataset& ds, Split split);

}  // namespace pig
