// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "pig/tensor.hpp"

namespace pig {

// Learnable temperature stored as log(tau) so positivity survives any
// gradient step; clamp() projects tau back under the ceiling after updates.
struct Temperature {
  Tensor log_tau;
  double tau_max = 100.0;

  static Temperature make(double tau_init, double tau_max);
  Tensor tau() const { return exp_t(log_tau); }
  double tau_value() const;
  void clamp();
};

// L2-normalizes a {d} or {1,d} tensor; norms under 1e-12 raise NumericError.
Tensor l2_normalize(const Tensor& x);
Tensor cosine_sim(const Tensor& a, const Tensor& b);  // scalar tensor
double cosine_sim_value(const std::vector<double>& a, const std::vector<double>& b);

// Symmetric batch contrastive loss over a B x B cosine matrix whose
// diagonal holds the positive pairs. Logits are similarity * tau.
Tensor info_nce(const Tensor& sim, const Tensor& tau);

// 1 - cos(pseudo_query, text); inputs are raw (unnormalized) embeddings.
Tensor recon_loss(const Tensor& pseudo_query, const Tensor& text);

Tensor total_loss(const Tensor& l_cons, const Tensor& l_recon, double alpha);

struct RetrievalMetrics {
  double r1 = 0, r5 = 0, r10 = 0;  // percentages
  double sum_r = 0;
  double mnr = 0;  // mean rank, >= 1

  std::string line() const;   // single machine-readable key=value record
  std::string table() const;  // human-readable
};

// sim is row-major n_texts x n_videos; gt_video_ids[i] names the one
// relevant gallery video for text i. Ranks use descending similarity with
// ties broken by ascending video id.
RetrievalMetrics compute_metrics(const std::vector<double>& sim, size_t n_texts, size_t n_videos,
                                 const std::vector<uint64_t>& video_ids,
                                 const std::vector<uint64_t>& gt_video_ids);

}  // namespace pig
