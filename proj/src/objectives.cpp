// SPDX-License-Identifier: Apache-2.0

#include "pig/objectives.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <unordered_map>

#include "pig/errors.hpp"

namespace pig {

Temperature Temperature::make(double tau_init, double tau_max) {
  if (tau_init <= 0.0) throw ConfigError("temperature init must be positive");
  Temperature t;
  t.log_tau = Tensor::scalar(std::log(tau_init), /*requires_grad=*/true);
  t.tau_max = tau_max;
  return t;
}

double Temperature::tau_value() const { return std::exp(log_tau.data()[0]); }

void Temperature::clamp() {
  const double cap = std::log(tau_max);
  double& v = log_tau.mutable_data()[0];
  v = std::min(v, cap);
}

Tensor l2_normalize(const Tensor& x) {
  Tensor flat = x.ndim() == 1 ? x : reshape(x, {x.size()});
  Tensor norm_sq = sum_all(mul(flat, flat));
  if (norm_sq.value() < 1e-24) {
    throw NumericError("l2_normalize: vector norm below 1e-12");
  }
  Tensor inv_norm = reciprocal(sqrt_t(norm_sq));
  return mul_by_scalar_tensor(flat, inv_norm);
}

Tensor cosine_sim(const Tensor& a, const Tensor& b) {
  if (a.size() != b.size()) {
    throw ShapeError("cosine_sim: size mismatch " + a.shape_str() + " vs " + b.shape_str());
  }
  return sum_all(mul(l2_normalize(a), l2_normalize(b)));
}

double cosine_sim_value(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) throw ShapeError("cosine_sim_value: size mismatch");
  double dot = 0, na = 0, nb = 0;
  for (size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na < 1e-24 || nb < 1e-24) throw NumericError("cosine_sim_value: zero-norm vector");
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

Tensor info_nce(const Tensor& sim, const Tensor& tau) {
  if (sim.ndim() != 2 || sim.rows() != sim.cols()) {
    throw UsageError("info_nce: similarity matrix must be square, got " + sim.shape_str());
  }
  const size_t b = sim.rows();
  if (b == 0) throw UsageError("info_nce: empty batch");
  Tensor logits = mul_by_scalar_tensor(sim, tau);
  Tensor log_sm_t2v = log_t(softmax_rows(logits));   // over videos, per text
  Tensor log_sm_v2t = log_t(softmax(logits, 0));     // over texts, per video
  Tensor acc = Tensor::scalar(0.0);
  for (size_t i = 0; i < b; ++i) {
    acc = add(acc, add(take(log_sm_t2v, i, i), take(log_sm_v2t, i, i)));
  }
  return scale(acc, -0.5 / static_cast<double>(b));
}

Tensor recon_loss(const Tensor& pseudo_query, const Tensor& text) {
  return add_scalar(neg(cosine_sim(pseudo_query, text)), 1.0);
}

Tensor total_loss(const Tensor& l_cons, const Tensor& l_recon, double alpha) {
  if (alpha < 0.0) throw UsageError("total_loss: alpha must be non-negative");
  return add(l_cons, scale(l_recon, alpha));
}

std::string RetrievalMetrics::line() const {
  std::ostringstream os;
  os.setf(std::ios::fixed);
  os.precision(4);
  os << "r1=" << r1 << " r5=" << r5 << " r10=" << r10 << " sumr=" << sum_r << " mnr=" << mnr;
  return os.str();
}

std::string RetrievalMetrics::table() const {
  std::ostringstream os;
  os.setf(std::ios::fixed);
  os.precision(2);
  os << "  R@1     R@5     R@10    SumR     MnR\n";
  os << "  " << r1 << "   " << r5 << "   " << r10 << "   " << sum_r << "   " << mnr << "\n";
  return os.str();
}

RetrievalMetrics compute_metrics(const std::vector<double>& sim, size_t n_texts, size_t n_videos,
                                 const std::vector<uint64_t>& video_ids,
                                 const std::vector<uint64_t>& gt_video_ids) {
  if (sim.size() != n_texts * n_videos) throw UsageError("compute_metrics: matrix size mismatch");
  if (video_ids.size() != n_videos || gt_video_ids.size() != n_texts) {
    throw UsageError("compute_metrics: id list size mismatch");
  }
  if (n_texts == 0) throw UsageError("compute_metrics: no queries");
  std::unordered_map<uint64_t, size_t> col_of;
  for (size_t v = 0; v < n_videos; ++v) col_of[video_ids[v]] = v;

  size_t hit1 = 0, hit5 = 0, hit10 = 0;
  double rank_sum = 0.0;
  for (size_t t = 0; t < n_texts; ++t) {
    auto it = col_of.find(gt_video_ids[t]);
    if (it == col_of.end()) {
      throw DataError("compute_metrics: ground-truth video " + std::to_string(gt_video_ids[t]) +
                      " missing from gallery");
    }
    const size_t g = it->second;
    const double gt_score = sim[t * n_videos + g];
    size_t rank = 1;
    for (size_t v = 0; v < n_videos; ++v) {
      if (v == g) continue;
      const double s = sim[t * n_videos + v];
      if (s > gt_score || (s == gt_score && video_ids[v] < video_ids[g])) ++rank;
    }
    if (rank <= 1) ++hit1;
    if (rank <= 5) ++hit5;
    if (rank <= 10) ++hit10;
    rank_sum += static_cast<double>(rank);
  }
  RetrievalMetrics m;
  const double nt = static_cast<double>(n_texts);
  m.r1 = 100.0 * static_cast<double>(hit1) / nt;
  m.r5 = 100.0 * static_cast<double>(hit5) / nt;
  m.r10 = 100.0 * static_cast<double>(hit10) / nt;
  m.sum_r = m.r1 + m.r5 + m.r10;
  m.mnr = rank_sum / nt;
  return m;
}

}  // namespace pig
