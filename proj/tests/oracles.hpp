// SPDX-License-Identifier: Apache-2.0
//
// Test-only oracles: central finite differences plus explicit-loop
// reimplementations of losses, metrics, and attention scoring. These stay
// independent of the library's kernels on purpose.

#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <vector>

#include "pig/nn.hpp"
#include "pig/tensor.hpp"

namespace pig::testing {

// Relative-error metric used by every gradient check. The floor keeps dead
// or near-dead coordinates (true gradient ~0 on both sides) from dividing
// finite-difference roundoff by itself; central differences at step 1e-5
// carry absolute noise around |loss| * 1e-16 / 1e-5.
inline double rel_err(double a, double b, double floor = 1e-4) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

struct GradCheckReport {
  double max_rel_err = 0.0;
  size_t checked = 0;
};

// Central finite differences on selected coordinates of `param` against the
// autodiff gradient already stored in it. `loss_fn` must re-run the forward
// pass from current parameter values.
inline GradCheckReport finite_diff_check(pig::Tensor param,
                                         const std::function<double()>& loss_fn,
                                         const std::vector<size_t>& coords, double step = 1e-5) {
  GradCheckReport rep;
  const auto& g = param.grad();
  for (size_t idx : coords) {
    double& slot = param.mutable_data()[idx];
    const double saved = slot;
    slot = saved + step;
    const double up = loss_fn();
    slot = saved - step;
    const double down = loss_fn();
    slot = saved;
    const double fd = (up - down) / (2.0 * step);
    rep.max_rel_err = std::max(rep.max_rel_err, rel_err(g[idx], fd));
    ++rep.checked;
  }
  return rep;
}

inline std::vector<size_t> all_coords(const pig::Tensor& t) {
  std::vector<size_t> v(t.size());
  for (size_t i = 0; i < v.size(); ++i) v[i] = i;
  return v;
}

// Up to `k` deterministic sample coordinates spread over the tensor.
inline std::vector<size_t> sample_coords(const pig::Tensor& t, size_t k, uint64_t salt = 0) {
  const size_t n = t.size();
  if (n <= k) return all_coords(t);
  std::vector<size_t> v;
  for (size_t i = 0; i < k; ++i) v.push_back((i * n / k + salt) % n);
  return v;
}

// ---- explicit-loop attention scoring oracle (no library kernels) ----
// q: d values; keys: n x d; weights per head laid out d x dh.
inline std::vector<std::vector<double>> attention_scores_oracle(
    const std::vector<double>& q_in, const std::vector<std::vector<double>>& keys_in,
    const pig::MultiHeadAttention& params, double scale_denom) {
  const size_t d = params.dim;
  const size_t dh = params.head_dim();
  const size_t n = keys_in.size();
  std::vector<std::vector<double>> per_head;
  for (size_t h = 0; h < params.heads; ++h) {
    const auto& wq = params.head[h].w_q.data();
    const auto& wk = params.head[h].w_k.data();
    const auto& bq = params.head[h].b_q.data();
    const auto& bk = params.head[h].b_k.data();
    std::vector<double> qh(dh, 0.0);
    for (size_t j = 0; j < dh; ++j) {
      for (size_t i = 0; i < d; ++i) qh[j] += q_in[i] * wq[i * dh + j];
      qh[j] += bq[j];
    }
    std::vector<double> logits(n, 0.0);
    for (size_t r = 0; r < n; ++r) {
      std::vector<double> kh(dh, 0.0);
      for (size_t j = 0; j < dh; ++j) {
        for (size_t i = 0; i < d; ++i) kh[j] += keys_in[r][i] * wk[i * dh + j];
        kh[j] += bk[j];
      }
      double dot = 0.0;
      for (size_t j = 0; j < dh; ++j) dot += qh[j] * kh[j];
      logits[r] = dot / scale_denom;
    }
    double mx = logits[0];
    for (double v : logits) mx = std::max(mx, v);
    double denom = 0.0;
    std::vector<double> sm(n);
    for (size_t r = 0; r < n; ++r) {
      sm[r] = std::exp(logits[r] - mx);
      denom += sm[r];
    }
    for (size_t r = 0; r < n; ++r) sm[r] /= denom;
    per_head.push_back(std::move(sm));
  }
  return per_head;
}

// ---- explicit-loop InfoNCE oracle ----
inline double info_nce_oracle(const std::vector<std::vector<double>>& sim, double tau) {
  const size_t b = sim.size();
  double l_t2v = 0.0, l_v2t = 0.0;
  for (size_t i = 0; i < b; ++i) {
    double denom = 0.0;
    for (size_t j = 0; j < b; ++j) denom += std::exp(sim[i][j] * tau);
    l_t2v += -std::log(std::exp(sim[i][i] * tau) / denom);
    double denom2 = 0.0;
    for (size_t j = 0; j < b; ++j) denom2 += std::exp(sim[j][i] * tau);
    l_v2t += -std::log(std::exp(sim[i][i] * tau) / denom2);
  }
  return 0.5 * (l_t2v / static_cast<double>(b) + l_v2t / static_cast<double>(b));
}

// ---- explicit-loop retrieval metrics oracle ----
struct MetricsOracle {
  double r1, r5, r10, sum_r, mnr;
};

// sim[t][v]; gt maps text row to gallery column; ties broken by ascending
// video id, ids given per column.
inline MetricsOracle metrics_oracle(const std::vector<std::vector<double>>& sim,
                                    const std::vector<uint64_t>& video_ids,
                                    const std::map<size_t, size_t>& gt_col) {
  const size_t nt = sim.size();
  size_t hit1 = 0, hit5 = 0, hit10 = 0;
  double rank_sum = 0.0;
  for (size_t t = 0; t < nt; ++t) {
    const size_t g = gt_col.at(t);
    size_t rank = 1;
    for (size_t v = 0; v < sim[t].size(); ++v) {
      if (v == g) continue;
      if (sim[t][v] > sim[t][g]) ++rank;
      if (sim[t][v] == sim[t][g] && video_ids[v] < video_ids[g]) ++rank;
    }
    if (rank <= 1) ++hit1;
    if (rank <= 5) ++hit5;
    if (rank <= 10) ++hit10;
    rank_sum += static_cast<double>(rank);
  }
  MetricsOracle m{};
  m.r1 = 100.0 * static_cast<double>(hit1) / static_cast<double>(nt);
  m.r5 = 100.0 * static_cast<double>(hit5) / static_cast<double>(nt);
  m.r10 = 100.0 * static_cast<double>(hit10) / static_cast<double>(nt);
  m.sum_r = m.r1 + m.r5 + m.r10;
  m.mnr = rank_sum / static_cast<double>(nt);
  return m;
}

}  // namespace pig::testing
