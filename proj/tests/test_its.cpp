// SPDX-License-Identifier: Apache-2.0

#include "pig/its.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "doctest.h"
#include "oracles.hpp"
#include "pig/errors.hpp"

using namespace pig;

namespace {

InformativenessMatrix scores_from(const std::vector<double>& flat, uint64_t m, uint64_t n) {
  return informativeness_from_attention(Tensor::from_data({1, m * n}, flat), m, n);
}

}  // namespace

TEST_CASE("single patch gets score 1 regardless of weights") {
  Rng rng(1);
  auto attn = MultiHeadAttention::make(8, 2, rng);
  Tensor q = Tensor::randn({1, 8}, rng);
  Tensor keys = Tensor::randn({1, 8}, rng);
  auto im = informativeness(q, keys, attn, 2.0, 1, 1);
  CHECK(im.scores.at(0, 0) == doctest::Approx(1.0));
  for (size_t h = 0; h < 2; ++h) CHECK(im.per_head.at(h, 0) == doctest::Approx(1.0));
}

TEST_CASE("identical keys split attention evenly") {
  Rng rng(2);
  auto attn = MultiHeadAttention::make(6, 1, rng);
  Tensor q = Tensor::randn({1, 6}, rng);
  Tensor one_key = Tensor::randn({1, 6}, rng);
  Tensor keys = concat_rows({one_key, one_key});
  auto im = informativeness(q, keys, attn, std::sqrt(6.0), 1, 2);
  CHECK(im.scores.at(0, 0) == doctest::Approx(0.5));
  CHECK(im.scores.at(0, 1) == doctest::Approx(0.5));
}

TEST_CASE("informativeness matches the explicit-loop oracle within 1e-12") {
  Rng rng(3);
  const uint64_t m = 3, n = 5;
  const size_t d = 16, heads = 4;
  auto attn = MultiHeadAttention::make(d, heads, rng);
  Tensor q = Tensor::randn({1, d}, rng);
  Tensor keys = Tensor::randn({m * n, d}, rng);
  const double denom = std::sqrt(static_cast<double>(d / heads));
  auto im = informativeness(q, keys, attn, denom, m, n);

  std::vector<double> qv(q.data());
  std::vector<std::vector<double>> kv(m * n, std::vector<double>(d));
  for (size_t i = 0; i < m * n; ++i) {
    for (size_t j = 0; j < d; ++j) kv[i][j] = keys.at(i, j);
  }
  auto oracle = pig::testing::attention_scores_oracle(qv, kv, attn, denom);
  for (size_t h = 0; h < heads; ++h) {
    for (size_t i = 0; i < m * n; ++i) {
      CHECK(std::abs(im.per_head.at(h, i) - oracle[h][i]) < 1e-12);
    }
  }
  // Max across heads, by loops.
  for (size_t i = 0; i < m * n; ++i) {
    double mx = 0.0;
    for (size_t h = 0; h < heads; ++h) mx = std::max(mx, oracle[h][i]);
    CHECK(std::abs(im.scores.data()[i] - mx) < 1e-12);
    CHECK(im.scores.data()[i] >= 0.0);
    CHECK(im.scores.data()[i] <= 1.0);
  }
}

TEST_CASE("scale variants reorder nothing, only sharpness") {
  Rng rng(12);
  const uint64_t m = 2, n = 6;
  const size_t d = 16, heads = 4;
  auto attn = MultiHeadAttention::make(d, heads, rng);
  Tensor q = Tensor::randn({1, d}, rng);
  Tensor keys = Tensor::randn({m * n, d}, rng);
  const double per_head = std::sqrt(static_cast<double>(d) / heads);
  const double literal = std::sqrt(static_cast<double>(d) / static_cast<double>(n));
  auto a = informativeness(q, keys, attn, per_head, m, n);
  auto b = informativeness(q, keys, attn, literal, m, n);
  CHECK(a.scores.data() != b.scores.data());
  for (size_t h = 0; h < heads; ++h) {
    std::vector<size_t> ord_a(m * n), ord_b(m * n);
    std::iota(ord_a.begin(), ord_a.end(), 0u);
    ord_b = ord_a;
    const auto& ra = a.per_head;
    const auto& rb = b.per_head;
    std::sort(ord_a.begin(), ord_a.end(), [&](size_t x, size_t y) { return ra.at(h, x) > ra.at(h, y); });
    std::sort(ord_b.begin(), ord_b.end(), [&](size_t x, size_t y) { return rb.at(h, x) > rb.at(h, y); });
    CHECK(ord_a == ord_b);
  }
}

TEST_CASE("select_top_k with k = m*n returns all patches in descending score order") {
  const uint64_t m = 2, n = 3;
  auto im = scores_from({0.1, 0.9, 0.3, 0.7, 0.2, 0.5}, m, n);
  Tensor tokens = Tensor::from_data({6, 2}, {0, 0, 1, 1, 2, 2, 3, 3, 4, 4, 5, 5});
  auto sel = select_top_k(im, tokens, 6);
  std::vector<std::pair<uint64_t, uint64_t>> expect{{0, 1}, {1, 0}, {1, 2}, {0, 2}, {1, 1}, {0, 0}};
  CHECK(sel.indices == expect);
  CHECK(sel.tokens.at(0, 0) == doctest::Approx(1.0));  // row of patch (0,1)
}

TEST_CASE("select_top_k picks the single hot entry and validates k") {
  auto im = scores_from({0, 0, 1.0, 0, 0, 0}, 2, 3);
  Tensor tokens = Tensor::zeros({6, 4});
  auto sel = select_top_k(im, tokens, 1);
  CHECK(sel.indices == std::vector<std::pair<uint64_t, uint64_t>>{{0, 2}});
  CHECK_THROWS_AS(select_top_k(im, tokens, 0), UsageError);
  CHECK_THROWS_AS(select_top_k(im, tokens, 7), UsageError);
}

TEST_CASE("ties break toward the smaller flattened index") {
  auto im = scores_from({0.5, 0.8, 0.8, 0.1}, 2, 2);
  Tensor tokens = Tensor::zeros({4, 2});
  auto sel = select_top_k(im, tokens, 1);
  CHECK(sel.indices.front() == std::pair<uint64_t, uint64_t>{0, 1});
}

TEST_CASE("selected sets equal the full-sort oracle on 50 random instances") {
  Rng rng(4);
  for (int trial = 0; trial < 50; ++trial) {
    const uint64_t m = 2 + rng.next_below(3), n = 2 + rng.next_below(5);
    const uint64_t total = m * n;
    const uint64_t k = 1 + rng.next_below(total);
    std::vector<double> s(total);
    for (double& v : s) v = rng.uniform();
    auto im = scores_from(s, m, n);
    Tensor tokens = Tensor::randn({total, 3}, rng);
    auto sel = select_top_k(im, tokens, k);

    std::vector<size_t> order(total);
    std::iota(order.begin(), order.end(), 0u);
    std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) { return s[a] > s[b]; });
    std::set<uint64_t> expect(order.begin(), order.begin() + k);
    std::set<uint64_t> got;
    for (auto [f, p] : sel.indices) got.insert(f * n + p);
    CHECK(got == expect);
  }
}

TEST_CASE("selection is permutation-equivariant on distinct scores") {
  Rng rng(5);
  const uint64_t m = 1, n = 8, k = 3;
  std::vector<double> s(n);
  for (double& v : s) v = rng.uniform();
  Tensor tokens = Tensor::randn({n, 2}, rng);
  auto sel = select_top_k(scores_from(s, m, n), tokens, k);

  // Reverse the patch order.
  std::vector<double> s_rev(s.rbegin(), s.rend());
  std::vector<size_t> rev_rows(n);
  for (size_t i = 0; i < n; ++i) rev_rows[i] = n - 1 - i;
  auto sel_rev = select_top_k(scores_from(s_rev, m, n), gather_rows(tokens, rev_rows), k);

  std::multiset<double> scores_a, scores_b;
  for (size_t i = 0; i < k; ++i) {
    scores_a.insert(s[sel.indices[i].second]);
    scores_b.insert(s_rev[sel_rev.indices[i].second]);
    CHECK(sel_rev.indices[i].second == n - 1 - sel.indices[i].second);
  }
  CHECK(scores_a == scores_b);
}

TEST_CASE("raising an unselected score above the k-th swaps exactly that entry in") {
  const uint64_t m = 2, n = 3, k = 2;
  std::vector<double> s{0.9, 0.1, 0.6, 0.2, 0.3, 0.05};
  Tensor tokens = Tensor::zeros({6, 2});
  auto before = select_top_k(scores_from(s, m, n), tokens, k);
  std::set<uint64_t> set_before;
  for (auto [f, p] : before.indices) set_before.insert(f * n + p);
  CHECK(set_before == std::set<uint64_t>{0, 2});

  s[4] = 0.7;  // above the current k-th score (0.6)
  auto after = select_top_k(scores_from(s, m, n), tokens, k);
  std::set<uint64_t> set_after;
  for (auto [f, p] : after.indices) set_after.insert(f * n + p);
  CHECK(set_after == std::set<uint64_t>{0, 4});
}

TEST_CASE("gradients flow through gathered values, never through indices") {
  Rng rng(6);
  const uint64_t m = 2, n = 3, k = 2;
  Tensor patch_tokens = Tensor::randn({m * n, 4}, rng, 1.0, true);
  // Scores derived from the tokens themselves, in-graph.
  Tensor weights = Tensor::randn({4, 1}, rng);
  Tensor raw = transpose(matmul(patch_tokens, weights));
  auto im = informativeness_from_attention(softmax_rows(raw), m, n);
  auto sel = select_top_k(im, patch_tokens, k);
  sum_all(sel.tokens).backward();

  std::set<uint64_t> picked;
  for (auto [f, p] : sel.indices) picked.insert(f * n + p);
  const auto& g = patch_tokens.grad();
  for (uint64_t row = 0; row < m * n; ++row) {
    const double expect = picked.count(row) ? 1.0 : 0.0;
    for (size_t c = 0; c < 4; ++c) CHECK(g[row * 4 + c] == doctest::Approx(expect));
  }
}
