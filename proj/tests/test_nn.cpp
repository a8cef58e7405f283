// SPDX-License-Identifier: Apache-2.0

#include "pig/nn.hpp"

#include <cmath>

#include "doctest.h"
#include "oracles.hpp"
#include "pig/errors.hpp"

using namespace pig;
using pig::testing::finite_diff_check;
using pig::testing::all_coords;

TEST_CASE("attention with a single key returns v through value/output projections") {
  Rng rng(1);
  const size_t d = 8;
  auto mha = MultiHeadAttention::make(d, 2, rng);
  Tensor q = Tensor::randn({1, d}, rng);
  Tensor v = Tensor::randn({1, d}, rng);
  Tensor k = Tensor::randn({1, d}, rng);
  auto res = multi_head_attention(q, k, v, mha);

  CHECK(res.scores.size() == 2);
  for (const auto& s : res.scores) CHECK(s.data()[0] == doctest::Approx(1.0));

  // Independent route: project v per head, concatenate, output-project.
  std::vector<Tensor> vh;
  for (const auto& h : mha.head) vh.push_back(add_row_broadcast(matmul(v, h.w_v), h.b_v));
  Tensor expect = add_row_broadcast(matmul(concat_cols(vh), mha.w_o), mha.b_o);
  for (size_t i = 0; i < d; ++i) CHECK(res.out.data()[i] == doctest::Approx(expect.data()[i]));
}

TEST_CASE("causal attention scores are exactly zero above the diagonal") {
  Rng rng(2);
  const size_t d = 8, L = 3;
  auto mha = MultiHeadAttention::make(d, 2, rng);
  Tensor x = Tensor::randn({L, d}, rng);
  auto res = multi_head_attention(x, x, x, mha, /*causal=*/true);
  for (const auto& s : res.scores) {
    for (size_t i = 0; i < L; ++i) {
      for (size_t j = i + 1; j < L; ++j) CHECK(s.at(i, j) == 0.0);
    }
  }
}

TEST_CASE("attention rejects dim not divisible by heads") {
  Rng rng(3);
  CHECK_THROWS_AS(MultiHeadAttention::make(10, 3, rng), ConfigError);
}

TEST_CASE("attention gradients match finite differences (2 heads, L=4, d=8)") {
  Rng rng(4);
  const size_t d = 8, L = 4;
  auto mha = MultiHeadAttention::make(d, 2, rng);
  Tensor q = Tensor::randn({L, d}, rng, 1.0, true);
  Tensor k = Tensor::randn({L, d}, rng, 1.0, true);
  Tensor v = Tensor::randn({L, d}, rng, 1.0, true);
  auto loss_fn = [&]() {
    auto r = multi_head_attention(q, k, v, mha);
    return sum_all(mul(r.out, r.out)).value();
  };
  auto r = multi_head_attention(q, k, v, mha);
  sum_all(mul(r.out, r.out)).backward();
  CHECK(finite_diff_check(q, loss_fn, all_coords(q)).max_rel_err < 1e-3);
  CHECK(finite_diff_check(k, loss_fn, all_coords(k)).max_rel_err < 1e-3);
  CHECK(finite_diff_check(v, loss_fn, all_coords(v)).max_rel_err < 1e-3);
  ParamList params;
  mha.collect_params(params, "attn");
  for (auto& p : params) {
    CHECK(finite_diff_check(p.tensor, loss_fn, pig::testing::sample_coords(p.tensor, 6))
              .max_rel_err < 1e-3);
  }
}

TEST_CASE("attention scores agree with the explicit-loop oracle") {
  Rng rng(6);
  const size_t d = 12, n = 5;
  auto mha = MultiHeadAttention::make(d, 4, rng);
  Tensor q = Tensor::randn({1, d}, rng);
  Tensor keys = Tensor::randn({n, d}, rng);
  auto res = multi_head_attention(q, keys, keys, mha);

  std::vector<double> qv(q.data());
  std::vector<std::vector<double>> kv(n, std::vector<double>(d));
  for (size_t i = 0; i < n; ++i) {
    for (size_t j = 0; j < d; ++j) kv[i][j] = keys.at(i, j);
  }
  auto oracle = pig::testing::attention_scores_oracle(qv, kv, mha,
                                                      std::sqrt(static_cast<double>(d / 4)));
  for (size_t h = 0; h < 4; ++h) {
    for (size_t j = 0; j < n; ++j) {
      CHECK(std::abs(res.scores[h].at(0, j) - oracle[h][j]) < 1e-12);
    }
  }
}

TEST_CASE("transformer block is differentiable end to end") {
  Rng rng(7);
  const size_t d = 8, L = 3;
  auto block = TransformerBlock::make(d, 2, 2 * d, rng);
  Tensor x = Tensor::randn({L, d}, rng, 1.0, true);
  auto loss_fn = [&]() {
    auto r = transformer_block_forward(block, x, true);
    return sum_all(mul(r.out, r.out)).value();
  };
  auto r = transformer_block_forward(block, x, true);
  sum_all(mul(r.out, r.out)).backward();
  CHECK(finite_diff_check(x, loss_fn, all_coords(x)).max_rel_err < 1e-3);
  ParamList params;
  block.collect_params(params, "blk");
  CHECK(params.size() == 2 * 2 + 2 * 6 + 2 + 4);  // 2 LN, 2 heads qkv+biases, out proj, mlp
  for (auto& p : params) {
    CHECK(finite_diff_check(p.tensor, loss_fn, pig::testing::sample_coords(p.tensor, 4))
              .max_rel_err < 1e-3);
  }
}

TEST_CASE("xavier bounds and layer-norm defaults") {
  Rng rng(8);
  Tensor w = xavier_uniform(16, 16, rng);
  const double limit = std::sqrt(6.0 / 32.0);
  for (double v : w.data()) {
    CHECK(v <= limit);
    CHECK(v >= -limit);
  }
  auto ln = LayerNormParams::make(4);
  CHECK(ln.gamma.data() == std::vector<double>{1, 1, 1, 1});
  CHECK(ln.beta.data() == std::vector<double>{0, 0, 0, 0});
}
