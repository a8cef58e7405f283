// SPDX-License-Identifier: Apache-2.0

#include "pig/fusioner.hpp"

#include <cmath>

#include "doctest.h"
#include "oracles.hpp"
#include "pig/errors.hpp"

using namespace pig;
using pig::testing::finite_diff_check;
using pig::testing::all_coords;

namespace {

RunConfig fuse_cfg(uint64_t heads = 1) {
  RunConfig cfg;
  cfg.model_d = 16;
  cfg.model_heads = 4;
  cfg.model_fusioner_heads = heads;
  cfg.data_m = 3;
  return cfg;
}

}  // namespace

TEST_CASE("identical key rows collapse attention to that row's value path") {
  auto cfg = fuse_cfg();
  Rng rng(31);
  Fusioner fus(cfg, rng);
  Rng data_rng(32);
  Tensor row = Tensor::randn({1, 16}, data_rng);
  std::vector<Tensor> reps(4 + 3, row);
  Tensor video_tokens = concat_rows({reps[0], reps[1], reps[2], reps[3]});
  Tensor frame_tokens = concat_rows({reps[4], reps[5], reps[6]});

  Tensor q1 = Tensor::randn({16}, data_rng);
  Tensor q2 = Tensor::randn({16}, data_rng);
  auto a = fus.fuse(q1, video_tokens, frame_tokens);
  auto b = fus.fuse(q2, video_tokens, frame_tokens);
  // Attention over identical keys is a convex combination of one value.
  for (size_t i = 0; i < 16; ++i) {
    CHECK(a.video_repr.data()[i] == doctest::Approx(b.video_repr.data()[i]).epsilon(1e-12));
  }
}

TEST_CASE("pooling weights form a distribution over the 4+m rows") {
  auto cfg = fuse_cfg(2);
  Rng rng(33);
  Fusioner fus(cfg, rng);
  Rng data_rng(34);
  auto res = fus.fuse(Tensor::randn({16}, data_rng), Tensor::randn({4, 16}, data_rng),
                      Tensor::randn({3, 16}, data_rng));
  REQUIRE(res.attention.size() == 2);
  for (const auto& head : res.attention) {
    REQUIRE(head.cols() == 7);
    double sum = 0.0;
    for (size_t j = 0; j < 7; ++j) {
      CHECK(head.at(0, j) >= 0.0);
      sum += head.at(0, j);
    }
    CHECK(std::abs(sum - 1.0) < 1e-12);
  }
}

TEST_CASE("gradients match finite differences for inputs and parameters") {
  auto cfg = fuse_cfg();
  Rng rng(35);
  Fusioner fus(cfg, rng);
  Rng data_rng(36);
  Tensor q = Tensor::randn({16}, data_rng, 1.0, true);
  Tensor video_tokens = Tensor::randn({4, 16}, data_rng, 1.0, true);
  Tensor frame_tokens = Tensor::randn({3, 16}, data_rng, 1.0, true);
  Tensor readout = Tensor::randn({16}, data_rng);
  auto loss_fn = [&]() {
    auto r = fus.fuse(q, video_tokens, frame_tokens);
    return sum_all(mul(r.video_repr, readout)).value();
  };
  auto r = fus.fuse(q, video_tokens, frame_tokens);
  sum_all(mul(r.video_repr, readout)).backward();
  CHECK(finite_diff_check(q, loss_fn, all_coords(q)).max_rel_err < 1e-3);
  CHECK(finite_diff_check(video_tokens, loss_fn, all_coords(video_tokens)).max_rel_err < 1e-3);
  CHECK(finite_diff_check(frame_tokens, loss_fn, all_coords(frame_tokens)).max_rel_err < 1e-3);
  ParamList params;
  fus.collect_params(params, "fusioner");
  for (auto& p : params) {
    CHECK(finite_diff_check(p.tensor, loss_fn, pig::testing::sample_coords(p.tensor, 5))
              .max_rel_err < 1e-3);
  }
}

TEST_CASE("zeroing value/output projections makes the output query-independent") {
  auto cfg = fuse_cfg();
  Rng rng(37);
  Fusioner fus(cfg, rng);
  for (auto& h : fus.attention_params().head) {
    std::fill(h.w_v.mutable_data().begin(), h.w_v.mutable_data().end(), 0.0);
    std::fill(h.b_v.mutable_data().begin(), h.b_v.mutable_data().end(), 0.0);
  }
  std::fill(fus.attention_params().w_o.mutable_data().begin(),
            fus.attention_params().w_o.mutable_data().end(), 0.0);

  Rng data_rng(38);
  Tensor video_tokens = Tensor::randn({4, 16}, data_rng);
  Tensor frame_tokens = Tensor::randn({3, 16}, data_rng);
  auto a = fus.fuse(Tensor::randn({16}, data_rng), video_tokens, frame_tokens);
  auto b = fus.fuse(Tensor::randn({16}, data_rng), video_tokens, frame_tokens);
  CHECK(a.video_repr.data() == b.video_repr.data());
}

TEST_CASE("batched fusion equals per-item fusion bitwise") {
  auto cfg = fuse_cfg();
  Rng rng(39);
  Fusioner fus(cfg, rng);
  Rng data_rng(40);
  std::vector<Tensor> queries, vids, frames;
  for (int i = 0; i < 4; ++i) {
    queries.push_back(Tensor::randn({16}, data_rng));
    vids.push_back(Tensor::randn({4, 16}, data_rng));
    frames.push_back(Tensor::randn({3, 16}, data_rng));
  }
  // "Batch" pass: same items in one loop, interleaved with nothing else.
  std::vector<std::vector<double>> batch_out;
  for (int i = 0; i < 4; ++i) batch_out.push_back(fus.fuse(queries[i], vids[i], frames[i]).video_repr.data());
  // Per-item, reversed order.
  for (int i = 3; i >= 0; --i) {
    CHECK(fus.fuse(queries[i], vids[i], frames[i]).video_repr.data() == batch_out[i]);
  }
}

TEST_CASE("shape mismatches are rejected") {
  auto cfg = fuse_cfg();
  Rng rng(41);
  Fusioner fus(cfg, rng);
  Rng data_rng(42);
  CHECK_THROWS_AS(fus.fuse(Tensor::zeros({8}), Tensor::zeros({4, 16}), Tensor::zeros({3, 16})),
                  ShapeError);
  CHECK_THROWS_AS(fus.fuse(Tensor::zeros({16}), Tensor::zeros({4, 8}), Tensor::zeros({3, 16})),
                  ShapeError);
}
