// SPDX-License-Identifier: Apache-2.0

#include "pig/generator.hpp"

#include <cmath>

#include "doctest.h"
#include "pig/errors.hpp"
#include "pig/objectives.hpp"

using namespace pig;

namespace {

RunConfig gen_cfg() {
  RunConfig cfg;
  cfg.data_m = 2;
  cfg.data_n = 3;
  cfg.data_d_in = 6;
  cfg.data_p_info = 1;
  cfg.model_d = 16;
  cfg.model_heads = 4;
  cfg.model_gen_depth = 2;
  cfg.model_k = 2;
  cfg.data_text_len = 3;
  cfg.model_max_text_len = 5;
  return cfg;
}

struct GenFixture {
  RunConfig cfg = gen_cfg();
  Rng rng{21};
  TextEncoder text_enc{cfg, rng};
  PseudoQueryGenerator gen{cfg, rng, &text_enc};
  Rng data_rng{22};
  Tensor video_tokens = Tensor::randn({4, 16}, data_rng);
  Tensor frame_tokens = Tensor::randn({2, 16}, data_rng);
  Tensor selected = Tensor::randn({2, 16}, data_rng);
};

}  // namespace

TEST_CASE("generation is deterministic and depends on the last content token") {
  GenFixture fx;
  std::vector<Tensor> input{fx.video_tokens, fx.frame_tokens, fx.selected};
  Tensor a = fx.gen.generate(input);
  Tensor b = fx.gen.generate(input);
  CHECK(a.data() == b.data());  // bitwise

  Tensor perturbed = Tensor::from_data(fx.selected.shape(), fx.selected.data());
  perturbed.mutable_data()[perturbed.size() - 1] += 0.05;
  Tensor c = fx.gen.generate({fx.video_tokens, fx.frame_tokens, perturbed});
  CHECK(a.data() != c.data());
}

TEST_CASE("pseudo query lives in the text feature dimension") {
  GenFixture fx;
  Tensor t_p = fx.gen.generate({fx.video_tokens, fx.frame_tokens, fx.selected});
  CHECK(t_p.shape() == std::vector<size_t>{16});
  CHECK(t_p.all_finite());
}

TEST_CASE("every position is invariant to perturbations of later positions") {
  GenFixture fx;
  std::vector<Tensor> input{fx.video_tokens, fx.frame_tokens, fx.selected};
  Tensor base = fx.gen.generate_all_positions(input);
  const size_t L = base.rows();  // bos + 4 + 2 + 2 + eos = 10
  REQUIRE(L == 10);

  // Perturb each content token in turn; positions before it must not move.
  // Content row r sits at sequence position r + 1 (bos first).
  std::vector<Tensor*> parts{&fx.video_tokens, &fx.frame_tokens, &fx.selected};
  size_t content_row = 0;
  for (Tensor* part : parts) {
    for (size_t r = 0; r < part->rows(); ++r, ++content_row) {
      Tensor copy = Tensor::from_data(part->shape(), part->data());
      for (size_t c = 0; c < copy.cols(); ++c) copy.mutable_data()[r * copy.cols() + c] += 0.37;
      std::vector<Tensor> mutated;
      for (Tensor* p2 : parts) mutated.push_back(p2 == part ? copy : *p2);
      Tensor out = fx.gen.generate_all_positions(mutated);
      const size_t seq_pos = content_row + 1;
      double before_diff = 0.0, at_diff = 0.0;
      for (size_t i = 0; i < seq_pos; ++i) {
        for (size_t c = 0; c < base.cols(); ++c) {
          before_diff = std::max(before_diff, std::abs(out.at(i, c) - base.at(i, c)));
        }
      }
      for (size_t c = 0; c < base.cols(); ++c) {
        at_diff = std::max(at_diff, std::abs(out.at(seq_pos, c) - base.at(seq_pos, c)));
      }
      CHECK(before_diff < 1e-12);
      CHECK(at_diff > 0.0);  // the perturbed position itself must move
    }
  }
}

TEST_CASE("generator parameters receive nonzero gradient from the reconstruction loss alone") {
  GenFixture fx;
  Rng rng(23);
  Tensor target = Tensor::randn({16}, rng);
  Tensor t_p = fx.gen.generate({fx.video_tokens, fx.frame_tokens, fx.selected});
  recon_loss(t_p, target).backward();
  ParamList params;
  fx.gen.collect_params(params, "generator");
  size_t with_signal = 0;
  for (const auto& p : params) {
    if (!p.tensor.has_grad()) continue;
    for (double g : p.tensor.grad()) {
      if (g != 0.0) {
        ++with_signal;
        break;
      }
    }
  }
  // Nearly all generator parameters should see gradient (key biases are
  // softmax-shift-inert by construction).
  CHECK(with_signal > params.size() / 2);
  bool input_proj_live = false;
  for (const auto& p : params) {
    if (p.name == "generator.input_proj.weight" && p.tensor.has_grad()) {
      for (double g : p.tensor.grad()) input_proj_live = input_proj_live || g != 0.0;
    }
  }
  CHECK(input_proj_live);
}

TEST_CASE("copy_text init clones the text encoder transformer weights") {
  RunConfig cfg = gen_cfg();
  Rng rng(24);
  TextEncoder text_enc(cfg, rng);
  PseudoQueryGenerator gen(cfg, rng, &text_enc);
  ParamList gp, tp;
  gen.collect_params(gp, "g");
  text_enc.collect_params(tp, "t");
  auto find = [](const ParamList& list, const std::string& name) -> const Tensor& {
    for (const auto& p : list) {
      if (p.name == name) return p.tensor;
    }
    throw std::runtime_error("missing " + name);
  };
  CHECK(find(gp, "g.block0.attn.h0.w_q").data() == find(tp, "t.block0.attn.h0.w_q").data());
  CHECK(find(gp, "g.block1.mlp_in.weight").data() == find(tp, "t.block1.mlp_in.weight").data());
  CHECK(find(gp, "g.proj.weight").data() == find(tp, "t.proj.weight").data());

  // Copies, not shared handles: updating one must not touch the other.
  ParamList gp2;
  gen.collect_params(gp2, "g");
  for (auto& p : gp2) {
    if (p.name == "g.block0.attn.h0.w_q") p.tensor.mutable_data()[0] += 1.0;
  }
  CHECK(find(gp, "g.block0.attn.h0.w_q").data() != find(tp, "t.block0.attn.h0.w_q").data());

  RunConfig xcfg = gen_cfg();
  xcfg.model_generator_init = GeneratorInit::xavier;
  Rng rng2(24);
  TextEncoder text_enc2(xcfg, rng2);
  PseudoQueryGenerator gen2(xcfg, rng2, &text_enc2);
  ParamList gx;
  gen2.collect_params(gx, "g");
  CHECK(find(gx, "g.block0.attn.h0.w_q").data() != find(tp, "t.block0.attn.h0.w_q").data());
}

TEST_CASE("input width and sequence length are validated") {
  GenFixture fx;
  Tensor wrong = Tensor::zeros({2, 8});
  CHECK_THROWS_AS(fx.gen.generate({wrong}), ShapeError);
  Tensor too_many = Tensor::zeros({40, 16});
  CHECK_THROWS_AS(fx.gen.generate({too_many}), ShapeError);
  CHECK_THROWS_AS(fx.gen.generate({}), UsageError);
}
