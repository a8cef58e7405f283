// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace pig {

enum class ItsScale { per_head, paper_literal };
enum class GeneratorInput { full, xv, xv_xf, xf_xip };
enum class GeneratorArch { causal };  // mlp / q-former hooks are config-rejected for now
enum class GeneratorInit { copy_text, xavier };

// Every knob in the pipeline, one flat key per field. Files are plain
// `section.key = value` lines; '#' starts a comment; unknown keys are
// rejected. CLI flags override file values.
struct RunConfig {
  // data.*
  uint64_t data_n_pairs = 2000;
  uint64_t data_z_dim = 16;
  uint64_t data_d_in = 32;
  uint64_t data_m = 8;
  uint64_t data_n = 16;
  uint64_t data_p_info = 2;
  double data_sigma_video = 1.0;
  double data_sigma_text = 0.05;
  double data_sigma_patch = 0.1;
  uint64_t data_text_len = 6;
  double data_drift = 0.25;
  double data_train_frac = 0.7;
  double data_val_frac = 0.15;
  uint64_t data_seed = 0;

  // model.*
  uint64_t model_d = 64;
  uint64_t model_heads = 4;
  uint64_t model_enc_depth = 2;
  uint64_t model_gen_depth = 2;
  uint64_t model_mlp_ratio = 2;
  uint64_t model_k = 8;
  ItsScale model_its_scale = ItsScale::per_head;
  GeneratorInput model_generator_input = GeneratorInput::full;
  GeneratorArch model_generator_arch = GeneratorArch::causal;
  GeneratorInit model_generator_init = GeneratorInit::copy_text;
  uint64_t model_fusioner_heads = 1;
  uint64_t model_max_text_len = 8;

  // train.*
  double train_stage1_lr = 1e-3;
  double train_stage2_lr = 3e-4;
  uint64_t train_batch_size = 32;
  uint64_t train_stage1_steps = 400;
  uint64_t train_stage2_steps = 400;
  double train_alpha = 2.0;
  uint64_t train_seed = 0;
  uint64_t train_eval_every = 50;
  uint64_t train_patience = 5;
  double train_tau_init = 50.0;
  double train_tau_max = 100.0;

  static RunConfig defaults() { return RunConfig{}; }
  static RunConfig from_file(const std::string& path);
  static RunConfig from_text(const std::string& text);

  // Applies one `section.key=value` assignment; throws ConfigError on
  // unknown keys or malformed values.
  void set(const std::string& key, const std::string& value);
  void set_line(const std::string& line);  // parses "key = value"

  // Cross-field sanity (positive lrs, d % heads, p_info <= n, ...).
  void validate() const;

  // Canonical sorted key=value text; its FNV-1a hash stamps every output.
  std::string canonical_text() const;
  uint64_t hash() const;
};

std::string to_string(ItsScale v);
std::string to_string(GeneratorInput v);
std::string to_string(GeneratorArch v);
std::string to_string(GeneratorInit v);

}  // namespace pig
