// SPDX-License-Identifier: Apache-2.0

#include "pig/config.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "pig/errors.hpp"
#include "pig/serialize.hpp"

namespace pig {

namespace {

std::string trim(const std::string& s) {
  size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

uint64_t parse_u64(const std::string& key, const std::string& v) {
  try {
    size_t pos = 0;
    if (!v.empty() && v[0] == '-') throw std::invalid_argument("negative");
    const uint64_t x = std::stoull(v, &pos);
    if (pos != v.size()) throw std::invalid_argument("trailing");
    return x;
  } catch (const std::exception&) {
    throw ConfigError("config key " + key + ": expected unsigned integer, got '" + v + "'");
  }
}

double parse_f64(const std::string& key, const std::string& v) {
  try {
    size_t pos = 0;
    const double x = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument("trailing");
    return x;
  } catch (const std::exception&) {
    throw ConfigError("config key " + key + ": expected number, got '" + v + "'");
  }
}

std::string fmt_f64(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

struct Field {
  std::function<void(RunConfig&, const std::string& key, const std::string& value)> set;
  std::function<std::string(const RunConfig&)> get;
};

const std::map<std::string, Field>& schema() {
  static const std::map<std::string, Field> s = [] {
    std::map<std::string, Field> m;
    auto u64 = [&m](const std::string& key, uint64_t RunConfig::*f) {
      m[key] = Field{[f](RunConfig& c, const std::string& k, const std::string& v) { c.*f = parse_u64(k, v); },
                     [f](const RunConfig& c) { return std::to_string(c.*f); }};
    };
    auto f64 = [&m](const std::string& key, double RunConfig::*f) {
      m[key] = Field{[f](RunConfig& c, const std::string& k, const std::string& v) { c.*f = parse_f64(k, v); },
                     [f](const RunConfig& c) { return fmt_f64(c.*f); }};
    };
    u64("data.n_pairs", &RunConfig::data_n_pairs);
    u64("data.z_dim", &RunConfig::data_z_dim);
    u64("data.d_in", &RunConfig::data_d_in);
    u64("data.m", &RunConfig::data_m);
    u64("data.n", &RunConfig::data_n);
    u64("data.p_info", &RunConfig::data_p_info);
    f64("data.sigma_video", &RunConfig::data_sigma_video);
    f64("data.sigma_text", &RunConfig::data_sigma_text);
    f64("data.sigma_patch", &RunConfig::data_sigma_patch);
    u64("data.text_len", &RunConfig::data_text_len);
    f64("data.drift", &RunConfig::data_drift);
    f64("data.train_frac", &RunConfig::data_train_frac);
    f64("data.val_frac", &RunConfig::data_val_frac);
    u64("data.seed", &RunConfig::data_seed);

    u64("model.d", &RunConfig::model_d);
    u64("model.heads", &RunConfig::model_heads);
    u64("model.enc_depth", &RunConfig::model_enc_depth);
    u64("model.gen_depth", &RunConfig::model_gen_depth);
    u64("model.mlp_ratio", &RunConfig::model_mlp_ratio);
    u64("model.k", &RunConfig::model_k);
    m["model.its_scale"] = Field{
        [](RunConfig& c, const std::string& k, const std::string& v) {
          if (v == "per_head") c.model_its_scale = ItsScale::per_head;
          else if (v == "paper_literal") c.model_its_scale = ItsScale::paper_literal;
          else throw ConfigError("config key " + k + ": expected per_head|paper_literal, got '" + v + "'");
        },
        [](const RunConfig& c) { return to_string(c.model_its_scale); }};
    m["model.generator_input"] = Field{
        [](RunConfig& c, const std::string& k, const std::string& v) {
          if (v == "full") c.model_generator_input = GeneratorInput::full;
          else if (v == "xv") c.model_generator_input = GeneratorInput::xv;
          else if (v == "xv_xf") c.model_generator_input = GeneratorInput::xv_xf;
          else if (v == "xf_xip") c.model_generator_input = GeneratorInput::xf_xip;
          else throw ConfigError("config key " + k + ": expected full|xv|xv_xf|xf_xip, got '" + v + "'");
        },
        [](const RunConfig& c) { return to_string(c.model_generator_input); }};
    m["model.generator_arch"] = Field{
        [](RunConfig& c, const std::string& k, const std::string& v) {
          if (v == "causal") c.model_generator_arch = GeneratorArch::causal;
          else if (v == "mlp" || v == "q_former")
            throw ConfigError("config key " + k + ": architecture '" + v + "' is not implemented; only causal is");
          else throw ConfigError("config key " + k + ": expected causal, got '" + v + "'");
        },
        [](const RunConfig& c) { return to_string(c.model_generator_arch); }};
    m["model.generator_init"] = Field{
        [](RunConfig& c, const std::string& k, const std::string& v) {
          if (v == "copy_text") c.model_generator_init = GeneratorInit::copy_text;
          else if (v == "xavier") c.model_generator_init = GeneratorInit::xavier;
          else throw ConfigError("config key " + k + ": expected copy_text|xavier, got '" + v + "'");
        },
        [](const RunConfig& c) { return to_string(c.model_generator_init); }};
    u64("model.fusioner_heads", &RunConfig::model_fusioner_heads);
    u64("model.max_text_len", &RunConfig::model_max_text_len);

    f64("train.stage1_lr", &RunConfig::train_stage1_lr);
    f64("train.stage2_lr", &RunConfig::train_stage2_lr);
    u64("train.batch_size", &RunConfig::train_batch_size);
    u64("train.stage1_steps", &RunConfig::train_stage1_steps);
    u64("train.stage2_steps", &RunConfig::train_stage2_steps);
    f64("train.alpha", &RunConfig::train_alpha);
    u64("train.seed", &RunConfig::train_seed);
    u64("train.eval_every", &RunConfig::train_eval_every);
    u64("train.patience", &RunConfig::train_patience);
    f64("train.tau_init", &RunConfig::train_tau_init);
    f64("train.tau_max", &RunConfig::train_tau_max);
    return m;
  }();
  return s;
}

}  // namespace

std::string to_string(ItsScale v) { return v == ItsScale::per_head ? "per_head" : "paper_literal"; }

std::string to_string(GeneratorInput v) {
  switch (v) {
    case GeneratorInput::full: return "full";
    case GeneratorInput::xv: return "xv";
    case GeneratorInput::xv_xf: return "xv_xf";
    case GeneratorInput::xf_xip: return "xf_xip";
  }
  return "full";
}

std::string to_string(GeneratorArch) { return "causal"; }

std::string to_string(GeneratorInit v) {
  return v == GeneratorInit::copy_text ? "copy_text" : "xavier";
}

void RunConfig::set(const std::string& key, const std::string& value) {
  auto it = schema().find(key);
  if (it == schema().end()) throw ConfigError("unknown config key: " + key);
  it->second.set(*this, key, value);
}

void RunConfig::set_line(const std::string& line) {
  const size_t eq = line.find('=');
  if (eq == std::string::npos) throw ConfigError("malformed config line (missing '='): " + line);
  set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
}

RunConfig RunConfig::from_text(const std::string& text) {
  RunConfig cfg;
  std::istringstream in(text);
  std::string line;
  size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const size_t hash_pos = line.find('#');
    if (hash_pos != std::string::npos) line = line.substr(0, hash_pos);
    line = trim(line);
    if (line.empty()) continue;
    try {
      cfg.set_line(line);
    } catch (const ConfigError& e) {
      throw ConfigError("line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return cfg;
}

RunConfig RunConfig::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return from_text(buf.str());
}

void RunConfig::validate() const {
  auto require = [](bool ok, const std::string& msg) {
    if (!ok) throw ConfigError("invalid config: " + msg);
  };
  require(data_n_pairs >= 4, "data.n_pairs must be at least 4");
  require(data_z_dim >= 1 && data_d_in >= 1, "data dims must be positive");
  require(data_m >= 1 && data_n >= 1, "data.m and data.n must be positive");
  require(data_p_info >= 1 && data_p_info <= data_n, "data.p_info must lie in [1, data.n]");
  require(data_sigma_video >= 0 && data_sigma_text >= 0 && data_sigma_patch >= 0,
          "noise levels must be non-negative");
  require(data_text_len >= 1, "data.text_len must be positive");
  require(data_train_frac > 0 && data_val_frac >= 0 && data_train_frac + data_val_frac < 1.0,
          "train/val fractions must leave room for a test split");
  require(model_d >= 2, "model.d must be at least 2");
  require(model_heads >= 1 && model_d % model_heads == 0, "model.d must be divisible by model.heads");
  require(model_fusioner_heads >= 1 && model_d % model_fusioner_heads == 0,
          "model.d must be divisible by model.fusioner_heads");
  require(model_enc_depth >= 1 && model_gen_depth >= 1, "depths must be positive");
  require(model_mlp_ratio >= 1, "model.mlp_ratio must be positive");
  require(model_k >= 1 && model_k <= data_m * data_n, "model.k must lie in [1, m*n]");
  require(model_max_text_len >= data_text_len, "model.max_text_len must cover data.text_len");
  require(train_stage1_lr > 0 && train_stage2_lr > 0, "learning rates must be positive");
  require(train_batch_size >= 2, "train.batch_size must be at least 2 (contrastive negatives)");
  require(train_alpha >= 0, "train.alpha must be non-negative");
  require(train_eval_every >= 1, "train.eval_every must be positive");
  require(train_tau_init > 0 && train_tau_max >= train_tau_init,
          "temperature init/max must satisfy 0 < init <= max");
}

std::string RunConfig::canonical_text() const {
  std::string out;
  for (const auto& [key, field] : schema()) {
    out += key;
    out += " = ";
    out += field.get(*this);
    out += "\n";
  }
  return out;
}

uint64_t RunConfig::hash() const { return fnv1a64(canonical_text()); }

}  // namespace pig
