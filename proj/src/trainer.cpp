// SPDX-License-Identifier: Apache-2.0

#include "pig/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <unordered_map>

#include "pig/errors.hpp"
#include "pig/serialize.hpp"

namespace pig {

namespace {

constexpr uint32_t kCheckpointVersion = 1;
constexpr uint64_t kStreamTrainer = 0x4000000000ULL;
constexpr const char* kOptPrefix = "opt.";

bool is_generator_param(const std::string& name) { return name.rfind("generator.", 0) == 0; }

}  // namespace

void Checkpoint::save(const std::string& path) const {
  ByteWriter w;
  w.magic("PIGC");
  w.u32(kCheckpointVersion);
  w.u64(config_hash);
  w.u64(step);
  for (uint64_t s : rng_state) w.u64(s);
  w.u32(static_cast<uint32_t>(blobs.size()));
  for (const auto& [name, data] : blobs) {
    w.str(name);
    w.f64_array(data);
  }
  w.write_file(path);
}

Checkpoint Checkpoint::load(const std::string& path) {
  ByteReader r = ByteReader::from_file(path);
  r.expect_magic("PIGC", "checkpoint file " + path);
  const uint32_t version = r.u32();
  if (version != kCheckpointVersion) {
    throw FormatError("checkpoint " + path + ": unsupported version " + std::to_string(version));
  }
  Checkpoint c;
  c.config_hash = r.u64();
  c.step = r.u64();
  for (uint64_t& s : c.rng_state) s = r.u64();
  const uint32_t count = r.u32();
  c.blobs.reserve(count);
  for (uint32_t i = 0; i < count; ++i) {
    std::string name = r.str();
    c.blobs.emplace_back(std::move(name), r.f64_array());
  }
  return c;
}

uint64_t Checkpoint::model_hash() const {
  ByteWriter w;
  for (const auto& [name, data] : blobs) {
    if (name.rfind(kOptPrefix, 0) == 0) continue;
    w.str(name);
    w.f64_array(data);
  }
  return fnv1a64(w.bytes());
}

Adam::Adam(const ParamList& params, AdamConfig cfg) : cfg_(cfg) {
  m_.resize(params.size());
  v_.resize(params.size());
  for (size_t i = 0; i < params.size(); ++i) {
    m_[i].assign(params[i].tensor.size(), 0.0);
    v_[i].assign(params[i].tensor.size(), 0.0);
  }
}

void Adam::step(ParamList& params, double lr) {
  ++t_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  for (size_t i = 0; i < params.size(); ++i) {
    if (!params[i].trainable || !params[i].tensor.has_grad()) continue;
    auto& data = params[i].tensor.mutable_data();
    const auto& grad = params[i].tensor.grad();
    auto& m = m_[i];
    auto& v = v_[i];
    for (size_t j = 0; j < data.size(); ++j) {
      const double g = grad[j];
      m[j] = cfg_.beta1 * m[j] + (1.0 - cfg_.beta1) * g;
      v[j] = cfg_.beta2 * v[j] + (1.0 - cfg_.beta2) * g * g;
      data[j] -= lr * (m[j] / bc1) / (std::sqrt(v[j] / bc2) + cfg_.eps);
    }
  }
}

void Adam::export_blobs(const ParamList& params,
                        std::vector<std::pair<std::string, std::vector<double>>>& out) const {
  for (size_t i = 0; i < params.size(); ++i) {
    out.emplace_back(kOptPrefix + ("m." + params[i].name), m_[i]);
    out.emplace_back(kOptPrefix + ("v." + params[i].name), v_[i]);
  }
  out.emplace_back(std::string(kOptPrefix) + "t", std::vector<double>{static_cast<double>(t_)});
}

void Adam::import_blobs(const ParamList& params,
                        const std::vector<std::pair<std::string, std::vector<double>>>& in) {
  std::unordered_map<std::string, const std::vector<double>*> by_name;
  for (const auto& [name, data] : in) by_name[name] = &data;
  for (size_t i = 0; i < params.size(); ++i) {
    auto mi = by_name.find(kOptPrefix + ("m." + params[i].name));
    auto vi = by_name.find(kOptPrefix + ("v." + params[i].name));
    if (mi == by_name.end() || vi == by_name.end()) continue;  // fresh optimizer for this param
    if (mi->second->size() != m_[i].size() || vi->second->size() != v_[i].size()) {
      throw FormatError("optimizer state size mismatch for " + params[i].name);
    }
    m_[i] = *mi->second;
    v_[i] = *vi->second;
  }
  auto ti = by_name.find(std::string(kOptPrefix) + "t");
  if (ti != by_name.end() && !ti->second->empty()) {
    t_ = static_cast<uint64_t>((*ti->second)[0]);
  }
}

std::string StepLog::line() const {
  std::ostringstream os;
  os.setf(std::ios::fixed);
  os.precision(6);
  os << "step=" << step << " l_cons=" << l_cons << " l_recon=" << l_recon << " total=" << total;
  return os.str();
}

Trainer::Trainer(PigModel& model, const PairedDataset& dataset, std::ostream* log)
    : model_(model), dataset_(dataset), cfg_(model.config()), log_(log) {
  train_indices_ = dataset.indices_of(Split::train);
  if (train_indices_.size() < cfg_.train_batch_size) {
    throw UsageError("train split smaller than batch size");
  }
  params_ = model.parameters();
  adam_ = Adam(params_);
  rng_ = Rng::derive(cfg_.train_seed, kStreamTrainer);
}

std::vector<uint64_t> Trainer::sample_batch(size_t batch_size) {
  // Without replacement per step: partial Fisher-Yates over train indices.
  std::vector<uint64_t> pool = train_indices_;
  std::vector<uint64_t> batch(batch_size);
  for (size_t i = 0; i < batch_size; ++i) {
    const uint64_t pick = i + rng_.next_below(pool.size() - i);
    std::swap(pool[i], pool[pick]);
    batch[i] = pool[i];
  }
  return batch;
}

Trainer::BatchLoss Trainer::stage1_loss(const std::vector<uint64_t>& batch) {
  Tensor acc = Tensor::scalar(0.0);
  for (uint64_t idx : batch) {
    // Encoders and selection are frozen in stage 1; run them off-tape and
    // let gradients start at the generator inputs.
    std::vector<Tensor> gen_inputs;
    Tensor t;
    {
      NoGradGuard ng;
      MultiGrainFeatures f = model_.encode_video(dataset_.video(idx));
      SelectedPatches sel = model_.select_patches(f, model_.informativeness_of(f));
      gen_inputs = model_.generator_inputs(f, sel);
      t = model_.encode_text(dataset_.text(idx));
    }
    Tensor t_p = model_.generator().generate(gen_inputs);
    acc = add(acc, recon_loss(t_p, t));
  }
  BatchLoss loss;
  loss.total = scale(acc, 1.0 / static_cast<double>(batch.size()));
  loss.l_recon = loss.total.value();
  return loss;
}

Trainer::BatchLoss Trainer::stage2_loss(const std::vector<uint64_t>& batch) {
  std::vector<Tensor> text_rows, video_rows;
  Tensor recon_acc = Tensor::scalar(0.0);
  for (uint64_t idx : batch) {
    VideoForward fv = model_.forward_video(dataset_.video(idx));
    Tensor t = model_.encode_text(dataset_.text(idx));
    recon_acc = add(recon_acc, recon_loss(fv.pseudo_query, t));
    text_rows.push_back(reshape(l2_normalize(t), {1, model_.config().model_d}));
    video_rows.push_back(reshape(l2_normalize(fv.video_repr), {1, model_.config().model_d}));
  }
  Tensor sim = matmul_nt(concat_rows(text_rows), concat_rows(video_rows));
  Tensor l_cons = info_nce(sim, model_.temperature().tau());
  Tensor l_recon = scale(recon_acc, 1.0 / static_cast<double>(batch.size()));
  BatchLoss loss;
  loss.l_cons = l_cons.value();
  loss.l_recon = l_recon.value();
  loss.total = total_loss(l_cons, l_recon, cfg_.train_alpha);
  return loss;
}

uint64_t Trainer::frozen_hash() const {
  ByteWriter w;
  for (const Parameter& p : params_) {
    if (p.trainable) continue;
    w.str(p.name);
    w.f64_array(p.tensor.data());
  }
  return fnv1a64(w.bytes());
}

void Trainer::log_step(const StepLog& entry) {
  if (log_) *log_ << entry.line() << "\n";
}

StageResult Trainer::run_stage1() {
  StageResult result;
  // Stage 1 trains the generator alone; everything else stays frozen.
  for (Parameter& p : params_) p.trainable = is_generator_param(p.name);
  const uint64_t frozen_before = frozen_hash();
  const auto test_access_before = dataset_.access_counts()[2];

  for (uint64_t s = 0; s < cfg_.train_stage1_steps; ++s) {
    auto batch = sample_batch(cfg_.train_batch_size);
    BatchLoss loss = stage1_loss(batch);
    if (!std::isfinite(loss.total.value())) {
      result.aborted_nan = true;
      break;
    }
    loss.total.backward();
    adam_.step(params_, cfg_.train_stage1_lr);
    for (Parameter& p : params_) p.tensor.zero_grad();
    ++step_;
    ++result.steps_run;
    StepLog entry{step_, 0.0, loss.l_recon, loss.total.value()};
    result.logs.push_back(entry);
    log_step(entry);
    if (frozen_hash() != frozen_before) {
      throw Error("stage-1 freeze contract violated: frozen parameters changed");
    }
  }
  if (dataset_.access_counts()[2] != test_access_before) {
    throw Error("stage-1 touched the test split");
  }
  for (Parameter& p : params_) p.trainable = true;
  return result;
}

StageResult Trainer::run_stage2() {
  StageResult result;
  for (Parameter& p : params_) p.trainable = true;
  const auto test_access_before = dataset_.access_counts()[2];

  Checkpoint last_good = checkpoint();
  double best_sum_r = -1.0;
  uint64_t evals_since_best = 0;

  for (uint64_t s = 0; s < cfg_.train_stage2_steps; ++s) {
    auto batch = sample_batch(cfg_.train_batch_size);
    BatchLoss loss = stage2_loss(batch);
    if (!std::isfinite(loss.total.value())) {
      result.aborted_nan = true;
      restore(last_good);
      break;
    }
    loss.total.backward();
    adam_.step(params_, cfg_.train_stage2_lr);
    model_.temperature().clamp();
    for (Parameter& p : params_) p.tensor.zero_grad();
    ++step_;
    ++result.steps_run;
    StepLog entry{step_, loss.l_cons, loss.l_recon, loss.total.value()};
    result.logs.push_back(entry);
    log_step(entry);

    if ((s + 1) % cfg_.train_eval_every == 0) {
      EvalRecord rec{step_, evaluate_split(model_, dataset_, Split::val)};
      result.evals.push_back(rec);
      if (log_) *log_ << "eval step=" << step_ << " " << rec.metrics.line() << "\n";
      last_good = checkpoint();
      if (rec.metrics.sum_r > best_sum_r) {
        best_sum_r = rec.metrics.sum_r;
        evals_since_best = 0;
      } else if (++evals_since_best >= cfg_.train_patience) {
        if (log_) *log_ << "early stop at step=" << step_ << "\n";
        break;
      }
    }
  }
  if (dataset_.access_counts()[2] != test_access_before) {
    throw Error("stage-2 touched the test split");
  }
  return result;
}

Checkpoint Trainer::checkpoint() const {
  Checkpoint c;
  c.config_hash = cfg_.hash();
  c.step = step_;
  c.rng_state = rng_.state();
  for (const Parameter& p : params_) c.blobs.emplace_back(p.name, p.tensor.data());
  adam_.export_blobs(params_, c.blobs);
  return c;
}

void Trainer::restore(const Checkpoint& ckpt) {
  if (ckpt.config_hash != cfg_.hash()) {
    throw FormatError("checkpoint config hash does not match trainer config");
  }
  apply_checkpoint(model_, ckpt);
  adam_.import_blobs(params_, ckpt.blobs);
  step_ = ckpt.step;
  rng_.set_state(ckpt.rng_state);
}

Checkpoint capture_checkpoint(const PigModel& model) {
  Checkpoint c;
  c.config_hash = model.config().hash();
  for (const Parameter& p : model.parameters()) c.blobs.emplace_back(p.name, p.tensor.data());
  return c;
}

void apply_checkpoint(PigModel& model, const Checkpoint& ckpt) {
  std::unordered_map<std::string, const std::vector<double>*> by_name;
  for (const auto& [name, data] : ckpt.blobs) by_name[name] = &data;
  for (Parameter& p : model.parameters()) {
    auto it = by_name.find(p.name);
    if (it == by_name.end()) throw FormatError("checkpoint missing parameter " + p.name);
    if (it->second->size() != p.tensor.size()) {
      throw FormatError("checkpoint parameter " + p.name + " has wrong size");
    }
    p.tensor.mutable_data() = *it->second;
  }
}

double mean_pseudo_query_cosine(const PigModel& model, const PairedDataset& ds, Split split) {
  NoGradGuard ng;
  const auto indices = ds.indices_of(split);
  if (indices.empty()) throw UsageError("mean_pseudo_query_cosine: empty split");
  double acc = 0.0;
  for (uint64_t idx : indices) {
    VideoForward fv = model.forward_video(ds.video(idx));
    Tensor t = model.encode_text(ds.text(idx));
    acc += cosine_sim(fv.pseudo_query, t).value();
  }
  return acc / static_cast<double>(indices.size());
}

RetrievalMetrics evaluate_split(const PigModel& model, const PairedDataset& ds, Split split) {
  NoGradGuard ng;
  const auto indices = ds.indices_of(split);
  if (indices.empty()) throw UsageError("evaluate_split: empty split");
  const size_t n = indices.size();
  const size_t d = model.config().model_d;
  std::vector<std::vector<double>> texts(n), videos(n);
  std::vector<uint64_t> ids(n);
  for (size_t i = 0; i < n; ++i) {
    texts[i] = l2_normalize(model.encode_text(ds.text(indices[i]))).data();
    videos[i] = l2_normalize(model.forward_video(ds.video(indices[i])).video_repr).data();
    ids[i] = ds.ids[indices[i]];
  }
  std::vector<double> sim(n * n);
  for (size_t t = 0; t < n; ++t) {
    for (size_t v = 0; v < n; ++v) {
      double dot = 0.0;
      for (size_t j = 0; j < d; ++j) dot += texts[t][j] * videos[v][j];
      sim[t * n + v] = dot;
    }
  }
  return compute_metrics(sim, n, n, ids, ids);
}

}  // namespace pig
