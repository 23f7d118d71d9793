#include "olt/train.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <nlohmann/json.hpp>

#include "olt/bleu.hpp"
#include "olt/rng.hpp"

namespace olt {

void TrainConfig::validate() const {
  if (lr <= 0.0) throw value_error("train: lr must be positive");
  if (beta1 < 0.0 || beta1 >= 1.0 || beta2 < 0.0 || beta2 >= 1.0) {
    throw value_error("train: betas must be in [0, 1)");
  }
  if (eps <= 0.0) throw value_error("train: eps must be positive");
  if (warmup < 1) throw value_error("train: warmup must be >= 1");
  if (steps < 1) throw value_error("train: steps must be >= 1");
  if (batch_size < 1) throw value_error("train: batch_size must be >= 1");
  if (eval_every < 1) throw value_error("train: eval_every must be >= 1");
  if (bleu_samples < 0) throw value_error("train: bleu_samples must be >= 0");
  if (label_smoothing < 0.0 || label_smoothing >= 1.0) {
    throw value_error("train: label_smoothing must be in [0, 1)");
  }
}

nlohmann::json train_config_to_json(const TrainConfig& cfg) {
  return nlohmann::json{
      {"batch_size", cfg.batch_size},
      {"beta1", cfg.beta1},
      {"beta2", cfg.beta2},
      {"bleu_samples", cfg.bleu_samples},
      {"early_stop_seq_acc", cfg.early_stop_seq_acc},
      {"eps", cfg.eps},
      {"eval_every", cfg.eval_every},
      {"label_smoothing", cfg.label_smoothing},
      {"lr", cfg.lr},
      {"steps", cfg.steps},
      {"warmup", cfg.warmup},
  };
}

TrainConfig train_config_from_json(const nlohmann::json& j) {
  TrainConfig cfg;
  if (j.contains("batch_size")) cfg.batch_size = j.at("batch_size").get<int64_t>();
  if (j.contains("beta1")) cfg.beta1 = j.at("beta1").get<double>();
  if (j.contains("beta2")) cfg.beta2 = j.at("beta2").get<double>();
  if (j.contains("bleu_samples")) cfg.bleu_samples = j.at("bleu_samples").get<int64_t>();
  if (j.contains("early_stop_seq_acc")) {
    cfg.early_stop_seq_acc = j.at("early_stop_seq_acc").get<double>();
  }
  if (j.contains("eps")) cfg.eps = j.at("eps").get<double>();
  if (j.contains("eval_every")) cfg.eval_every = j.at("eval_every").get<int64_t>();
  if (j.contains("label_smoothing")) cfg.label_smoothing = j.at("label_smoothing").get<double>();
  if (j.contains("lr")) cfg.lr = j.at("lr").get<double>();
  if (j.contains("steps")) cfg.steps = j.at("steps").get<int64_t>();
  if (j.contains("warmup")) cfg.warmup = j.at("warmup").get<int64_t>();
  return cfg;
}

void RunConfig::validate() const {
  model.validate();
  task.validate();
  train.validate();
  if (model.src_vocab != task.vocab_size || model.tgt_vocab != task.vocab_size) {
    throw value_error("config: model vocab sizes must equal task vocab_size for "
                      "synthetic tasks");
  }
  if (task.length_max + 2 > model.max_len) {
    throw value_error("config: max_len " + std::to_string(model.max_len) +
                      " too small for task length_max " + std::to_string(task.length_max));
  }
  if (model.embedding_mode == EmbeddingMode::pretrained_frozen && embedding_file.empty()) {
    throw value_error("config: pretrained_frozen embeddings need embedding_file");
  }
}

nlohmann::json run_config_to_json(const RunConfig& cfg) {
  nlohmann::json j{
      {"model", model_config_to_json(cfg.model)},
      {"seed", cfg.seed},
      {"task", task_spec_to_json(cfg.task)},
      {"train", train_config_to_json(cfg.train)},
  };
  if (!cfg.embedding_file.empty()) j["embedding_file"] = cfg.embedding_file;
  return j;
}

RunConfig run_config_from_json(const nlohmann::json& j) {
  RunConfig cfg;
  if (j.contains("model")) cfg.model = model_config_from_json(j.at("model"));
  if (j.contains("task")) cfg.task = task_spec_from_json(j.at("task"));
  if (j.contains("train")) cfg.train = train_config_from_json(j.at("train"));
  if (j.contains("seed")) cfg.seed = j.at("seed").get<uint64_t>();
  if (j.contains("embedding_file") && !j.at("embedding_file").is_null()) {
    cfg.embedding_file = j.at("embedding_file").get<std::string>();
  }
  cfg.task.seed = derive_seed(cfg.seed, "task");
  return cfg;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw value_error("config: cannot open '" + path + "'");
  nlohmann::json j;
  try {
    is >> j;
  } catch (const nlohmann::json::exception& e) {
    throw value_error("config: '" + path + "' is not valid JSON: " + e.what());
  }
  return run_config_from_json(j);
}

// --- optimizer ---------------------------------------------------------------

ScoreAdam::ScoreAdam(const Model& model, const TrainConfig& cfg) : cfg_(cfg) {
  for (const auto& [name, s] : model.score_tensors()) {
    names_.push_back(name);
    params_.push_back(s);
    m_.emplace_back(static_cast<size_t>(s.numel()), 0.0f);
    v_.emplace_back(static_cast<size_t>(s.numel()), 0.0f);
  }
  if (params_.empty()) {
    throw value_error("optimizer: model has no trainable score tensors");
  }
}

void ScoreAdam::step(double lr_now) {
  ++t_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  for (size_t p = 0; p < params_.size(); ++p) {
    Tensor& param = params_[p];
    const auto g = param.grad();
    auto values = param.values_mut();
    auto& m = m_[p];
    auto& v = v_[p];
    for (size_t i = 0; i < values.size(); ++i) {
      const double gi = g.empty() ? 0.0 : static_cast<double>(g[i]);
      m[i] = static_cast<float>(cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * gi);
      v[i] = static_cast<float>(cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * gi * gi);
      const double m_hat = m[i] / bc1;
      const double v_hat = v[i] / bc2;
      values[i] -= static_cast<float>(lr_now * m_hat / (std::sqrt(v_hat) + cfg_.eps));
    }
    param.zero_grad();
  }
}

OptimizerStateBlobs ScoreAdam::export_state() const {
  OptimizerStateBlobs out;
  out.m = m_;
  out.v = v_;
  out.step = t_;
  return out;
}

void ScoreAdam::import_state(const OptimizerStateBlobs& state) {
  if (state.m.size() != m_.size() || state.v.size() != v_.size()) {
    throw value_error("optimizer: state tensor count mismatch");
  }
  for (size_t i = 0; i < m_.size(); ++i) {
    if (state.m[i].size() != m_[i].size() || state.v[i].size() != v_[i].size()) {
      throw value_error("optimizer: state size mismatch for '" + names_[i] + "'");
    }
  }
  m_ = state.m;
  v_ = state.v;
  t_ = state.step;
}

double inverse_sqrt_lr(double base_lr, int64_t warmup, int64_t step) {
  const double t = static_cast<double>(std::max<int64_t>(step, 1));
  const double w = static_cast<double>(warmup);
  return base_lr * std::min(t / w, std::sqrt(w / t));
}

// --- evaluation ----------------------------------------------------------------

namespace {

// Flattened targets for cross_entropy; padding keeps kPadId and is ignored.
std::vector<int64_t> flat_targets(const TokenMatrix& tgt_out) { return tgt_out.ids; }

struct TfCounts {
  double loss_sum = 0.0;  // mean loss per batch, weighted by target tokens
  int64_t token_hits = 0;
  int64_t token_total = 0;
  int64_t seq_hits = 0;
  int64_t seq_total = 0;
};

void teacher_forced_batch(const Model& model, const Batch& batch, double label_smoothing,
                          TfCounts& counts) {
  Tape tape(/*recording=*/false);
  Tensor logits = model.forward(tape, batch.src, batch.tgt_in);
  Tensor flat = reshape(tape, logits, {batch.tgt_in.rows * batch.tgt_in.cols,
                                       model.config().tgt_vocab});
  Tensor loss = cross_entropy(tape, flat, flat_targets(batch.tgt_out), kPadId,
                              static_cast<float>(label_smoothing));

  const int64_t rows = batch.tgt_out.rows, cols = batch.tgt_out.cols;
  const int64_t vocab = model.config().tgt_vocab;
  const auto lv = logits.values();
  int64_t batch_tokens = 0;
  for (int64_t r = 0; r < rows; ++r) {
    bool all_correct = true;
    for (int64_t c = 0; c < cols; ++c) {
      const int64_t want = batch.tgt_out.at(r, c);
      if (want == kPadId) continue;
      ++batch_tokens;
      const float* row = lv.data() + (r * cols + c) * vocab;
      int64_t best = 0;
      for (int64_t k = 1; k < vocab; ++k) {
        if (row[k] > row[best]) best = k;
      }
      if (best == want) {
        ++counts.token_hits;
      } else {
        all_correct = false;
      }
    }
    counts.seq_hits += all_correct ? 1 : 0;
    ++counts.seq_total;
  }
  counts.token_total += batch_tokens;
  counts.loss_sum += static_cast<double>(loss.values()[0]) * static_cast<double>(batch_tokens);
}

}  // namespace

std::vector<std::vector<int64_t>> greedy_decode(const Model& model,
                                                const std::vector<SeqPair>& pairs,
                                                int64_t begin, int64_t count) {
  count = std::min<int64_t>(count, static_cast<int64_t>(pairs.size()) - begin);
  if (count <= 0) return {};
  // Sources padded into one batch; every row decodes in lockstep and keeps
  // emitting pad after its eos.
  std::vector<int64_t> indices(static_cast<size_t>(count));
  for (int64_t i = 0; i < count; ++i) indices[static_cast<size_t>(i)] = begin + i;
  Batch shell = make_batch(pairs, indices);

  Tape tape(/*recording=*/false);
  Tensor enc_out = model.encode(tape, shell.src);

  const int64_t max_new = model.config().max_len - 1;
  std::vector<std::vector<int64_t>> emitted(static_cast<size_t>(count));
  std::vector<bool> done(static_cast<size_t>(count), false);
  std::vector<int64_t> prefix(static_cast<size_t>(count), kBosId);  // column-appended below
  int64_t prefix_len = 1;
  for (int64_t step = 0; step < max_new; ++step) {
    const TokenMatrix tgt_in(count, prefix_len, prefix);
    Tensor logits = model.decode(tape, enc_out, shell.src, tgt_in);
    const auto lv = logits.values();
    const int64_t vocab = model.config().tgt_vocab;
    bool all_done = true;
    std::vector<int64_t> next(static_cast<size_t>(count), kPadId);
    for (int64_t r = 0; r < count; ++r) {
      if (done[static_cast<size_t>(r)]) continue;
      const float* row = lv.data() + (r * prefix_len + (prefix_len - 1)) * vocab;
      int64_t best = 0;
      for (int64_t k = 1; k < vocab; ++k) {
        if (row[k] > row[best]) best = k;
      }
      if (best == kEosId) {
        done[static_cast<size_t>(r)] = true;
      } else {
        emitted[static_cast<size_t>(r)].push_back(best);
        all_done = false;
      }
      next[static_cast<size_t>(r)] = best;
    }
    if (all_done) break;
    // Grow every prefix by one column (finished rows append pad).
    std::vector<int64_t> grown(static_cast<size_t>(count * (prefix_len + 1)));
    for (int64_t r = 0; r < count; ++r) {
      std::copy(prefix.begin() + r * prefix_len, prefix.begin() + (r + 1) * prefix_len,
                grown.begin() + r * (prefix_len + 1));
      grown[static_cast<size_t>(r * (prefix_len + 1) + prefix_len)] =
          done[static_cast<size_t>(r)] ? kPadId : next[static_cast<size_t>(r)];
    }
    prefix = std::move(grown);
    ++prefix_len;
  }
  return emitted;
}

EvalMetrics evaluate(const Model& model, const std::vector<SeqPair>& pairs,
                     int64_t batch_size, int64_t bleu_samples, double label_smoothing) {
  if (pairs.empty()) throw value_error("evaluate: empty split");
  TfCounts counts;
  for (int64_t begin = 0; begin < static_cast<int64_t>(pairs.size()); begin += batch_size) {
    const int64_t count = std::min<int64_t>(batch_size,
                                            static_cast<int64_t>(pairs.size()) - begin);
    teacher_forced_batch(model, make_batch(pairs, begin, count), label_smoothing, counts);
  }
  EvalMetrics out;
  out.loss = counts.loss_sum / static_cast<double>(counts.token_total);
  out.token_acc = static_cast<double>(counts.token_hits) / static_cast<double>(counts.token_total);
  out.seq_acc = static_cast<double>(counts.seq_hits) / static_cast<double>(counts.seq_total);
  if (bleu_samples > 0) {
    const int64_t n = std::min<int64_t>(bleu_samples, static_cast<int64_t>(pairs.size()));
    const auto hyps = greedy_decode(model, pairs, 0, n);
    std::vector<std::vector<int64_t>> refs(static_cast<size_t>(n));
    for (int64_t i = 0; i < n; ++i) refs[static_cast<size_t>(i)] = pairs[static_cast<size_t>(i)].tgt;
    out.bleu_score = bleu(hyps, refs).score;
  }
  return out;
}

nlohmann::json step_metrics_to_json(const StepMetrics& m) {
  return nlohmann::json{
      {"bleu", m.val.bleu_score},   {"seq_acc", m.val.seq_acc},
      {"step", m.step},             {"token_acc", m.val.token_acc},
      {"train_loss", m.train_loss}, {"val_loss", m.val.loss},
  };
}

// --- training loop -------------------------------------------------------------

TrainResult train_model(Model& model, ScoreAdam& optimizer, const DatasetSplits& data,
                        const TrainConfig& cfg, uint64_t seed, const MetricsSink& sink,
                        int64_t start_step) {
  cfg.validate();
  if (data.train.empty() || data.valid.empty()) {
    throw value_error("train: empty train or valid split");
  }
  TrainResult result;
  double loss_accum = 0.0;
  int64_t loss_count = 0;
  const int64_t n_train = static_cast<int64_t>(data.train.size());

  for (int64_t step = start_step + 1; step <= cfg.steps; ++step) {
    // Batch indices depend only on (seed, step): resumable and repeatable.
    Rng rng(derive_seed(seed, "batch", static_cast<uint64_t>(step)));
    std::vector<int64_t> indices(static_cast<size_t>(cfg.batch_size));
    for (auto& ix : indices) ix = uniform_int(rng, 0, n_train - 1);
    const Batch batch = make_batch(data.train, indices);

    Tape tape;
    Tensor logits = model.forward(tape, batch.src, batch.tgt_in);
    Tensor flat = reshape(tape, logits, {batch.tgt_in.rows * batch.tgt_in.cols,
                                         model.config().tgt_vocab});
    Tensor loss = cross_entropy(tape, flat, batch.tgt_out.ids, kPadId,
                                static_cast<float>(cfg.label_smoothing));
    const double loss_value = static_cast<double>(loss.values()[0]);
    if (!std::isfinite(loss_value)) {
      throw std::runtime_error("train: non-finite loss " + std::to_string(loss_value) +
                               " at step " + std::to_string(step) +
                               " (lr=" + std::to_string(inverse_sqrt_lr(cfg.lr, cfg.warmup, step)) +
                               "); aborting");
    }
    loss_accum += loss_value;
    ++loss_count;
    tape.backward(loss);
    optimizer.step(inverse_sqrt_lr(cfg.lr, cfg.warmup, step));

    const bool last = step == cfg.steps;
    if (step % cfg.eval_every == 0 || last) {
      StepMetrics m;
      m.step = step;
      m.train_loss = loss_accum / static_cast<double>(loss_count);
      loss_accum = 0.0;
      loss_count = 0;
      m.val = evaluate(model, data.valid, cfg.batch_size, cfg.bleu_samples,
                       cfg.label_smoothing);
      if (sink) sink(m);
      result.last = m;
      result.steps_run = step;
      if (cfg.early_stop_seq_acc > 0.0 && m.val.seq_acc >= cfg.early_stop_seq_acc) {
        result.reached_early_stop = true;
        break;
      }
    }
  }
  if (result.steps_run == 0) result.steps_run = cfg.steps;
  return result;
}

}  // namespace olt
