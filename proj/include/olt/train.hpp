#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "olt/datapipe.hpp"
#include "olt/persist.hpp"
#include "olt/transformer.hpp"

namespace olt {

struct TrainConfig {
  double lr = 3e-3;
  double beta1 = 0.9;
  double beta2 = 0.98;
  double eps = 1e-8;
  int64_t warmup = 400;  // inverse-sqrt schedule
  int64_t steps = 5000;
  int64_t batch_size = 32;
  int64_t eval_every = 250;
  int64_t bleu_samples = 64;     // validation prefix scored by greedy decoding
  double early_stop_seq_acc = 0.0;  // <= 0 disables
  double label_smoothing = 0.0;

  void validate() const;
};

nlohmann::json train_config_to_json(const TrainConfig& cfg);
TrainConfig train_config_from_json(const nlohmann::json& j);

// Everything one CLI run needs; mirrors the JSON config file layout
// {"model": {...}, "task": {...}, "train": {...}, "seed": N,
//  "embedding_file": "..."?}.
struct RunConfig {
  ModelConfig model;
  TaskSpec task;
  TrainConfig train;
  uint64_t seed = 1;
  std::string embedding_file;  // empty unless pretrained_frozen

  void validate() const;
};

nlohmann::json run_config_to_json(const RunConfig& cfg);
RunConfig run_config_from_json(const nlohmann::json& j);
RunConfig load_run_config(const std::string& path);

// Adam restricted to score tensors; weight tensors never enter the state.
class ScoreAdam {
 public:
  ScoreAdam(const Model& model, const TrainConfig& cfg);

  // Applies one update from the accumulated score gradients, then clears them.
  void step(double lr_now);

  int64_t steps_taken() const { return t_; }
  const std::vector<std::string>& param_names() const { return names_; }
  OptimizerStateBlobs export_state() const;
  void import_state(const OptimizerStateBlobs& state);

 private:
  TrainConfig cfg_;
  std::vector<std::string> names_;
  std::vector<Tensor> params_;
  std::vector<std::vector<float>> m_, v_;
  int64_t t_ = 0;
};

double inverse_sqrt_lr(double base_lr, int64_t warmup, int64_t step);

struct EvalMetrics {
  double loss = 0.0;
  double token_acc = 0.0;
  double seq_acc = 0.0;
  double bleu_score = 0.0;
};

struct StepMetrics {
  int64_t step = 0;
  double train_loss = 0.0;
  EvalMetrics val;
};

using MetricsSink = std::function<void(const StepMetrics&)>;

nlohmann::json step_metrics_to_json(const StepMetrics& m);

// Teacher-forced loss/accuracy over a split; bleu_samples > 0 adds corpus
// BLEU of greedy decodes for the first bleu_samples pairs.
EvalMetrics evaluate(const Model& model, const std::vector<SeqPair>& pairs,
                     int64_t batch_size, int64_t bleu_samples,
                     double label_smoothing = 0.0);

// Batched greedy decoding (row r stops at its first eos).
std::vector<std::vector<int64_t>> greedy_decode(const Model& model,
                                                const std::vector<SeqPair>& pairs,
                                                int64_t begin, int64_t count);

struct TrainResult {
  int64_t steps_run = 0;
  StepMetrics last;
  bool reached_early_stop = false;
};

// Deterministic training loop: batch b of step t is a function of (seed, t)
// only, so interrupted runs resume bit-exactly. Throws on non-finite loss.
TrainResult train_model(Model& model, ScoreAdam& optimizer, const DatasetSplits& data,
                        const TrainConfig& cfg, uint64_t seed, const MetricsSink& sink,
                        int64_t start_step = 0);

}  // namespace olt
