// olt - train and inspect supermask subnetworks of randomly weighted
// weight-tied transformers on synthetic sequence tasks.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <set>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "olt/bleu.hpp"
#include "olt/datapipe.hpp"
#include "olt/persist.hpp"
#include "olt/rng.hpp"
#include "olt/train.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitRuntime = 1;
constexpr int kExitValidation = 2;
constexpr int kExitIntegrity = 3;

struct CommonArgs {
  std::string config_path;
  std::optional<uint64_t> seed;
  std::optional<double> sigma;
  std::optional<std::string> tie_mode;
  std::optional<std::string> init_family;
  std::optional<std::string> sigma_scaling;  // "on" / "off"
  std::optional<std::string> embedding;      // "random" or "file:<path>"
  std::string metrics_out;
};

void add_common(CLI::App* cmd, CommonArgs& args, bool config_required) {
  auto* opt = cmd->add_option("--config", args.config_path, "JSON run config");
  if (config_required) opt->required();
  cmd->add_option("--seed", args.seed, "master seed override");
  cmd->add_option("--sigma", args.sigma, "retention ratio override, in (0, 1]");
  cmd->add_option("--tie-mode", args.tie_mode, "per_layer | one_layer");
  cmd->add_option("--init", args.init_family, "kaiming | xavier");
  cmd->add_option("--sigma-scaling", args.sigma_scaling, "on | off");
  cmd->add_option("--embedding", args.embedding, "random | file:<path>");
  cmd->add_option("--metrics-out", args.metrics_out, "JSON-lines metrics path");
}

olt::RunConfig resolve_config(const CommonArgs& args) {
  olt::RunConfig cfg = olt::load_run_config(args.config_path);
  if (args.seed) {
    cfg.seed = *args.seed;
    cfg.task.seed = olt::derive_seed(cfg.seed, "task");
  }
  if (args.sigma) {
    cfg.model.sigma = *args.sigma;
  }
  if (args.tie_mode) cfg.model.tie_mode = olt::tie_mode_from_string(*args.tie_mode);
  if (args.init_family) cfg.model.init.family = olt::init_family_from_string(*args.init_family);
  if (args.sigma_scaling) {
    if (*args.sigma_scaling == "on") {
      cfg.model.init.sigma_scaling = true;
    } else if (*args.sigma_scaling == "off") {
      cfg.model.init.sigma_scaling = false;
    } else {
      throw olt::value_error("--sigma-scaling must be 'on' or 'off'");
    }
  }
  if (args.embedding) {
    if (*args.embedding == "random") {
      cfg.model.embedding_mode = olt::EmbeddingMode::random_pruned;
      cfg.embedding_file.clear();
    } else if (args.embedding->rfind("file:", 0) == 0) {
      cfg.model.embedding_mode = olt::EmbeddingMode::pretrained_frozen;
      cfg.embedding_file = args.embedding->substr(5);
    } else {
      throw olt::value_error("--embedding must be 'random' or 'file:<path>'");
    }
  }
  cfg.validate();
  return cfg;
}

olt::Model build_model(const olt::RunConfig& cfg) {
  if (cfg.model.embedding_mode == olt::EmbeddingMode::pretrained_frozen) {
    return olt::Model::build(cfg.model, cfg.seed, olt::load_embeddings(cfg.embedding_file));
  }
  return olt::Model::build(cfg.model, cfg.seed);
}

class MetricsWriter {
 public:
  MetricsWriter(const std::string& path, const nlohmann::json& tag) : tag_(tag) {
    if (!path.empty()) {
      file_.open(path, std::ios::app);
      if (!file_) throw olt::value_error("cannot open metrics file '" + path + "'");
    }
  }

  void operator()(const olt::StepMetrics& m) {
    nlohmann::json line = olt::step_metrics_to_json(m);
    for (const auto& [k, v] : tag_.items()) line[k] = v;
    const std::string text = line.dump();
    std::cout << text << "\n";
    if (file_.is_open()) file_ << text << "\n";
  }

 private:
  nlohmann::json tag_;
  std::ofstream file_;
};

nlohmann::json run_training(const olt::RunConfig& cfg, const std::string& metrics_out,
                            const nlohmann::json& tag, const std::string& checkpoint_out) {
  olt::Model model = build_model(cfg);
  const auto crc_before = model.weight_checksums();
  olt::DatasetSplits data = olt::generate_task(cfg.task);
  olt::ScoreAdam optimizer(model, cfg.train);
  MetricsWriter sink(metrics_out, tag);
  const olt::TrainResult result =
      olt::train_model(model, optimizer, data, cfg.train, cfg.seed, std::ref(sink));

  // The frozen-weight contract, checked on every training run.
  const auto crc_after = model.weight_checksums();
  if (crc_before != crc_after) {
    throw olt::integrity_error("frozen weights changed during training");
  }
  if (!checkpoint_out.empty()) {
    olt::save_checkpoint(checkpoint_out, model);
  }
  const olt::EvalMetrics test =
      olt::evaluate(model, data.test, cfg.train.batch_size, cfg.train.bleu_samples,
                    cfg.train.label_smoothing);
  return nlohmann::json{
      {"steps_run", result.steps_run},
      {"early_stop", result.reached_early_stop},
      {"final", olt::step_metrics_to_json(result.last)},
      {"test", {{"bleu", test.bleu_score},
                {"loss", test.loss},
                {"seq_acc", test.seq_acc},
                {"token_acc", test.token_acc}}},
      {"weights_frozen", true},
  };
}

int cmd_train(const CommonArgs& args, const std::string& out_path) {
  const olt::RunConfig cfg = resolve_config(args);
  // Metric lines carry the same seed/sigma tags the sweep writes, so a
  // degenerate single-sigma sweep emits an identical stream.
  const nlohmann::json tag{{"seed", cfg.seed}, {"sigma", cfg.model.sigma}};
  const nlohmann::json summary = run_training(cfg, args.metrics_out, tag, out_path);
  std::cout << summary.dump() << "\n";
  return kExitOk;
}

int cmd_eval(const CommonArgs& args, const std::string& checkpoint, const std::string& split) {
  const olt::RunConfig cfg = resolve_config(args);
  olt::LoadedCheckpoint loaded = olt::load_checkpoint(checkpoint);
  olt::DatasetSplits data = olt::generate_task(cfg.task);
  const std::vector<olt::SeqPair>* pairs = nullptr;
  if (split == "valid") {
    pairs = &data.valid;
  } else if (split == "test") {
    pairs = &data.test;
  } else if (split == "train") {
    pairs = &data.train;
  } else {
    throw olt::value_error("--split must be train, valid, or test");
  }
  const olt::EvalMetrics m = olt::evaluate(loaded.model, *pairs, cfg.train.batch_size,
                                           cfg.train.bleu_samples, cfg.train.label_smoothing);
  std::cout << nlohmann::json{{"bleu", m.bleu_score},
                              {"loss", m.loss},
                              {"seq_acc", m.seq_acc},
                              {"split", split},
                              {"token_acc", m.token_acc}}
                   .dump()
            << "\n";
  return kExitOk;
}

int cmd_sweep(const CommonArgs& args, std::vector<double> sigmas,
              std::vector<uint64_t> seeds) {
  if (sigmas.empty()) throw olt::value_error("sweep: at least one --sigmas value required");
  std::set<double> unique(sigmas.begin(), sigmas.end());
  if (unique.size() != sigmas.size()) {
    throw olt::value_error("sweep: duplicate sigma values rejected");
  }
  const olt::RunConfig base = resolve_config(args);
  if (seeds.empty()) seeds.push_back(base.seed);

  nlohmann::json table = nlohmann::json::array();
  for (double sigma : sigmas) {
    for (uint64_t seed : seeds) {
      olt::RunConfig cfg = base;
      cfg.model.sigma = sigma;
      cfg.seed = seed;
      cfg.task.seed = olt::derive_seed(seed, "task");
      cfg.validate();
      const nlohmann::json tag{{"seed", seed}, {"sigma", sigma}};
      nlohmann::json summary = run_training(cfg, args.metrics_out, tag, "");
      summary["seed"] = seed;
      summary["sigma"] = sigma;
      table.push_back(std::move(summary));
    }
  }
  std::cout << nlohmann::json{{"runs", table}}.dump() << "\n";
  return kExitOk;
}

int cmd_inspect(const std::string& checkpoint, bool as_json) {
  const olt::CheckpointScan scan = olt::scan_checkpoint(checkpoint);
  nlohmann::json report{
      {"file_bytes", scan.file_bytes},
      {"flavor", scan.meta.flavor},
      {"format_version", scan.meta.format_version},
      {"model", olt::model_config_to_json(scan.meta.model)},
      {"seed", scan.meta.seed},
      {"crc_ok", scan.all_crc_ok},
  };

  nlohmann::json sections = nlohmann::json::array();
  const olt::ModelLayout layout = olt::model_layout(scan.meta.model);
  size_t weight_i = 0, mask_i = 0;
  for (const auto& s : scan.sections) {
    nlohmann::json row{{"bytes", s.length}, {"crc_ok", s.crc_ok}};
    switch (s.tag) {
      case olt::kSectionWeight:
      case olt::kSectionEmbedding: {
        row["kind"] = s.tag == olt::kSectionWeight ? "weight" : "embedding";
        if (weight_i < layout.weights.size()) {
          row["name"] = layout.weights[weight_i].name;
          row["shape"] = layout.weights[weight_i].shape;
          ++weight_i;
        }
        break;
      }
      case olt::kSectionMask: {
        row["kind"] = "mask";
        if (mask_i < layout.masks.size()) {
          const auto& want = layout.masks[mask_i];
          row["name"] = want.name;
          row["shape"] = want.shape;
          ++mask_i;
        }
        break;
      }
      case olt::kSectionScores:
        row["kind"] = "scores";
        break;
      default:
        row["kind"] = "unknown";
    }
    sections.push_back(std::move(row));
  }
  report["sections"] = sections;

  if (scan.all_crc_ok) {
    // Densities need the payloads; a full load also re-checks section counts.
    olt::LoadedCheckpoint loaded = olt::load_checkpoint(checkpoint);
    nlohmann::json masks = nlohmann::json::array();
    for (const auto& [name, sm] : loaded.model.supermasks()) {
      int64_t ones = 0;
      for (float v : olt::current_mask(*sm).values()) ones += v == 1.0f ? 1 : 0;
      masks.push_back(nlohmann::json{
          {"density", static_cast<double>(ones) / static_cast<double>(sm->weight.numel())},
          {"k_count", sm->k_count},
          {"name", name},
          {"numel", sm->weight.numel()},
      });
    }
    report["masks"] = masks;
  }

  if (as_json) {
    std::cout << report.dump() << "\n";
  } else {
    std::cout << "checkpoint: " << checkpoint << "\n"
              << "  flavor:   " << scan.meta.flavor << "\n"
              << "  bytes:    " << scan.file_bytes << "\n"
              << "  sections: " << scan.sections.size() << "\n"
              << "  crc:      " << (scan.all_crc_ok ? "ok" : "FAILED") << "\n";
    for (const auto& row : report["sections"]) {
      std::cout << "    " << row.value("kind", "?") << " " << row.value("name", "")
                << " bytes=" << row["bytes"] << (row["crc_ok"].get<bool>() ? "" : "  CRC FAIL")
                << "\n";
    }
    if (report.contains("masks")) {
      for (const auto& row : report["masks"]) {
        std::cout << "    mask " << row["name"] << " density=" << row["density"] << "\n";
      }
    }
  }
  if (!scan.all_crc_ok) {
    std::cerr << "inspect: checksum failure\n";
    return kExitIntegrity;
  }
  return kExitOk;
}

void print_footprint(const olt::ModelConfig& cfg, const std::string& label) {
  const olt::FootprintReport report = olt::footprint(cfg);
  nlohmann::json per_tensor = nlohmann::json::array();
  for (const auto& e : report.per_tensor) {
    per_tensor.push_back(nlohmann::json{{"float_bytes", e.float_bytes},
                                        {"floats", e.floats},
                                        {"mask_bytes", e.mask_bytes},
                                        {"masks", e.mask_count},
                                        {"name", e.name}});
  }
  std::cout << nlohmann::json{{"float_bytes", report.float_bytes},
                              {"label", label},
                              {"mask_bytes", report.mask_bytes},
                              {"mb", static_cast<double>(report.total_bytes) / 1e6},
                              {"note", report.note},
                              {"per_tensor", per_tensor},
                              {"tie_mode", olt::to_string(cfg.tie_mode)},
                              {"total_bytes", report.total_bytes}}
                   .dump()
            << "\n";
}

int cmd_footprint(const CommonArgs& args, const std::string& compare) {
  const olt::RunConfig cfg = resolve_config(args);
  print_footprint(cfg.model, "configured");
  if (!compare.empty()) {
    olt::ModelConfig other = cfg.model;
    other.tie_mode = olt::tie_mode_from_string(compare);
    print_footprint(other, "compare");
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"supermask training for one-layer randomly weighted transformers"};
  app.require_subcommand(1);

  CommonArgs train_args, eval_args, sweep_args, footprint_args;
  std::string train_out = "model.oltc";
  std::string eval_checkpoint, eval_split = "test";
  std::vector<double> sweep_sigmas;
  std::vector<uint64_t> sweep_seeds;
  std::string inspect_checkpoint;
  bool inspect_json = false;
  std::string footprint_compare;

  auto* train_cmd = app.add_subcommand("train", "train scores on a synthetic task");
  add_common(train_cmd, train_args, true);
  train_cmd->add_option("--out", train_out, "checkpoint output path");

  auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint");
  add_common(eval_cmd, eval_args, true);
  eval_cmd->add_option("--checkpoint", eval_checkpoint, "checkpoint path")->required();
  eval_cmd->add_option("--split", eval_split, "train | valid | test");

  auto* sweep_cmd = app.add_subcommand("sweep", "independent runs over retention ratios");
  add_common(sweep_cmd, sweep_args, true);
  sweep_cmd->add_option("--sigmas", sweep_sigmas, "retention ratios")->required();
  sweep_cmd->add_option("--seeds", sweep_seeds, "seeds (default: config seed)");

  auto* inspect_cmd = app.add_subcommand("inspect", "report checkpoint contents");
  inspect_cmd->add_option("--checkpoint", inspect_checkpoint, "checkpoint path")->required();
  inspect_cmd->add_flag("--json", inspect_json, "machine-readable report");

  auto* footprint_cmd = app.add_subcommand("footprint", "closed-form memory report");
  add_common(footprint_cmd, footprint_args, true);
  footprint_cmd->add_option("--compare", footprint_compare, "also print this tie mode");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitValidation;
  }

  try {
    if (train_cmd->parsed()) return cmd_train(train_args, train_out);
    if (eval_cmd->parsed()) return cmd_eval(eval_args, eval_checkpoint, eval_split);
    if (sweep_cmd->parsed()) return cmd_sweep(sweep_args, sweep_sigmas, sweep_seeds);
    if (inspect_cmd->parsed()) return cmd_inspect(inspect_checkpoint, inspect_json);
    if (footprint_cmd->parsed()) return cmd_footprint(footprint_args, footprint_compare);
  } catch (const olt::integrity_error& e) {
    std::cerr << "integrity error: " << e.what() << "\n";
    return kExitIntegrity;
  } catch (const olt::value_error& e) {
    std::cerr << "validation error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitOk;
}
