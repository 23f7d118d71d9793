#pragma once

#include <cstdint>
#include <string>

#include <nlohmann/json_fwd.hpp>

#include "olt/supermask.hpp"

namespace olt {

enum class TieMode { per_layer, one_layer };
enum class EmbeddingMode { random_pruned, pretrained_frozen };
enum class Activation { relu, gelu };

struct ModelConfig {
  int64_t d_model = 64;
  int64_t n_heads = 4;
  int64_t d_ffn = 128;
  int64_t enc_layers = 2;  // application count L, not allocation count
  int64_t dec_layers = 2;
  TieMode tie_mode = TieMode::one_layer;
  EmbeddingMode embedding_mode = EmbeddingMode::random_pruned;
  double sigma = 0.5;
  InitScheme init{};
  int64_t src_vocab = 64;
  int64_t tgt_vocab = 64;
  int64_t max_len = 32;
  Activation activation = Activation::relu;

  void validate() const;  // throws value_error with the offending field
};

std::string to_string(TieMode m);
std::string to_string(EmbeddingMode m);
std::string to_string(Activation a);
std::string to_string(InitScheme::Family f);
TieMode tie_mode_from_string(const std::string& s);
EmbeddingMode embedding_mode_from_string(const std::string& s);
Activation activation_from_string(const std::string& s);
InitScheme::Family init_family_from_string(const std::string& s);

nlohmann::json model_config_to_json(const ModelConfig& cfg);
ModelConfig model_config_from_json(const nlohmann::json& j);

}  // namespace olt
