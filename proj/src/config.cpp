#include "olt/config.hpp"

#include <nlohmann/json.hpp>

#include "olt/errors.hpp"
#include "olt/tokens.hpp"

namespace olt {

void ModelConfig::validate() const {
  if (d_model < 1) throw value_error("config: d_model must be >= 1");
  if (n_heads < 1) throw value_error("config: n_heads must be >= 1");
  if (d_model % n_heads != 0) {
    throw value_error("config: d_model " + std::to_string(d_model) +
                      " not divisible by n_heads " + std::to_string(n_heads));
  }
  if (d_ffn < 1) throw value_error("config: d_ffn must be >= 1");
  if (enc_layers < 1 || dec_layers < 1) {
    throw value_error("config: layer counts must be >= 1");
  }
  if (!(sigma > 0.0) || sigma > 1.0) {
    throw value_error("config: sigma must be in (0, 1], got " + std::to_string(sigma));
  }
  if (src_vocab <= kReservedTokens || tgt_vocab <= kReservedTokens) {
    throw value_error("config: vocab sizes must exceed the reserved token count");
  }
  if (max_len < 2) throw value_error("config: max_len must be >= 2");
}

std::string to_string(TieMode m) {
  return m == TieMode::per_layer ? "per_layer" : "one_layer";
}
std::string to_string(EmbeddingMode m) {
  return m == EmbeddingMode::random_pruned ? "random_pruned" : "pretrained_frozen";
}
std::string to_string(Activation a) { return a == Activation::relu ? "relu" : "gelu"; }
std::string to_string(InitScheme::Family f) {
  return f == InitScheme::Family::kaiming_uniform ? "kaiming" : "xavier";
}

TieMode tie_mode_from_string(const std::string& s) {
  if (s == "per_layer") return TieMode::per_layer;
  if (s == "one_layer") return TieMode::one_layer;
  throw value_error("config: unknown tie_mode '" + s + "'");
}
EmbeddingMode embedding_mode_from_string(const std::string& s) {
  if (s == "random_pruned") return EmbeddingMode::random_pruned;
  if (s == "pretrained_frozen") return EmbeddingMode::pretrained_frozen;
  throw value_error("config: unknown embedding_mode '" + s + "'");
}
Activation activation_from_string(const std::string& s) {
  if (s == "relu") return Activation::relu;
  if (s == "gelu") return Activation::gelu;
  throw value_error("config: unknown activation '" + s + "'");
}
InitScheme::Family init_family_from_string(const std::string& s) {
  if (s == "kaiming") return InitScheme::Family::kaiming_uniform;
  if (s == "xavier") return InitScheme::Family::xavier_uniform;
  throw value_error("config: unknown init family '" + s + "'");
}

nlohmann::json model_config_to_json(const ModelConfig& cfg) {
  return nlohmann::json{
      {"activation", to_string(cfg.activation)},
      {"d_ffn", cfg.d_ffn},
      {"d_model", cfg.d_model},
      {"dec_layers", cfg.dec_layers},
      {"embedding_mode", to_string(cfg.embedding_mode)},
      {"enc_layers", cfg.enc_layers},
      {"init_family", to_string(cfg.init.family)},
      {"max_len", cfg.max_len},
      {"n_heads", cfg.n_heads},
      {"sigma", cfg.sigma},
      {"sigma_scaling", cfg.init.sigma_scaling},
      {"src_vocab", cfg.src_vocab},
      {"tgt_vocab", cfg.tgt_vocab},
      {"tie_mode", to_string(cfg.tie_mode)},
  };
}

namespace {
template <typename T>
T get_field(const nlohmann::json& j, const char* key, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw value_error(std::string("config: bad value for '") + key + "': " + e.what());
  }
}
}  // namespace

ModelConfig model_config_from_json(const nlohmann::json& j) {
  ModelConfig cfg;
  cfg.d_model = get_field<int64_t>(j, "d_model", cfg.d_model);
  cfg.n_heads = get_field<int64_t>(j, "n_heads", cfg.n_heads);
  cfg.d_ffn = get_field<int64_t>(j, "d_ffn", cfg.d_ffn);
  cfg.enc_layers = get_field<int64_t>(j, "enc_layers", cfg.enc_layers);
  cfg.dec_layers = get_field<int64_t>(j, "dec_layers", cfg.dec_layers);
  cfg.sigma = get_field<double>(j, "sigma", cfg.sigma);
  cfg.src_vocab = get_field<int64_t>(j, "src_vocab", cfg.src_vocab);
  cfg.tgt_vocab = get_field<int64_t>(j, "tgt_vocab", cfg.tgt_vocab);
  cfg.max_len = get_field<int64_t>(j, "max_len", cfg.max_len);
  cfg.init.sigma_scaling = get_field<bool>(j, "sigma_scaling", cfg.init.sigma_scaling);
  cfg.tie_mode = tie_mode_from_string(get_field<std::string>(j, "tie_mode", to_string(cfg.tie_mode)));
  cfg.embedding_mode = embedding_mode_from_string(
      get_field<std::string>(j, "embedding_mode", to_string(cfg.embedding_mode)));
  cfg.activation =
      activation_from_string(get_field<std::string>(j, "activation", to_string(cfg.activation)));
  cfg.init.family =
      init_family_from_string(get_field<std::string>(j, "init_family", to_string(cfg.init.family)));
  return cfg;
}

}  // namespace olt
