#pragma once

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "olt/autograd.hpp"
#include "olt/config.hpp"
#include "olt/supermask.hpp"
#include "olt/tokens.hpp"

namespace olt {

// Frozen embedding tables loaded from a file. out_proj is kept as
// [d_model, tgt_vocab], ready for the final matmul.
struct PretrainedEmbeddings {
  Tensor encoder;   // [src_vocab, d_model]
  Tensor decoder;   // [tgt_vocab, d_model]
  Tensor out_proj;  // [d_model, tgt_vocab]
};

// One application of an encoder / decoder layer. In one_layer mode every
// application aliases the same weight storage; the score matrices are always
// per-application, so each application carries its own mask.
struct EncApply {
  SupermaskTensor wq, wk, wv, wo, w1, w2;
};
struct DecApply {
  SupermaskTensor wq, wk, wv, wo;      // self-attention
  SupermaskTensor cq, ck, cv, co;      // cross-attention
  SupermaskTensor w1, w2;              // feed-forward
};

struct ParamCounts {
  int64_t trainable_scores = 0;        // every score matrix, per application
  int64_t frozen_weights = 0;          // weights as applied, repetition counted
  int64_t stored_weights_no_mask = 0;  // each shared storage counted once
  int64_t layer_stored = 0;            // storage in encoder/decoder layers only
  int64_t embedding_stored = 0;        // embedding + output projection storage
};

ParamCounts param_counts(const ModelConfig& cfg);

// Canonical tensor enumeration derived from the config alone. Checkpoints
// rely on this order; Model::weight_storages() and Model::supermasks()
// produce matching names and shapes.
struct TensorLayout {
  std::string name;
  Shape shape;
};

struct ModelLayout {
  std::vector<TensorLayout> weights;  // distinct storages
  std::vector<TensorLayout> masks;    // one per application of a masked tensor
};

ModelLayout model_layout(const ModelConfig& cfg);

// Post-norm encoder-decoder with sinusoidal positions. Every linear weight
// is a SupermaskTensor; layer-norm gain/bias are frozen at 1/0 and biases do
// not exist. Attention keys at padding positions are masked additively;
// decoder self-attention is causal.
class Model {
 public:
  Model() = default;  // empty shell; assign from build() before use

  static Model build(const ModelConfig& cfg, uint64_t seed);
  static Model build(const ModelConfig& cfg, uint64_t seed,
                     const PretrainedEmbeddings& pretrained);

  const ModelConfig& config() const { return cfg_; }
  uint64_t seed() const { return seed_; }

  // logits [batch, tgt_len, tgt_vocab]. With use_mask = false the raw frozen
  // weights are used instead of W ⊙ M (reference path for sigma = 1 checks).
  Tensor forward(Tape& tape, const TokenMatrix& src, const TokenMatrix& tgt_in,
                 bool use_mask = true) const;

  Tensor encode(Tape& tape, const TokenMatrix& src, bool use_mask = true) const;
  Tensor decode(Tape& tape, const Tensor& enc_out, const TokenMatrix& src,
                const TokenMatrix& tgt_in, bool use_mask = true) const;

  // Greedy argmax decoding of one source sequence (payload tokens only, no
  // eos). Returns emitted ids including the terminating eos; an empty source
  // emits {eos} by contract. Deterministic; ties resolve to the lowest id.
  std::vector<int64_t> generate(const std::vector<int64_t>& src_payload,
                                int64_t max_new = -1) const;

  // --- introspection, canonical order everywhere -------------------------

  // Distinct weight storages (shared tensors appear once).
  std::vector<std::pair<std::string, Tensor>> weight_storages() const;
  // Every masked tensor, one entry per application.
  std::vector<std::pair<std::string, const SupermaskTensor*>> supermasks() const;
  std::vector<std::pair<std::string, const SupermaskTensor*>> supermasks_mutable();
  // Trainable score tensors (subset of supermasks).
  std::vector<std::pair<std::string, Tensor>> score_tensors() const;
  std::map<std::string, uint32_t> weight_checksums() const;
  void zero_score_grads();

  struct ConsistencyReport {
    bool ok = true;
    int64_t enc_weight_storages = 0;
    int64_t dec_weight_storages = 0;
    int64_t enc_score_tensors = 0;
    int64_t dec_score_tensors = 0;
    std::string detail;
  };
  // Asserts the weight-tying contract: all L applications alias one weight
  // storage per slot (same allocation, same checksum) while score matrices
  // stay distinct. Pre: tie_mode == one_layer. Throws integrity_error on
  // violation unless throw_on_violation is false.
  ConsistencyReport one_layer_forward_consistency(bool throw_on_violation = true) const;

  const std::vector<EncApply>& encoder_applications() const { return enc_; }
  const std::vector<DecApply>& decoder_applications() const { return dec_; }
  const SupermaskTensor& encoder_embedding() const { return enc_emb_; }
  const SupermaskTensor& decoder_embedding() const { return dec_emb_; }
  const SupermaskTensor& output_projection() const { return out_proj_; }

 private:
  static Model build_impl(const ModelConfig& cfg, uint64_t seed,
                          const PretrainedEmbeddings* pretrained);

  Tensor effective(Tape& tape, const SupermaskTensor& t, bool use_mask) const;
  Tensor attention(Tape& tape, const Tensor& q_in, const Tensor& kv_in,
                   const Tensor& mask, const SupermaskTensor& wq,
                   const SupermaskTensor& wk, const SupermaskTensor& wv,
                   const SupermaskTensor& wo, bool use_mask) const;
  Tensor ffn(Tape& tape, const Tensor& x, const SupermaskTensor& w1,
             const SupermaskTensor& w2, bool use_mask) const;
  Tensor embed(Tape& tape, const SupermaskTensor& table, const TokenMatrix& toks,
               bool use_mask) const;
  Tensor positions(int64_t len) const;

  ModelConfig cfg_;
  uint64_t seed_ = 0;
  std::vector<EncApply> enc_;
  std::vector<DecApply> dec_;
  SupermaskTensor enc_emb_, dec_emb_, out_proj_;
  Tensor ln_gain_, ln_bias_;
  Tensor pos_table_;  // [max_len, d_model]

  friend Model model_from_checkpoint_parts(
      const ModelConfig&, uint64_t, const std::vector<Tensor>&,
      const std::vector<Tensor>&, const std::vector<Tensor>&);
};

// Rebuilds a model from checkpoint contents: weights in weight_storages()
// order, then per-application masks or scores in supermasks() order. Masks
// may be empty (resume checkpoints restore scores instead).
Model model_from_checkpoint_parts(const ModelConfig& cfg, uint64_t seed,
                                  const std::vector<Tensor>& weights,
                                  const std::vector<Tensor>& masks,
                                  const std::vector<Tensor>& scores);

}  // namespace olt
