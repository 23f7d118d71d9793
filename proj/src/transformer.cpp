#include "olt/transformer.hpp"

#include <cmath>
#include <cstring>
#include <set>

#include "olt/rng.hpp"

namespace olt {

namespace {

constexpr float kMaskedScore = -1e9f;

const char* kEncSlots[] = {"wq", "wk", "wv", "wo", "w1", "w2"};
const char* kDecSlots[] = {"wq", "wk", "wv", "wo", "cq", "ck", "cv", "co", "w1", "w2"};

Shape slot_shape(const std::string& slot, const ModelConfig& cfg) {
  if (slot == "w1") return {cfg.d_model, cfg.d_ffn};
  if (slot == "w2") return {cfg.d_ffn, cfg.d_model};
  return {cfg.d_model, cfg.d_model};
}

SupermaskTensor* enc_slot(EncApply& a, const std::string& slot) {
  if (slot == "wq") return &a.wq;
  if (slot == "wk") return &a.wk;
  if (slot == "wv") return &a.wv;
  if (slot == "wo") return &a.wo;
  if (slot == "w1") return &a.w1;
  return &a.w2;
}

SupermaskTensor* dec_slot(DecApply& a, const std::string& slot) {
  if (slot == "wq") return &a.wq;
  if (slot == "wk") return &a.wk;
  if (slot == "wv") return &a.wv;
  if (slot == "wo") return &a.wo;
  if (slot == "cq") return &a.cq;
  if (slot == "ck") return &a.ck;
  if (slot == "cv") return &a.cv;
  if (slot == "co") return &a.co;
  if (slot == "w1") return &a.w1;
  return &a.w2;
}

Tensor sinusoid_table(int64_t max_len, int64_t d) {
  std::vector<float> data(static_cast<size_t>(max_len * d));
  const double log_base = std::log(10000.0);
  for (int64_t p = 0; p < max_len; ++p) {
    for (int64_t c = 0; c < d; ++c) {
      const double freq = std::exp(-static_cast<double>(c - (c % 2)) / d * log_base);
      const double angle = static_cast<double>(p) * freq;
      data[static_cast<size_t>(p * d + c)] =
          static_cast<float>((c % 2 == 0) ? std::sin(angle) : std::cos(angle));
    }
  }
  return Tensor::from_data({max_len, d}, std::move(data));
}

// Additive attention mask [B, H, Tq, Tk]: masked key positions get -1e9.
Tensor attention_mask(const TokenMatrix& queries, const TokenMatrix& keys,
                      int64_t heads, bool causal) {
  if (queries.rows != keys.rows) {
    throw shape_error("attention: query batch " + std::to_string(queries.rows) +
                      " != key batch " + std::to_string(keys.rows));
  }
  const int64_t b_n = queries.rows, tq = queries.cols, tk = keys.cols;
  std::vector<float> data(static_cast<size_t>(b_n * heads * tq * tk), 0.0f);
  for (int64_t b = 0; b < b_n; ++b) {
    // One [tq, tk] plane, replicated across heads.
    std::vector<float> plane(static_cast<size_t>(tq * tk), 0.0f);
    for (int64_t j = 0; j < tk; ++j) {
      const bool pad = keys.at(b, j) == kPadId;
      for (int64_t i = 0; i < tq; ++i) {
        if (pad || (causal && j > i)) plane[static_cast<size_t>(i * tk + j)] = kMaskedScore;
      }
    }
    for (int64_t h = 0; h < heads; ++h) {
      std::memcpy(data.data() + ((b * heads + h) * tq * tk), plane.data(),
                  plane.size() * sizeof(float));
    }
  }
  return Tensor::from_data({b_n, heads, tq, tk}, std::move(data));
}

}  // namespace

// --- parameter arithmetic ------------------------------------------------

ParamCounts param_counts(const ModelConfig& cfg) {
  cfg.validate();
  const int64_t d = cfg.d_model, f = cfg.d_ffn;
  const int64_t enc_set = 4 * d * d + 2 * d * f;
  const int64_t dec_set = 8 * d * d + 2 * d * f;
  const bool tied = cfg.tie_mode == TieMode::one_layer;
  ParamCounts out;
  out.layer_stored = (tied ? 1 : cfg.enc_layers) * enc_set + (tied ? 1 : cfg.dec_layers) * dec_set;
  out.embedding_stored = cfg.src_vocab * d + cfg.tgt_vocab * d + d * cfg.tgt_vocab;
  out.stored_weights_no_mask = out.layer_stored + out.embedding_stored;
  out.frozen_weights = cfg.enc_layers * enc_set + cfg.dec_layers * dec_set + out.embedding_stored;
  out.trainable_scores = cfg.enc_layers * enc_set + cfg.dec_layers * dec_set;
  if (cfg.embedding_mode == EmbeddingMode::random_pruned) {
    out.trainable_scores += out.embedding_stored;
  }
  return out;
}

ModelLayout model_layout(const ModelConfig& cfg) {
  cfg.validate();
  const bool tied = cfg.tie_mode == TieMode::one_layer;
  ModelLayout layout;
  const int64_t enc_sets = tied ? 1 : cfg.enc_layers;
  const int64_t dec_sets = tied ? 1 : cfg.dec_layers;
  for (int64_t l = 0; l < enc_sets; ++l) {
    const std::string prefix = tied ? "enc.shared." : "enc.l" + std::to_string(l) + ".";
    for (const char* slot : kEncSlots) {
      layout.weights.push_back({prefix + slot, slot_shape(slot, cfg)});
    }
  }
  for (int64_t l = 0; l < dec_sets; ++l) {
    const std::string prefix = tied ? "dec.shared." : "dec.l" + std::to_string(l) + ".";
    for (const char* slot : kDecSlots) {
      layout.weights.push_back({prefix + slot, slot_shape(slot, cfg)});
    }
  }
  layout.weights.push_back({"emb.enc", {cfg.src_vocab, cfg.d_model}});
  layout.weights.push_back({"emb.dec", {cfg.tgt_vocab, cfg.d_model}});
  layout.weights.push_back({"emb.proj", {cfg.d_model, cfg.tgt_vocab}});

  for (int64_t l = 0; l < cfg.enc_layers; ++l) {
    for (const char* slot : kEncSlots) {
      layout.masks.push_back({"enc.a" + std::to_string(l) + "." + slot, slot_shape(slot, cfg)});
    }
  }
  for (int64_t l = 0; l < cfg.dec_layers; ++l) {
    for (const char* slot : kDecSlots) {
      layout.masks.push_back({"dec.a" + std::to_string(l) + "." + slot, slot_shape(slot, cfg)});
    }
  }
  if (cfg.embedding_mode == EmbeddingMode::random_pruned) {
    layout.masks.push_back({"emb.enc", {cfg.src_vocab, cfg.d_model}});
    layout.masks.push_back({"emb.dec", {cfg.tgt_vocab, cfg.d_model}});
    layout.masks.push_back({"emb.proj", {cfg.d_model, cfg.tgt_vocab}});
  }
  return layout;
}

// --- construction ---------------------------------------------------------

Model Model::build(const ModelConfig& cfg, uint64_t seed) {
  if (cfg.embedding_mode == EmbeddingMode::pretrained_frozen) {
    throw value_error("model: pretrained_frozen embedding mode needs embedding tables");
  }
  return build_impl(cfg, seed, nullptr);
}

Model Model::build(const ModelConfig& cfg, uint64_t seed,
                   const PretrainedEmbeddings& pretrained) {
  return build_impl(cfg, seed, &pretrained);
}

Model Model::build_impl(const ModelConfig& cfg, uint64_t seed,
                        const PretrainedEmbeddings* pretrained) {
  cfg.validate();
  Model m;
  m.cfg_ = cfg;
  m.seed_ = seed;
  const bool tied = cfg.tie_mode == TieMode::one_layer;

  auto fresh = [&](const std::string& weight_label, const std::string& score_label,
                   const Shape& shape) {
    SupermaskTensor t;
    t.weight = init_weight(shape, cfg.init, cfg.sigma, derive_seed(seed, "weight." + weight_label));
    t.scores = init_scores(shape, derive_seed(seed, "score." + score_label));
    t.sigma = cfg.sigma;
    t.k_count = k_count_for(t.weight.numel(), cfg.sigma);
    return t;
  };
  auto shared_alias = [&](const SupermaskTensor& base, const std::string& score_label) {
    SupermaskTensor t;
    t.weight = base.weight;  // same storage
    t.scores = init_scores(base.weight.shape(), derive_seed(seed, "score." + score_label));
    t.sigma = base.sigma;
    t.k_count = base.k_count;
    return t;
  };

  for (int64_t l = 0; l < cfg.enc_layers; ++l) {
    EncApply a;
    for (const char* slot : kEncSlots) {
      const std::string score_label = "enc.a" + std::to_string(l) + "." + slot;
      if (tied && l > 0) {
        *enc_slot(a, slot) = shared_alias(*enc_slot(m.enc_[0], slot), score_label);
      } else {
        const std::string weight_label =
            tied ? std::string("enc.shared.") + slot : "enc.l" + std::to_string(l) + "." + slot;
        *enc_slot(a, slot) = fresh(weight_label, score_label, slot_shape(slot, cfg));
      }
    }
    m.enc_.push_back(std::move(a));
  }
  for (int64_t l = 0; l < cfg.dec_layers; ++l) {
    DecApply a;
    for (const char* slot : kDecSlots) {
      const std::string score_label = "dec.a" + std::to_string(l) + "." + slot;
      if (tied && l > 0) {
        *dec_slot(a, slot) = shared_alias(*dec_slot(m.dec_[0], slot), score_label);
      } else {
        const std::string weight_label =
            tied ? std::string("dec.shared.") + slot : "dec.l" + std::to_string(l) + "." + slot;
        *dec_slot(a, slot) = fresh(weight_label, score_label, slot_shape(slot, cfg));
      }
    }
    m.dec_.push_back(std::move(a));
  }

  if (cfg.embedding_mode == EmbeddingMode::random_pruned) {
    m.enc_emb_ = fresh("emb.enc", "emb.enc", {cfg.src_vocab, cfg.d_model});
    m.dec_emb_ = fresh("emb.dec", "emb.dec", {cfg.tgt_vocab, cfg.d_model});
    m.out_proj_ = fresh("emb.proj", "emb.proj", {cfg.d_model, cfg.tgt_vocab});
  } else {
    if (pretrained == nullptr) {
      throw value_error("model: pretrained embeddings missing");
    }
    auto frozen = [&](const Tensor& t, const Shape& want, const char* which) {
      if (!t.defined() || t.shape() != want) {
        throw shape_error(std::string("embedding table ") + which + " has shape " +
                          (t.defined() ? shape_str(t.shape()) : "<none>") +
                          " but config requires " + shape_str(want));
      }
      SupermaskTensor s;
      s.weight = t.clone();
      s.weight.set_requires_grad(false);
      s.sigma = 1.0;
      s.k_count = s.weight.numel();
      return s;
    };
    m.enc_emb_ = frozen(pretrained->encoder, {cfg.src_vocab, cfg.d_model}, "encoder");
    m.dec_emb_ = frozen(pretrained->decoder, {cfg.tgt_vocab, cfg.d_model}, "decoder");
    m.out_proj_ = frozen(pretrained->out_proj, {cfg.d_model, cfg.tgt_vocab}, "out_proj");
  }

  m.ln_gain_ = Tensor::full({cfg.d_model}, 1.0f);
  m.ln_bias_ = Tensor::zeros({cfg.d_model});
  m.pos_table_ = sinusoid_table(cfg.max_len, cfg.d_model);
  return m;
}

// --- forward ---------------------------------------------------------------

Tensor Model::effective(Tape& tape, const SupermaskTensor& t, bool use_mask) const {
  if (!use_mask) return t.weight;
  return masked_weight(tape, t);
}

Tensor Model::positions(int64_t len) const {
  if (len > cfg_.max_len) {
    throw value_error("length overflow: sequence length " + std::to_string(len) +
                      " exceeds max_len " + std::to_string(cfg_.max_len));
  }
  const auto pv = pos_table_.values();
  std::vector<float> data(pv.begin(), pv.begin() + len * cfg_.d_model);
  return Tensor::from_data({len, cfg_.d_model}, std::move(data));
}

Tensor Model::embed(Tape& tape, const SupermaskTensor& table, const TokenMatrix& toks,
                    bool use_mask) const {
  Tensor eff = effective(tape, table, use_mask);
  Tensor x = embedding(tape, eff, toks.ids, {toks.rows, toks.cols});
  x = scale(tape, x, std::sqrt(static_cast<float>(cfg_.d_model)));
  return add(tape, x, positions(toks.cols));
}

Tensor Model::attention(Tape& tape, const Tensor& q_in, const Tensor& kv_in,
                        const Tensor& mask, const SupermaskTensor& wq,
                        const SupermaskTensor& wk, const SupermaskTensor& wv,
                        const SupermaskTensor& wo, bool use_mask) const {
  const int64_t b_n = q_in.dim(0), tq = q_in.dim(1), tk = kv_in.dim(1);
  const int64_t h = cfg_.n_heads, dh = cfg_.d_model / h;
  auto heads_first = [&](Tensor t, int64_t len) {
    t = reshape(tape, t, {b_n, len, h, dh});
    return permute(tape, t, {0, 2, 1, 3});  // [B, H, len, dh]
  };
  Tensor q = heads_first(matmul(tape, q_in, effective(tape, wq, use_mask)), tq);
  Tensor k = heads_first(matmul(tape, kv_in, effective(tape, wk, use_mask)), tk);
  Tensor v = heads_first(matmul(tape, kv_in, effective(tape, wv, use_mask)), tk);

  Tensor scores = matmul(tape, q, transpose_last2(tape, k));  // [B, H, Tq, Tk]
  scores = scale(tape, scores, 1.0f / std::sqrt(static_cast<float>(dh)));
  scores = add(tape, scores, mask);
  Tensor att = softmax(tape, scores, -1);
  Tensor ctx = matmul(tape, att, v);  // [B, H, Tq, dh]
  ctx = permute(tape, ctx, {0, 2, 1, 3});
  ctx = reshape(tape, ctx, {b_n, tq, cfg_.d_model});
  return matmul(tape, ctx, effective(tape, wo, use_mask));
}

Tensor Model::ffn(Tape& tape, const Tensor& x, const SupermaskTensor& w1,
                  const SupermaskTensor& w2, bool use_mask) const {
  Tensor hgt = matmul(tape, x, effective(tape, w1, use_mask));
  hgt = cfg_.activation == Activation::relu ? relu(tape, hgt) : gelu(tape, hgt);
  return matmul(tape, hgt, effective(tape, w2, use_mask));
}

Tensor Model::encode(Tape& tape, const TokenMatrix& src, bool use_mask) const {
  Tensor x = embed(tape, enc_emb_, src, use_mask);
  Tensor mask = attention_mask(src, src, cfg_.n_heads, /*causal=*/false);
  for (const EncApply& a : enc_) {
    Tensor att = attention(tape, x, x, mask, a.wq, a.wk, a.wv, a.wo, use_mask);
    x = layer_norm(tape, add(tape, x, att), ln_gain_, ln_bias_);
    Tensor f = ffn(tape, x, a.w1, a.w2, use_mask);
    x = layer_norm(tape, add(tape, x, f), ln_gain_, ln_bias_);
  }
  return x;
}

Tensor Model::decode(Tape& tape, const Tensor& enc_out, const TokenMatrix& src,
                     const TokenMatrix& tgt_in, bool use_mask) const {
  Tensor x = embed(tape, dec_emb_, tgt_in, use_mask);
  Tensor self_mask = attention_mask(tgt_in, tgt_in, cfg_.n_heads, /*causal=*/true);
  Tensor cross_mask = attention_mask(tgt_in, src, cfg_.n_heads, /*causal=*/false);
  for (const DecApply& a : dec_) {
    Tensor att = attention(tape, x, x, self_mask, a.wq, a.wk, a.wv, a.wo, use_mask);
    x = layer_norm(tape, add(tape, x, att), ln_gain_, ln_bias_);
    Tensor cross = attention(tape, x, enc_out, cross_mask, a.cq, a.ck, a.cv, a.co, use_mask);
    x = layer_norm(tape, add(tape, x, cross), ln_gain_, ln_bias_);
    Tensor f = ffn(tape, x, a.w1, a.w2, use_mask);
    x = layer_norm(tape, add(tape, x, f), ln_gain_, ln_bias_);
  }
  return matmul(tape, x, effective(tape, out_proj_, use_mask));
}

Tensor Model::forward(Tape& tape, const TokenMatrix& src, const TokenMatrix& tgt_in,
                      bool use_mask) const {
  Tensor enc_out = encode(tape, src, use_mask);
  return decode(tape, enc_out, src, tgt_in, use_mask);
}

std::vector<int64_t> Model::generate(const std::vector<int64_t>& src_payload,
                                     int64_t max_new) const {
  if (src_payload.empty()) return {kEosId};  // nothing to transduce
  if (max_new < 0) max_new = cfg_.max_len - 1;
  std::vector<int64_t> src_ids(src_payload);
  src_ids.push_back(kEosId);
  const TokenMatrix src(1, static_cast<int64_t>(src_ids.size()), src_ids);

  Tape tape(/*recording=*/false);
  Tensor enc_out = encode(tape, src);

  std::vector<int64_t> emitted;
  std::vector<int64_t> prefix{kBosId};
  for (int64_t step = 0; step < max_new; ++step) {
    if (static_cast<int64_t>(prefix.size()) > cfg_.max_len) break;
    const TokenMatrix tgt_in(1, static_cast<int64_t>(prefix.size()), prefix);
    Tensor logits = decode(tape, enc_out, src, tgt_in);
    const auto lv = logits.values();
    const int64_t v_n = cfg_.tgt_vocab;
    const float* last = lv.data() + (prefix.size() - 1) * static_cast<size_t>(v_n);
    int64_t best = 0;
    for (int64_t c = 1; c < v_n; ++c) {
      if (last[c] > last[best]) best = c;
    }
    emitted.push_back(best);
    if (best == kEosId) break;
    prefix.push_back(best);
  }
  return emitted;
}

// --- introspection -----------------------------------------------------------

std::vector<std::pair<std::string, Tensor>> Model::weight_storages() const {
  std::vector<std::pair<std::string, Tensor>> out;
  const bool tied = cfg_.tie_mode == TieMode::one_layer;
  const int64_t enc_sets = tied ? 1 : cfg_.enc_layers;
  const int64_t dec_sets = tied ? 1 : cfg_.dec_layers;
  for (int64_t l = 0; l < enc_sets; ++l) {
    const std::string prefix = tied ? "enc.shared." : "enc.l" + std::to_string(l) + ".";
    EncApply& a = const_cast<Model*>(this)->enc_[static_cast<size_t>(l)];
    for (const char* slot : kEncSlots) out.emplace_back(prefix + slot, enc_slot(a, slot)->weight);
  }
  for (int64_t l = 0; l < dec_sets; ++l) {
    const std::string prefix = tied ? "dec.shared." : "dec.l" + std::to_string(l) + ".";
    DecApply& a = const_cast<Model*>(this)->dec_[static_cast<size_t>(l)];
    for (const char* slot : kDecSlots) out.emplace_back(prefix + slot, dec_slot(a, slot)->weight);
  }
  out.emplace_back("emb.enc", enc_emb_.weight);
  out.emplace_back("emb.dec", dec_emb_.weight);
  out.emplace_back("emb.proj", out_proj_.weight);
  return out;
}

std::vector<std::pair<std::string, const SupermaskTensor*>> Model::supermasks() const {
  return const_cast<Model*>(this)->supermasks_mutable();
}

std::vector<std::pair<std::string, const SupermaskTensor*>> Model::supermasks_mutable() {
  std::vector<std::pair<std::string, const SupermaskTensor*>> out;
  for (size_t l = 0; l < enc_.size(); ++l) {
    for (const char* slot : kEncSlots) {
      out.emplace_back("enc.a" + std::to_string(l) + "." + slot, enc_slot(enc_[l], slot));
    }
  }
  for (size_t l = 0; l < dec_.size(); ++l) {
    for (const char* slot : kDecSlots) {
      out.emplace_back("dec.a" + std::to_string(l) + "." + slot, dec_slot(dec_[l], slot));
    }
  }
  if (enc_emb_.masked()) out.emplace_back("emb.enc", &enc_emb_);
  if (dec_emb_.masked()) out.emplace_back("emb.dec", &dec_emb_);
  if (out_proj_.masked()) out.emplace_back("emb.proj", &out_proj_);
  return out;
}

std::vector<std::pair<std::string, Tensor>> Model::score_tensors() const {
  std::vector<std::pair<std::string, Tensor>> out;
  for (const auto& [name, sm] : supermasks()) {
    if (sm->trainable()) out.emplace_back(name, sm->scores);
  }
  return out;
}

std::map<std::string, uint32_t> Model::weight_checksums() const {
  std::map<std::string, uint32_t> out;
  for (const auto& [name, w] : weight_storages()) out[name] = w.value_crc32();
  return out;
}

void Model::zero_score_grads() {
  for (auto& [name, s] : score_tensors()) {
    Tensor t = s;
    t.zero_grad();
  }
}

Model::ConsistencyReport Model::one_layer_forward_consistency(bool throw_on_violation) const {
  if (cfg_.tie_mode != TieMode::one_layer) {
    throw value_error("one_layer_forward_consistency: model is not in one_layer mode");
  }
  ConsistencyReport report;
  std::set<const void*> enc_weight_ids, dec_weight_ids;
  std::set<const void*> score_ids;
  auto fail = [&](const std::string& why) {
    report.ok = false;
    if (!report.detail.empty()) report.detail += "; ";
    report.detail += why;
  };

  for (const char* slot : kEncSlots) {
    const SupermaskTensor& base = *enc_slot(const_cast<Model*>(this)->enc_[0], slot);
    enc_weight_ids.insert(base.weight.id());
    const uint32_t crc = base.weight.value_crc32();
    for (size_t l = 0; l < enc_.size(); ++l) {
      const SupermaskTensor& t = *enc_slot(const_cast<Model*>(this)->enc_[l], slot);
      if (t.weight.id() != base.weight.id()) {
        fail(std::string("enc.") + slot + ": application " + std::to_string(l) +
             " holds a different weight allocation");
      }
      if (t.weight.value_crc32() != crc) {
        fail(std::string("enc.") + slot + ": checksum diverges at application " + std::to_string(l));
      }
      if (t.trainable() && !score_ids.insert(t.scores.id()).second) {
        fail(std::string("enc.") + slot + ": score matrix shared between applications");
      }
    }
  }
  for (const char* slot : kDecSlots) {
    const SupermaskTensor& base = *dec_slot(const_cast<Model*>(this)->dec_[0], slot);
    dec_weight_ids.insert(base.weight.id());
    const uint32_t crc = base.weight.value_crc32();
    for (size_t l = 0; l < dec_.size(); ++l) {
      const SupermaskTensor& t = *dec_slot(const_cast<Model*>(this)->dec_[l], slot);
      if (t.weight.id() != base.weight.id()) {
        fail(std::string("dec.") + slot + ": application " + std::to_string(l) +
             " holds a different weight allocation");
      }
      if (t.weight.value_crc32() != crc) {
        fail(std::string("dec.") + slot + ": checksum diverges at application " + std::to_string(l));
      }
      if (t.trainable() && !score_ids.insert(t.scores.id()).second) {
        fail(std::string("dec.") + slot + ": score matrix shared between applications");
      }
    }
  }
  report.enc_weight_storages = static_cast<int64_t>(enc_weight_ids.size());
  report.dec_weight_storages = static_cast<int64_t>(dec_weight_ids.size());
  report.enc_score_tensors = static_cast<int64_t>(enc_.size()) * 6;
  report.dec_score_tensors = static_cast<int64_t>(dec_.size()) * 10;
  if (!report.ok && throw_on_violation) {
    throw integrity_error("one_layer sharing violated: " + report.detail);
  }
  return report;
}

Model model_from_checkpoint_parts(const ModelConfig& cfg, uint64_t seed,
                                  const std::vector<Tensor>& weights,
                                  const std::vector<Tensor>& masks,
                                  const std::vector<Tensor>& scores) {
  Model m;
  if (cfg.embedding_mode == EmbeddingMode::pretrained_frozen) {
    if (weights.size() < 3) throw integrity_error("checkpoint: missing embedding sections");
    PretrainedEmbeddings pe;
    pe.encoder = weights[weights.size() - 3];
    pe.decoder = weights[weights.size() - 2];
    pe.out_proj = weights[weights.size() - 1];
    m = Model::build(cfg, seed, pe);
  } else {
    m = Model::build(cfg, seed);
  }

  const auto storages = m.weight_storages();
  if (weights.size() != storages.size()) {
    throw integrity_error("checkpoint: expected " + std::to_string(storages.size()) +
                          " weight sections, found " + std::to_string(weights.size()));
  }
  for (size_t i = 0; i < storages.size(); ++i) {
    Tensor dst = storages[i].second;
    if (weights[i].numel() != dst.numel()) {
      throw integrity_error("checkpoint: weight '" + storages[i].first + "' has " +
                            std::to_string(weights[i].numel()) + " values, expected " +
                            std::to_string(dst.numel()));
    }
    auto out = dst.values_mut();
    const auto in = weights[i].values();
    std::copy(in.begin(), in.end(), out.begin());
  }

  auto masked = m.supermasks_mutable();
  if (!masks.empty()) {
    if (masks.size() != masked.size()) {
      throw integrity_error("checkpoint: expected " + std::to_string(masked.size()) +
                            " mask sections, found " + std::to_string(masks.size()));
    }
    for (size_t i = 0; i < masked.size(); ++i) {
      auto* sm = const_cast<SupermaskTensor*>(masked[i].second);
      if (masks[i].numel() != sm->weight.numel()) {
        throw integrity_error("checkpoint: mask '" + masked[i].first + "' size mismatch");
      }
      int64_t ones = 0;
      for (float v : masks[i].values()) ones += v == 1.0f ? 1 : 0;
      if (ones != sm->k_count) {
        throw integrity_error("checkpoint: mask '" + masked[i].first + "' has " +
                              std::to_string(ones) + " bits set, expected k_count " +
                              std::to_string(sm->k_count));
      }
      Tensor fixed = masks[i];
      fixed = Tensor::from_data(sm->weight.shape(),
                                std::vector<float>(masks[i].values().begin(),
                                                   masks[i].values().end()));
      sm->fixed_mask = fixed;
      sm->scores = Tensor();
    }
  }
  if (!scores.empty()) {
    if (scores.size() != masked.size()) {
      throw integrity_error("checkpoint: expected " + std::to_string(masked.size()) +
                            " score sections, found " + std::to_string(scores.size()));
    }
    for (size_t i = 0; i < masked.size(); ++i) {
      auto* sm = const_cast<SupermaskTensor*>(masked[i].second);
      if (!sm->scores.defined()) {
        sm->scores = init_scores(sm->weight.shape(), derive_seed(seed, "score.reload"));
      }
      if (scores[i].numel() != sm->scores.numel()) {
        throw integrity_error("checkpoint: scores '" + masked[i].first + "' size mismatch");
      }
      auto out = sm->scores.values_mut();
      const auto in = scores[i].values();
      std::copy(in.begin(), in.end(), out.begin());
      sm->fixed_mask = Tensor();
    }
  }
  return m;
}

}  // namespace olt
