#pragma once

#include <nlohmann/json_fwd.hpp>

#include <cstdint>
#include <string>
#include <vector>

#include "olt/tokens.hpp"
#include "olt/transformer.hpp"

namespace olt {

enum class TaskKind { copy, reverse, sort };

// Synthetic sequence-to-sequence task. vocab_size includes the four reserved
// ids; payload symbols are drawn from [kReservedTokens, vocab_size).
struct TaskSpec {
  TaskKind kind = TaskKind::copy;
  int64_t vocab_size = 64;
  int64_t length_min = 4;
  int64_t length_max = 12;
  int64_t train_size = 20000;
  int64_t valid_size = 512;
  int64_t test_size = 512;
  uint64_t seed = 1;

  void validate() const;
};

std::string to_string(TaskKind k);
TaskKind task_kind_from_string(const std::string& s);
nlohmann::json task_spec_to_json(const TaskSpec& spec);
TaskSpec task_spec_from_json(const nlohmann::json& j);

struct SeqPair {
  std::vector<int64_t> src;
  std::vector<int64_t> tgt;
};

struct DatasetSplits {
  std::vector<SeqPair> train;
  std::vector<SeqPair> valid;
  std::vector<SeqPair> test;
};

// Deterministic generation; source sequences are unique within and across
// splits, so train/valid/test cannot leak into each other.
DatasetSplits generate_task(const TaskSpec& spec);

std::vector<int64_t> apply_task(TaskKind kind, const std::vector<int64_t>& src);

// Rectangular training batch. Source rows are payload + eos + padding;
// decoder input is bos + payload; decoder targets are payload + eos, with
// padding mapped to kPadId (ignored by the loss).
struct Batch {
  TokenMatrix src;
  TokenMatrix tgt_in;
  TokenMatrix tgt_out;
};

Batch make_batch(const std::vector<SeqPair>& pairs, const std::vector<int64_t>& indices);
Batch make_batch(const std::vector<SeqPair>& pairs, int64_t begin, int64_t count);

// --- pretrained embedding file ----------------------------------------------
//
// Layout: magic "OLEM" | version u32 LE | three blocks, each:
//   tag u8 (0 = encoder, 1 = decoder, 2 = out_proj) | vocab u32 LE |
//   dim u32 LE | vocab*dim f32 LE, row-major [vocab, dim].
// The out_proj block is stored [vocab, dim] like the others and transposed
// to [dim, vocab] on load.
PretrainedEmbeddings load_embeddings(const std::string& path);
void save_embeddings(const std::string& path, const PretrainedEmbeddings& emb);

}  // namespace olt
