#include "olt/datapipe.hpp"

#include <algorithm>
#include <cstring>
#include <fstream>
#include <unordered_set>

#include <nlohmann/json.hpp>

#include "olt/rng.hpp"

namespace olt {

void TaskSpec::validate() const {
  if (vocab_size < 8) {
    throw value_error("task: vocab_size must be >= 8 (four ids are reserved), got " +
                      std::to_string(vocab_size));
  }
  if (length_min < 1 || length_max < length_min) {
    throw value_error("task: empty length range [" + std::to_string(length_min) + ", " +
                      std::to_string(length_max) + "]");
  }
  if (train_size < 1 || valid_size < 0 || test_size < 0) {
    throw value_error("task: split sizes must be positive");
  }
}

std::string to_string(TaskKind k) {
  switch (k) {
    case TaskKind::copy: return "copy";
    case TaskKind::reverse: return "reverse";
    case TaskKind::sort: return "sort";
  }
  return "copy";
}

TaskKind task_kind_from_string(const std::string& s) {
  if (s == "copy") return TaskKind::copy;
  if (s == "reverse") return TaskKind::reverse;
  if (s == "sort") return TaskKind::sort;
  throw value_error("task: unknown kind '" + s + "'");
}

nlohmann::json task_spec_to_json(const TaskSpec& spec) {
  return nlohmann::json{
      {"kind", to_string(spec.kind)},
      {"length_max", spec.length_max},
      {"length_min", spec.length_min},
      {"test_size", spec.test_size},
      {"train_size", spec.train_size},
      {"valid_size", spec.valid_size},
      {"vocab_size", spec.vocab_size},
  };
}

TaskSpec task_spec_from_json(const nlohmann::json& j) {
  TaskSpec spec;
  if (j.contains("kind")) spec.kind = task_kind_from_string(j.at("kind").get<std::string>());
  if (j.contains("length_max")) spec.length_max = j.at("length_max").get<int64_t>();
  if (j.contains("length_min")) spec.length_min = j.at("length_min").get<int64_t>();
  if (j.contains("test_size")) spec.test_size = j.at("test_size").get<int64_t>();
  if (j.contains("train_size")) spec.train_size = j.at("train_size").get<int64_t>();
  if (j.contains("valid_size")) spec.valid_size = j.at("valid_size").get<int64_t>();
  if (j.contains("vocab_size")) spec.vocab_size = j.at("vocab_size").get<int64_t>();
  return spec;
}

std::vector<int64_t> apply_task(TaskKind kind, const std::vector<int64_t>& src) {
  std::vector<int64_t> tgt(src);
  switch (kind) {
    case TaskKind::copy:
      break;
    case TaskKind::reverse:
      std::reverse(tgt.begin(), tgt.end());
      break;
    case TaskKind::sort:
      std::sort(tgt.begin(), tgt.end());
      break;
  }
  return tgt;
}

namespace {

struct SeqHash {
  size_t operator()(const std::vector<int64_t>& v) const {
    uint64_t h = 0xcbf29ce484222325ull;
    for (int64_t x : v) {
      h ^= static_cast<uint64_t>(x);
      h *= 0x100000001b3ull;
      h = splitmix64(h);
    }
    return static_cast<size_t>(h);
  }
};

using SeqSet = std::unordered_set<std::vector<int64_t>, SeqHash>;

std::vector<SeqPair> sample_split(const TaskSpec& spec, const char* split_label,
                                  int64_t count, SeqSet& seen) {
  Rng rng(derive_seed(spec.seed, std::string("task.") + split_label));
  std::vector<SeqPair> out;
  out.reserve(static_cast<size_t>(count));
  // Generous retry budget; exhaustion means the task space is too small for
  // the requested disjoint splits.
  int64_t attempts_left = count * 200 + 1000;
  while (static_cast<int64_t>(out.size()) < count) {
    if (--attempts_left < 0) {
      throw value_error("task: sequence space too small for disjoint splits of the "
                        "requested sizes");
    }
    const int64_t len = uniform_int(rng, spec.length_min, spec.length_max);
    std::vector<int64_t> src(static_cast<size_t>(len));
    for (int64_t& t : src) t = uniform_int(rng, kReservedTokens, spec.vocab_size - 1);
    if (!seen.insert(src).second) continue;
    SeqPair pair;
    pair.tgt = apply_task(spec.kind, src);
    pair.src = std::move(src);
    out.push_back(std::move(pair));
  }
  return out;
}

}  // namespace

DatasetSplits generate_task(const TaskSpec& spec) {
  spec.validate();
  SeqSet seen;
  DatasetSplits splits;
  splits.train = sample_split(spec, "train", spec.train_size, seen);
  splits.valid = sample_split(spec, "valid", spec.valid_size, seen);
  splits.test = sample_split(spec, "test", spec.test_size, seen);
  return splits;
}

Batch make_batch(const std::vector<SeqPair>& pairs, const std::vector<int64_t>& indices) {
  if (indices.empty()) throw value_error("make_batch: empty batch");
  int64_t max_src = 0, max_tgt = 0;
  for (int64_t i : indices) {
    const SeqPair& p = pairs.at(static_cast<size_t>(i));
    max_src = std::max<int64_t>(max_src, static_cast<int64_t>(p.src.size()));
    max_tgt = std::max<int64_t>(max_tgt, static_cast<int64_t>(p.tgt.size()));
  }
  const int64_t rows = static_cast<int64_t>(indices.size());
  const int64_t s_len = max_src + 1;  // + eos
  const int64_t t_len = max_tgt + 1;  // + bos on input / + eos on target
  std::vector<int64_t> src(static_cast<size_t>(rows * s_len), kPadId);
  std::vector<int64_t> tgt_in(static_cast<size_t>(rows * t_len), kPadId);
  std::vector<int64_t> tgt_out(static_cast<size_t>(rows * t_len), kPadId);
  for (int64_t r = 0; r < rows; ++r) {
    const SeqPair& p = pairs.at(static_cast<size_t>(indices[static_cast<size_t>(r)]));
    int64_t c = 0;
    for (int64_t t : p.src) src[static_cast<size_t>(r * s_len + c++)] = t;
    src[static_cast<size_t>(r * s_len + c)] = kEosId;
    tgt_in[static_cast<size_t>(r * t_len)] = kBosId;
    for (size_t j = 0; j < p.tgt.size(); ++j) {
      tgt_in[static_cast<size_t>(r * t_len) + 1 + j] = p.tgt[j];
      tgt_out[static_cast<size_t>(r * t_len) + j] = p.tgt[j];
    }
    tgt_out[static_cast<size_t>(r * t_len) + p.tgt.size()] = kEosId;
  }
  Batch b;
  b.src = TokenMatrix(rows, s_len, std::move(src));
  b.tgt_in = TokenMatrix(rows, t_len, std::move(tgt_in));
  b.tgt_out = TokenMatrix(rows, t_len, std::move(tgt_out));
  return b;
}

Batch make_batch(const std::vector<SeqPair>& pairs, int64_t begin, int64_t count) {
  std::vector<int64_t> indices(static_cast<size_t>(count));
  for (int64_t i = 0; i < count; ++i) indices[static_cast<size_t>(i)] = begin + i;
  return make_batch(pairs, indices);
}

// --- embedding file ------------------------------------------------------

namespace {

constexpr char kEmbMagic[4] = {'O', 'L', 'E', 'M'};
constexpr uint32_t kEmbVersion = 1;

void write_u32(std::ostream& os, uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                        static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
  os.write(reinterpret_cast<const char*>(b), 4);
}

uint32_t read_u32(std::istream& is, const char* what) {
  unsigned char b[4];
  if (!is.read(reinterpret_cast<char*>(b), 4)) {
    throw truncation_error(std::string("embedding file: truncated while reading ") + what);
  }
  return static_cast<uint32_t>(b[0]) | static_cast<uint32_t>(b[1]) << 8 |
         static_cast<uint32_t>(b[2]) << 16 | static_cast<uint32_t>(b[3]) << 24;
}

void write_block(std::ostream& os, uint8_t tag, const Tensor& rows_major) {
  os.put(static_cast<char>(tag));
  write_u32(os, static_cast<uint32_t>(rows_major.dim(0)));
  write_u32(os, static_cast<uint32_t>(rows_major.dim(1)));
  const auto v = rows_major.values();
  os.write(reinterpret_cast<const char*>(v.data()),
           static_cast<std::streamsize>(v.size() * sizeof(float)));
}

Tensor read_block(std::istream& is, uint8_t want_tag) {
  const int tag = is.get();
  if (tag == EOF) {
    throw truncation_error("embedding file: truncated before block " + std::to_string(want_tag));
  }
  if (tag != want_tag) {
    throw integrity_error("embedding file: expected block tag " + std::to_string(want_tag) +
                          ", found " + std::to_string(tag));
  }
  const uint32_t vocab = read_u32(is, "vocab");
  const uint32_t dim = read_u32(is, "dim");
  const size_t count = static_cast<size_t>(vocab) * dim;
  std::vector<float> data(count);
  is.read(reinterpret_cast<char*>(data.data()),
          static_cast<std::streamsize>(count * sizeof(float)));
  const auto got = is.gcount();
  if (static_cast<size_t>(got) != count * sizeof(float)) {
    throw truncation_error("embedding file: block " + std::to_string(want_tag) + " expects " +
                           std::to_string(count * sizeof(float)) + " payload bytes, found " +
                           std::to_string(got));
  }
  return Tensor::from_data({static_cast<int64_t>(vocab), static_cast<int64_t>(dim)},
                           std::move(data));
}

Tensor transpose2d(const Tensor& t) {
  Tape tape(false);
  return transpose_last2(tape, t);
}

}  // namespace

void save_embeddings(const std::string& path, const PretrainedEmbeddings& emb) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw value_error("embedding file: cannot open '" + path + "' for writing");
  os.write(kEmbMagic, 4);
  write_u32(os, kEmbVersion);
  write_block(os, 0, emb.encoder);
  write_block(os, 1, emb.decoder);
  write_block(os, 2, transpose2d(emb.out_proj));  // stored [vocab, dim]
  if (!os) throw value_error("embedding file: write failed for '" + path + "'");
}

PretrainedEmbeddings load_embeddings(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw value_error("embedding file: cannot open '" + path + "'");
  char magic[4];
  if (!is.read(magic, 4)) throw truncation_error("embedding file: shorter than its magic");
  if (std::memcmp(magic, kEmbMagic, 4) != 0) {
    throw integrity_error("embedding file: bad magic, not an OLEM file");
  }
  const uint32_t version = read_u32(is, "version");
  if (version != kEmbVersion) {
    throw version_error("embedding file: unsupported version " + std::to_string(version));
  }
  PretrainedEmbeddings emb;
  emb.encoder = read_block(is, 0);
  emb.decoder = read_block(is, 1);
  emb.out_proj = transpose2d(read_block(is, 2));
  return emb;
}

}  // namespace olt
