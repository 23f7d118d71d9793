#include "olt/datapipe.hpp"

#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>

#include "olt/bleu.hpp"
#include "olt/crc32.hpp"
#include "olt/rng.hpp"

using namespace olt;

namespace {

TaskSpec small_spec(TaskKind kind) {
  TaskSpec spec;
  spec.kind = kind;
  spec.vocab_size = 32;
  spec.length_min = 3;
  spec.length_max = 8;
  spec.train_size = 400;
  spec.valid_size = 64;
  spec.test_size = 64;
  spec.seed = 7;
  return spec;
}

uint32_t dataset_crc(const DatasetSplits& splits) {
  uint32_t crc = 0;
  auto feed = [&](const std::vector<SeqPair>& pairs) {
    for (const auto& p : pairs) {
      crc = crc32_update(crc, p.src.data(), p.src.size() * sizeof(int64_t));
      crc = crc32_update(crc, p.tgt.data(), p.tgt.size() * sizeof(int64_t));
    }
  };
  feed(splits.train);
  feed(splits.valid);
  feed(splits.test);
  return crc;
}

std::string temp_path(const char* name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

}  // namespace

TEST_CASE("task transforms") {
  const std::vector<int64_t> src{5, 9, 7};
  CHECK(apply_task(TaskKind::copy, src) == std::vector<int64_t>{5, 9, 7});
  CHECK(apply_task(TaskKind::reverse, src) == std::vector<int64_t>{7, 9, 5});
  CHECK(apply_task(TaskKind::sort, {9, 5, 7}) == std::vector<int64_t>{5, 7, 9});
}

TEST_CASE("task validation") {
  TaskSpec spec = small_spec(TaskKind::copy);
  spec.vocab_size = 7;
  CHECK_THROWS_AS(spec.validate(), value_error);
  spec = small_spec(TaskKind::copy);
  spec.length_min = 5;
  spec.length_max = 4;
  CHECK_THROWS_AS(generate_task(spec), value_error);
  // tiny sequence space cannot fill disjoint splits
  spec = small_spec(TaskKind::copy);
  spec.vocab_size = 8;
  spec.length_min = 1;
  spec.length_max = 1;
  spec.train_size = 400;
  CHECK_THROWS_AS(generate_task(spec), value_error);
}

TEST_CASE("dataset determinism and golden checksum") {
  const TaskSpec spec = small_spec(TaskKind::reverse);
  const DatasetSplits a = generate_task(spec);
  const DatasetSplits b = generate_task(spec);
  CHECK(dataset_crc(a) == dataset_crc(b));
  CHECK(a.train.size() == 400);
  CHECK(a.valid.size() == 64);
  CHECK(a.test.size() == 64);

  // Frozen golden value: guards the generator against platform or refactor
  // drift. Regenerate deliberately if the sampling scheme ever changes.
  CHECK(dataset_crc(a) == 0x8db447e5u);

  TaskSpec other = spec;
  other.seed = 8;
  CHECK(dataset_crc(generate_task(other)) != dataset_crc(a));
}

TEST_CASE("splits are disjoint and tokens in range") {
  const DatasetSplits splits = generate_task(small_spec(TaskKind::copy));
  std::set<std::vector<int64_t>> train_srcs;
  for (const auto& p : splits.train) train_srcs.insert(p.src);
  CHECK(train_srcs.size() == splits.train.size());  // unique within train
  for (const auto& p : splits.valid) CHECK(train_srcs.find(p.src) == train_srcs.end());
  for (const auto& p : splits.test) CHECK(train_srcs.find(p.src) == train_srcs.end());
  std::set<std::vector<int64_t>> valid_srcs;
  for (const auto& p : splits.valid) valid_srcs.insert(p.src);
  for (const auto& p : splits.test) CHECK(valid_srcs.find(p.src) == valid_srcs.end());

  for (const auto& p : splits.train) {
    CHECK(p.src.size() >= 3);
    CHECK(p.src.size() <= 8);
    for (int64_t t : p.src) {
      CHECK(t >= kReservedTokens);
      CHECK(t < 32);
    }
  }
}

TEST_CASE("batch layout honors the padding contract") {
  std::vector<SeqPair> pairs{
      {{5, 6, 7}, {5, 6, 7}},
      {{8, 9}, {8, 9}},
  };
  const Batch b = make_batch(pairs, 0, 2);
  CHECK(b.src.rows == 2);
  CHECK(b.src.cols == 4);  // longest source + eos
  // row 0: 5 6 7 eos; row 1: 8 9 eos pad
  CHECK(b.src.at(0, 3) == kEosId);
  CHECK(b.src.at(1, 2) == kEosId);
  CHECK(b.src.at(1, 3) == kPadId);
  CHECK(b.tgt_in.at(0, 0) == kBosId);
  CHECK(b.tgt_in.at(1, 3) == kPadId);
  CHECK(b.tgt_out.at(0, 3) == kEosId);
  CHECK(b.tgt_out.at(1, 2) == kEosId);
  CHECK(b.tgt_out.at(1, 3) == kPadId);

  // pad never precedes a real token; every row ends with eos before padding
  for (const TokenMatrix* m : {&b.src, &b.tgt_out}) {
    for (int64_t r = 0; r < m->rows; ++r) {
      bool seen_pad = false;
      bool seen_eos = false;
      for (int64_t c = 0; c < m->cols; ++c) {
        const int64_t t = m->at(r, c);
        if (t == kPadId) {
          seen_pad = true;
          CHECK(seen_eos);
        } else {
          CHECK_FALSE(seen_pad);
          if (t == kEosId) seen_eos = true;
        }
      }
      CHECK(seen_eos);
    }
  }
  CHECK_THROWS_AS(make_batch(pairs, {}), value_error);
}

TEST_CASE("bleu perfect match scores 100") {
  const std::vector<std::vector<int64_t>> corpus{{4, 5, 6, 7, 8}, {9, 10, 11, 12}};
  const BleuResult r = bleu(corpus, corpus);
  CHECK(r.score == doctest::Approx(100.0));
  CHECK_FALSE(r.zero_precision);
  CHECK(r.brevity_penalty == doctest::Approx(1.0));
}

TEST_CASE("bleu zero 4-gram overlap scores 0 unsmoothed") {
  const std::vector<std::vector<int64_t>> hyp{{4, 5, 6, 7, 8}};
  const std::vector<std::vector<int64_t>> ref{{4, 5, 9, 7, 8}};  // no common 4-gram
  const BleuResult r = bleu(hyp, ref);
  CHECK(r.zero_precision);
  CHECK(r.score == doctest::Approx(0.0));
  CHECK(r.precisions[0] > 0.0);
}

TEST_CASE("bleu clipping, the classic repeated-token case") {
  // hyp: the the the the the the the / ref: the cat is on the mat
  // with ids: the=4 cat=5 is=6 on=7 mat=8
  const std::vector<std::vector<int64_t>> hyp{{4, 4, 4, 4, 4, 4, 4}};
  const std::vector<std::vector<int64_t>> ref{{4, 5, 6, 7, 4, 8}};
  const BleuResult r = bleu(hyp, ref);
  CHECK(r.precisions[0] == doctest::Approx(2.0 / 7.0));
  CHECK(r.zero_precision);  // no bigram match
}

TEST_CASE("bleu sentence order invariance and corruption monotonicity") {
  std::vector<std::vector<int64_t>> hyp{{4, 5, 6, 7}, {8, 9, 10, 11}, {12, 13, 14, 15}};
  std::vector<std::vector<int64_t>> ref = hyp;
  const double base = bleu(hyp, ref).score;
  std::vector<std::vector<int64_t>> hyp_perm{hyp[2], hyp[0], hyp[1]};
  std::vector<std::vector<int64_t>> ref_perm{ref[2], ref[0], ref[1]};
  CHECK(bleu(hyp_perm, ref_perm).score == doctest::Approx(base));

  hyp[1][2] = 20;  // corrupt one token of a perfect match
  CHECK(bleu(hyp, ref).score <= base);
}

TEST_CASE("bleu edge cases") {
  CHECK_THROWS_AS(bleu({}, {}), value_error);
  CHECK_THROWS_AS(bleu({{4}}, {{4}, {5}}), value_error);
  const BleuResult empty_hyp = bleu({{}, {}}, {{4, 5}, {6}});
  CHECK(empty_hyp.score == 0.0);
  CHECK(empty_hyp.zero_precision);
}

TEST_CASE("embedding file round-trip is bit-exact") {
  PretrainedEmbeddings emb;
  emb.encoder = Tensor::from_data({5, 3}, {0.1f, -0.2f, 0.3f, 1, 2, 3, 4, 5, 6, 7, 8, 9,
                                           -1, -2, -3});
  emb.decoder = Tensor::from_data({4, 3}, {9, 8, 7, 6, 5, 4, 3, 2, 1, 0, -1, -2});
  emb.out_proj = Tensor::from_data({3, 4}, {1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12});
  const std::string path = temp_path("olt_emb_roundtrip.olem");
  save_embeddings(path, emb);
  const PretrainedEmbeddings back = load_embeddings(path);
  CHECK(back.encoder.shape() == emb.encoder.shape());
  CHECK(back.out_proj.shape() == emb.out_proj.shape());
  for (int64_t i = 0; i < emb.encoder.numel(); ++i) {
    CHECK(back.encoder.values()[static_cast<size_t>(i)] ==
          emb.encoder.values()[static_cast<size_t>(i)]);
  }
  for (int64_t i = 0; i < emb.out_proj.numel(); ++i) {
    CHECK(back.out_proj.values()[static_cast<size_t>(i)] ==
          emb.out_proj.values()[static_cast<size_t>(i)]);
  }
  std::remove(path.c_str());
}

TEST_CASE("embedding file errors are distinct") {
  PretrainedEmbeddings emb;
  emb.encoder = Tensor::full({4, 2}, 1.0f);
  emb.decoder = Tensor::full({4, 2}, 2.0f);
  emb.out_proj = Tensor::full({2, 4}, 3.0f);
  const std::string path = temp_path("olt_emb_errors.olem");
  save_embeddings(path, emb);

  SUBCASE("magic mismatch") {
    std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
    f.seekp(0);
    f.write("XXXX", 4);
    f.close();
    CHECK_THROWS_AS(load_embeddings(path), integrity_error);
  }
  SUBCASE("version mismatch") {
    std::fstream f(path, std::ios::in | std::ios::out | std::ios::binary);
    f.seekp(4);
    const uint32_t bad = 99;
    f.write(reinterpret_cast<const char*>(&bad), 4);
    f.close();
    CHECK_THROWS_AS(load_embeddings(path), version_error);
  }
  SUBCASE("truncation reports byte counts") {
    const auto full_size = std::filesystem::file_size(path);
    std::filesystem::resize_file(path, full_size - 7);
    try {
      load_embeddings(path);
      FAIL("expected truncation_error");
    } catch (const truncation_error& e) {
      const std::string msg = e.what();
      CHECK(msg.find("bytes") != std::string::npos);
    }
  }
  std::remove(path.c_str());
}

TEST_CASE("config-vs-file dimension mismatch names both sizes") {
  PretrainedEmbeddings emb;
  emb.encoder = Tensor::full({100, 8}, 1.0f);  // vocab 100
  emb.decoder = Tensor::full({128, 8}, 2.0f);
  emb.out_proj = Tensor::full({8, 128}, 3.0f);
  ModelConfig cfg;
  cfg.d_model = 8;
  cfg.n_heads = 2;
  cfg.src_vocab = 128;  // config says 128
  cfg.tgt_vocab = 128;
  cfg.embedding_mode = EmbeddingMode::pretrained_frozen;
  try {
    Model::build(cfg, 1, emb);
    FAIL("expected shape_error");
  } catch (const shape_error& e) {
    const std::string msg = e.what();
    CHECK(msg.find("100") != std::string::npos);
    CHECK(msg.find("128") != std::string::npos);
  }
}
