#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "olt/config.hpp"
#include "olt/tensor.hpp"
#include "olt/transformer.hpp"

namespace olt {

// --- bit-packed masks ------------------------------------------------------

// Row-major flattening, LSB-first within each byte, final byte zero-padded.
// Entries must be exactly 0.0 or 1.0.
std::vector<uint8_t> pack_mask(const Tensor& mask);

// Exact inverse of pack_mask; returns a flat [numel] tensor.
// Wrong byte count is a value_error; set padding bits are a corruption
// (integrity) error.
Tensor unpack_mask(const std::vector<uint8_t>& bytes, int64_t numel);

// --- memory footprint ------------------------------------------------------

struct FootprintEntry {
  std::string name;
  int64_t floats = 0;
  int64_t float_bytes = 0;
  int64_t mask_count = 0;
  int64_t mask_bytes = 0;
};

struct FootprintReport {
  int64_t float_bytes = 0;  // 4 bytes per stored float
  int64_t mask_bytes = 0;   // sum of ceil(numel / 8) per mask
  int64_t total_bytes = 0;
  std::vector<FootprintEntry> per_tensor;
  std::string note;
};

FootprintReport footprint(const ModelConfig& cfg);

// --- checkpoints -------------------------------------------------------------
//
// Layout: magic "OLTC" | version u32 LE | header length u32 LE | header
// (canonical key-sorted JSON) | sections. Each section is
//   tag u8 | payload length u64 LE | payload | CRC-32 u32 LE
// with the CRC taken over tag, length, and payload. Sections carry no names:
// they appear in the canonical order defined by the config (weight storages,
// then per-application masks, and for resume checkpoints scores followed by
// optimizer first/second moments), so the header config fully determines the
// layout. Inference checkpoints drop the scores entirely.

constexpr uint8_t kSectionWeight = 0x01;
constexpr uint8_t kSectionMask = 0x02;
constexpr uint8_t kSectionEmbedding = 0x03;
constexpr uint8_t kSectionScores = 0x7F;

struct OptimizerStateBlobs {
  std::vector<std::vector<float>> m;  // score_tensors() order
  std::vector<std::vector<float>> v;
  int64_t step = 0;
};

struct CheckpointMeta {
  std::string flavor;  // "inference" or "resume"
  uint32_t format_version = 1;
  ModelConfig model;
  uint64_t seed = 0;
  int64_t optim_step = 0;
};

void save_checkpoint(const std::string& path, const Model& model);
void save_checkpoint_resume(const std::string& path, const Model& model,
                            const OptimizerStateBlobs& optim);

struct LoadedCheckpoint {
  CheckpointMeta meta;
  Model model;
  OptimizerStateBlobs optim;  // populated for resume checkpoints
  bool has_optim = false;
};

LoadedCheckpoint load_checkpoint(const std::string& path);

// Tolerant structural scan: parses framing and reports per-section CRC
// status instead of failing on the first bad checksum. Still throws on
// missing magic, unsupported version, or truncation.
struct SectionScan {
  uint8_t tag = 0;
  uint64_t length = 0;
  bool crc_ok = false;
};

struct CheckpointScan {
  CheckpointMeta meta;
  std::vector<SectionScan> sections;
  bool all_crc_ok = true;
  uint64_t file_bytes = 0;
};

CheckpointScan scan_checkpoint(const std::string& path);

}  // namespace olt
