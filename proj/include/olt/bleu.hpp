#pragma once

#include <array>
#include <cstdint>
#include <vector>

namespace olt {

struct BleuResult {
  double score = 0.0;  // corpus BLEU in [0, 100]
  std::array<double, 4> precisions{};
  double brevity_penalty = 1.0;
  bool zero_precision = false;  // some n-gram order had no matches
};

// Corpus BLEU with modified n-gram precision and brevity penalty, unsmoothed,
// one reference per hypothesis. A zero precision at any order zeroes the
// geometric mean (score 0, zero_precision set).
BleuResult bleu(const std::vector<std::vector<int64_t>>& hypotheses,
                const std::vector<std::vector<int64_t>>& references, int max_n = 4);

}  // namespace olt
