#include "olt/bleu.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "olt/errors.hpp"

namespace olt {

namespace {

using NgramCounts = std::map<std::vector<int64_t>, int64_t>;

NgramCounts count_ngrams(const std::vector<int64_t>& tokens, int n) {
  NgramCounts counts;
  if (static_cast<int>(tokens.size()) < n) return counts;
  for (size_t i = 0; i + static_cast<size_t>(n) <= tokens.size(); ++i) {
    std::vector<int64_t> gram(tokens.begin() + static_cast<ptrdiff_t>(i),
                              tokens.begin() + static_cast<ptrdiff_t>(i) + n);
    ++counts[gram];
  }
  return counts;
}

}  // namespace

BleuResult bleu(const std::vector<std::vector<int64_t>>& hypotheses,
                const std::vector<std::vector<int64_t>>& references, int max_n) {
  if (max_n < 1 || max_n > 4) throw value_error("bleu: max_n must be in [1, 4]");
  if (references.empty()) throw value_error("bleu: reference corpus is empty");
  if (hypotheses.size() != references.size()) {
    throw value_error("bleu: " + std::to_string(hypotheses.size()) + " hypotheses vs " +
                      std::to_string(references.size()) + " references");
  }

  BleuResult result;
  int64_t hyp_len = 0, ref_len = 0;
  std::array<int64_t, 4> matches{};
  std::array<int64_t, 4> totals{};
  for (size_t s = 0; s < hypotheses.size(); ++s) {
    const auto& hyp = hypotheses[s];
    const auto& ref = references[s];
    hyp_len += static_cast<int64_t>(hyp.size());
    ref_len += static_cast<int64_t>(ref.size());
    for (int n = 1; n <= max_n; ++n) {
      const NgramCounts hyp_counts = count_ngrams(hyp, n);
      const NgramCounts ref_counts = count_ngrams(ref, n);
      for (const auto& [gram, count] : hyp_counts) {
        totals[static_cast<size_t>(n - 1)] += count;
        const auto it = ref_counts.find(gram);
        if (it != ref_counts.end()) {
          matches[static_cast<size_t>(n - 1)] += std::min(count, it->second);
        }
      }
    }
  }

  double log_mean = 0.0;
  for (int n = 1; n <= max_n; ++n) {
    const size_t i = static_cast<size_t>(n - 1);
    const double p = totals[i] > 0 ? static_cast<double>(matches[i]) / static_cast<double>(totals[i])
                                   : 0.0;
    result.precisions[i] = p;
    if (p <= 0.0) {
      result.zero_precision = true;
    } else {
      log_mean += std::log(p) / max_n;
    }
  }

  result.brevity_penalty =
      hyp_len >= ref_len || hyp_len == 0
          ? (hyp_len == 0 ? 0.0 : 1.0)
          : std::exp(1.0 - static_cast<double>(ref_len) / static_cast<double>(hyp_len));
  if (result.zero_precision) {
    result.score = 0.0;
  } else {
    result.score = 100.0 * result.brevity_penalty * std::exp(log_mean);
  }
  return result;
}

}  // namespace olt
