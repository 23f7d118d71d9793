#pragma once

#include <cstdint>
#include <vector>

#include "olt/errors.hpp"

namespace olt {

// Reserved vocabulary slots shared by data generation and the model.
constexpr int64_t kPadId = 0;
constexpr int64_t kBosId = 1;
constexpr int64_t kEosId = 2;
constexpr int64_t kUnkId = 3;
constexpr int64_t kReservedTokens = 4;

// Rectangular batch of token ids, row-major.
struct TokenMatrix {
  int64_t rows = 0;
  int64_t cols = 0;
  std::vector<int64_t> ids;

  TokenMatrix() = default;
  TokenMatrix(int64_t r, int64_t c, std::vector<int64_t> data)
      : rows(r), cols(c), ids(std::move(data)) {
    if (static_cast<int64_t>(ids.size()) != rows * cols) {
      throw value_error("TokenMatrix: id count does not match rows*cols");
    }
  }

  int64_t at(int64_t r, int64_t c) const { return ids[static_cast<size_t>(r * cols + c)]; }
};

}  // namespace olt
