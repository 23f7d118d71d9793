#pragma once

#include <cstdint>
#include <optional>

#include "olt/autograd.hpp"
#include "olt/tensor.hpp"

namespace olt {

// Weight initialization families. Both sample uniform(-b, b) with b chosen so
// the standard deviation hits the family's analytic value:
//   kaiming_uniform: std = sqrt(2 / fan_in)
//   xavier_uniform:  std = sqrt(2 / (fan_in + fan_out))
// With sigma_scaling on, the std is additionally multiplied by sqrt(1/sigma)
// to compensate for the variance removed by pruning to a retention of sigma.
struct InitScheme {
  enum class Family { kaiming_uniform, xavier_uniform };
  Family family = Family::kaiming_uniform;
  bool sigma_scaling = true;
};

// Weights are consumed as x(row) * W, so for a 2-d [rows, cols] tensor
// fan_in = rows and fan_out = cols.
double analytic_init_std(const Shape& shape, InitScheme scheme, double sigma);

// Frozen random weight (requires_grad = false). Deterministic given seed.
Tensor init_weight(const Shape& shape, InitScheme scheme, double sigma, uint64_t seed);

// Learnable importance scores (requires_grad = true), kaiming uniform.
Tensor init_scores(const Shape& shape, uint64_t seed);

// Number of surviving weights at retention sigma.
int64_t k_count_for(int64_t numel, double sigma);

// Binary tensor with ones at the k_count largest scores. Ties at the
// threshold are resolved in favor of the lowest flat (row-major) index.
// Not a recorded op: gradients flow through straight_through instead.
Tensor topk_mask(const Tensor& scores, int64_t k_count);

// One maskable weight: frozen W plus, depending on how it was built, either
// learnable scores (training), a fixed mask (loaded checkpoints), or nothing
// (frozen pretrained embeddings, never pruned).
struct SupermaskTensor {
  Tensor weight;
  Tensor scores;      // undefined unless trainable
  Tensor fixed_mask;  // undefined unless loaded from a checkpoint
  double sigma = 1.0;
  int64_t k_count = 0;

  bool trainable() const { return scores.defined(); }
  bool masked() const { return scores.defined() || fixed_mask.defined(); }
};

SupermaskTensor make_supermask(const Shape& shape, InitScheme scheme, double sigma,
                               uint64_t weight_seed, uint64_t score_seed);

// Effective weight W ⊙ M recorded on the tape so that dL/dS lands on the
// scores as (dL/dW_eff) ⊙ W while W itself receives no gradient.
Tensor masked_weight(Tape& tape, const SupermaskTensor& t);

// Current mask of a supermask tensor (recomputed from scores when trainable).
Tensor current_mask(const SupermaskTensor& t);

// log2 of C(n, round(sigma * n)): the number of distinct masks of that
// density, i.e. the size of the subnetwork search space.
double search_space_log2(int64_t n, double sigma);

}  // namespace olt
