#include "olt/supermask.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "olt/errors.hpp"
#include "olt/rng.hpp"

namespace olt {

namespace {

void check_sigma(double sigma) {
  if (!(sigma > 0.0) || sigma > 1.0) {
    throw value_error("sigma must be in (0, 1], got " + std::to_string(sigma));
  }
}

void check_2d_positive(const Shape& shape) {
  if (shape.size() != 2 || shape[0] <= 0 || shape[1] <= 0) {
    throw value_error("weight shape must be 2-d with positive dims, got " +
                      shape_str(shape));
  }
}

Tensor sample_uniform(const Shape& shape, double bound, uint64_t seed, bool requires_grad) {
  Rng rng(seed);
  std::vector<float> data(static_cast<size_t>(shape_numel(shape)));
  for (float& v : data) v = static_cast<float>(uniform_symmetric(rng, bound));
  return Tensor::from_data(shape, std::move(data), requires_grad);
}

}  // namespace

double analytic_init_std(const Shape& shape, InitScheme scheme, double sigma) {
  check_2d_positive(shape);
  check_sigma(sigma);
  const double fan_in = static_cast<double>(shape[0]);
  const double fan_out = static_cast<double>(shape[1]);
  double std_dev = scheme.family == InitScheme::Family::kaiming_uniform
                       ? std::sqrt(2.0 / fan_in)
                       : std::sqrt(2.0 / (fan_in + fan_out));
  if (scheme.sigma_scaling) std_dev *= std::sqrt(1.0 / sigma);
  return std_dev;
}

Tensor init_weight(const Shape& shape, InitScheme scheme, double sigma, uint64_t seed) {
  const double std_dev = analytic_init_std(shape, scheme, sigma);
  // uniform(-b, b) has std b/sqrt(3)
  const double bound = std_dev * std::sqrt(3.0);
  return sample_uniform(shape, bound, seed, /*requires_grad=*/false);
}

Tensor init_scores(const Shape& shape, uint64_t seed) {
  check_2d_positive(shape);
  const double bound = std::sqrt(2.0 / static_cast<double>(shape[0])) * std::sqrt(3.0);
  return sample_uniform(shape, bound, seed, /*requires_grad=*/true);
}

int64_t k_count_for(int64_t numel, double sigma) {
  check_sigma(sigma);
  const int64_t k = std::llround(sigma * static_cast<double>(numel));
  return std::clamp<int64_t>(k, 0, numel);
}

Tensor topk_mask(const Tensor& scores, int64_t k_count) {
  const int64_t n = scores.numel();
  if (k_count < 0 || k_count > n) {
    throw value_error("topk_mask: k_count " + std::to_string(k_count) +
                      " outside [0, " + std::to_string(n) + "]");
  }
  Tensor mask = Tensor::zeros(scores.shape());
  if (k_count == 0) return mask;
  auto mv = mask.values_mut();
  if (k_count == n) {
    std::fill(mv.begin(), mv.end(), 1.0f);
    return mask;
  }
  const auto sv = scores.values();
  // Partition around the k-th largest value, then resolve ties at the
  // threshold by lowest flat index.
  std::vector<float> work(sv.begin(), sv.end());
  std::nth_element(work.begin(), work.begin() + (k_count - 1), work.end(),
                   std::greater<float>());
  const float threshold = work[static_cast<size_t>(k_count - 1)];
  int64_t above = 0;
  for (float v : sv) {
    if (v > threshold) ++above;
  }
  int64_t remaining = k_count - above;
  for (int64_t i = 0; i < n; ++i) {
    if (sv[static_cast<size_t>(i)] > threshold) {
      mv[static_cast<size_t>(i)] = 1.0f;
    } else if (sv[static_cast<size_t>(i)] == threshold && remaining > 0) {
      mv[static_cast<size_t>(i)] = 1.0f;
      --remaining;
    }
  }
  return mask;
}

SupermaskTensor make_supermask(const Shape& shape, InitScheme scheme, double sigma,
                               uint64_t weight_seed, uint64_t score_seed) {
  SupermaskTensor t;
  t.weight = init_weight(shape, scheme, sigma, weight_seed);
  t.scores = init_scores(shape, score_seed);
  t.sigma = sigma;
  t.k_count = k_count_for(t.weight.numel(), sigma);
  return t;
}

Tensor masked_weight(Tape& tape, const SupermaskTensor& t) {
  if (t.scores.defined()) {
    Tensor mask = topk_mask(t.scores, t.k_count);
    Tensor gate = straight_through(tape, mask, t.scores);
    return mul(tape, t.weight, gate);
  }
  if (t.fixed_mask.defined()) {
    return mul(tape, t.weight, t.fixed_mask);
  }
  return t.weight;
}

Tensor current_mask(const SupermaskTensor& t) {
  if (t.scores.defined()) return topk_mask(t.scores, t.k_count);
  if (t.fixed_mask.defined()) return t.fixed_mask;
  return Tensor::full(t.weight.shape(), 1.0f);
}

double search_space_log2(int64_t n, double sigma) {
  if (n < 1) throw value_error("search_space_log2: n must be >= 1");
  const int64_t k = k_count_for(n, sigma);
  const double ln_c = std::lgamma(static_cast<double>(n) + 1.0) -
                      std::lgamma(static_cast<double>(k) + 1.0) -
                      std::lgamma(static_cast<double>(n - k) + 1.0);
  return ln_c / std::log(2.0);
}

}  // namespace olt
