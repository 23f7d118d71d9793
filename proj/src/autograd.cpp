#include "olt/autograd.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <limits>
#include <memory>
#include <thread>

#include "olt/errors.hpp"

namespace olt {

void Tape::record(Tensor out, std::function<void(const Tensor&)> backward_fn) {
  out.set_node_output(true);
  nodes_.push_back(Node{std::move(out), std::move(backward_fn)});
}

void Tape::backward(const Tensor& loss) {
  if (!loss.defined() || loss.numel() != 1) {
    throw value_error("backward: loss must be a scalar tensor");
  }
  Tensor seed = loss;
  seed.grad_mut()[0] += 1.0f;
  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
    if (it->out.has_grad()) it->backward(it->out);
  }
  // Intermediate gradients are scratch; only leaves persist across calls.
  for (auto& node : nodes_) node.out.release_grad();
}

// --- gemm kernels ------------------------------------------------------------
// (m, n) are output dims, k is the contraction. All matrices row-major.
//
// Kernels parallelize over disjoint output rows with a static schedule, so
// every element is accumulated in the same order as a serial run and results
// are bit-identical for any thread count.

namespace {

int gemm_threads() {
  static const int n = [] {
    if (const char* env = std::getenv("OLT_THREADS")) {
      const int v = std::atoi(env);
      if (v >= 1) return v;
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return static_cast<int>(std::clamp(hw, 1u, 4u));
  }();
  return n;
}

template <typename Fn>
void parallel_rows(int64_t m, int64_t work_per_row, Fn&& body) {
  const int threads = gemm_threads();
  if (threads <= 1 || m < 2 || m * work_per_row < (1 << 16)) {
    body(0, m);
    return;
  }
  const int used = static_cast<int>(std::min<int64_t>(threads, m));
  std::vector<std::thread> pool;
  pool.reserve(static_cast<size_t>(used - 1));
  const int64_t chunk = (m + used - 1) / used;
  for (int t = 1; t < used; ++t) {
    const int64_t lo = t * chunk;
    const int64_t hi = std::min<int64_t>(m, lo + chunk);
    if (lo >= hi) break;
    pool.emplace_back([&body, lo, hi] { body(lo, hi); });
  }
  body(0, std::min<int64_t>(m, chunk));
  for (auto& th : pool) th.join();
}

// C[m x n] += A[m x k] * B[k x n]
void gemm_nn(int64_t m, int64_t n, int64_t k, const float* A, const float* B, float* C) {
  parallel_rows(m, n * k, [=](int64_t lo, int64_t hi) {
    for (int64_t i = lo; i < hi; ++i) {
      const float* __restrict a_row = A + i * k;
      float* __restrict c_row = C + i * n;
      for (int64_t p = 0; p < k; ++p) {
        const float a = a_row[p];
        const float* __restrict b_row = B + p * n;
        for (int64_t j = 0; j < n; ++j) c_row[j] += a * b_row[j];
      }
    }
  });
}

// Both transposed variants materialize the transpose and reuse gemm_nn: the
// broadcast-multiply-accumulate loop vectorizes under strict FP semantics,
// while a dot-product reduction would not.

// C[m x n] += A[m x k] * B^T, B stored [n x k]
void gemm_nt(int64_t m, int64_t n, int64_t k, const float* A, const float* B, float* C) {
  std::vector<float> bt(static_cast<size_t>(k * n));
  for (int64_t j = 0; j < n; ++j) {
    const float* b_row = B + j * k;
    for (int64_t p = 0; p < k; ++p) bt[static_cast<size_t>(p * n + j)] = b_row[p];
  }
  gemm_nn(m, n, k, A, bt.data(), C);
}

// C[m x n] += A^T * B[k x n], A stored [k x m]
void gemm_tn(int64_t m, int64_t n, int64_t k, const float* A, const float* B, float* C) {
  std::vector<float> at(static_cast<size_t>(m * k));
  for (int64_t p = 0; p < k; ++p) {
    const float* a_row = A + p * m;
    for (int64_t i = 0; i < m; ++i) at[static_cast<size_t>(i * k + p)] = a_row[i];
  }
  gemm_nn(m, n, k, at.data(), B, C);
}

bool any_requires_grad(std::initializer_list<const Tensor*> ts) {
  for (const Tensor* t : ts) {
    if (t->defined() && t->requires_grad()) return true;
  }
  return false;
}

Tensor make_output(Tape& tape, Shape shape, std::vector<float> data,
                   std::initializer_list<const Tensor*> parents) {
  const bool rg = tape.recording() && any_requires_grad(parents);
  return Tensor::from_data(std::move(shape), std::move(data), rg);
}

// b broadcasts against a trailing suffix of a's shape (or is a single
// element). Returns the repeat period, i.e. b.numel().
int64_t check_trailing_broadcast(const Tensor& a, const Tensor& b, const char* op) {
  const Shape& as = a.shape();
  const Shape& bs = b.shape();
  if (b.numel() == 1) return 1;
  if (bs.size() > as.size()) {
    throw shape_error(std::string(op) + ": cannot broadcast " + shape_str(bs) +
                      " against " + shape_str(as));
  }
  for (size_t i = 0; i < bs.size(); ++i) {
    if (bs[bs.size() - 1 - i] != as[as.size() - 1 - i]) {
      throw shape_error(std::string(op) + ": shape " + shape_str(bs) +
                        " is not a trailing suffix of " + shape_str(as));
    }
  }
  return b.numel();
}

}  // namespace

// --- matmul ------------------------------------------------------------------

Tensor matmul(Tape& tape, const Tensor& a, const Tensor& b) {
  if (a.ndim() < 2 || b.ndim() < 2) {
    throw shape_error("matmul: operands must have at least 2 dims, got " +
                      shape_str(a.shape()) + " and " + shape_str(b.shape()));
  }
  const int64_t k = a.dim(-1);
  const int64_t m = a.dim(-2);
  if (b.dim(-2) != k) {
    throw shape_error("matmul: inner dimensions disagree: " + shape_str(a.shape()) +
                      " x " + shape_str(b.shape()));
  }
  const int64_t n = b.dim(-1);

  if (b.ndim() == 2) {
    // Fold every leading axis of a into rows.
    const int64_t rows = a.numel() / k;
    Shape out_shape(a.shape().begin(), a.shape().end() - 1);
    out_shape.push_back(n);
    std::vector<float> out_data(static_cast<size_t>(rows * n), 0.0f);
    gemm_nn(rows, n, k, a.values().data(), b.values().data(), out_data.data());
    Tensor out = make_output(tape, std::move(out_shape), std::move(out_data), {&a, &b});
    if (out.requires_grad()) {
      tape.record(out, [a, b, rows, n, k](const Tensor& o) {
        const float* g = o.grad().data();
        if (a.requires_grad()) {
          Tensor at = a;
          gemm_nt(rows, k, n, g, b.values().data(), at.grad_mut().data());
        }
        if (b.requires_grad()) {
          Tensor bt = b;
          gemm_tn(k, n, rows, a.values().data(), g, bt.grad_mut().data());
        }
      });
    }
    return out;
  }

  if (a.ndim() != b.ndim() ||
      !std::equal(a.shape().begin(), a.shape().end() - 2, b.shape().begin())) {
    throw shape_error("matmul: leading dimensions disagree: " + shape_str(a.shape()) +
                      " x " + shape_str(b.shape()));
  }
  const int64_t blocks = a.numel() / (m * k);
  Shape out_shape(a.shape().begin(), a.shape().end() - 1);
  out_shape.push_back(n);
  std::vector<float> out_data(static_cast<size_t>(blocks * m * n), 0.0f);
  for (int64_t c = 0; c < blocks; ++c) {
    gemm_nn(m, n, k, a.values().data() + c * m * k, b.values().data() + c * k * n,
            out_data.data() + c * m * n);
  }
  Tensor out = make_output(tape, std::move(out_shape), std::move(out_data), {&a, &b});
  if (out.requires_grad()) {
    tape.record(out, [a, b, blocks, m, n, k](const Tensor& o) {
      const float* g = o.grad().data();
      if (a.requires_grad()) {
        Tensor at = a;
        float* da = at.grad_mut().data();
        for (int64_t c = 0; c < blocks; ++c) {
          gemm_nt(m, k, n, g + c * m * n, b.values().data() + c * k * n, da + c * m * k);
        }
      }
      if (b.requires_grad()) {
        Tensor bt = b;
        float* db = bt.grad_mut().data();
        for (int64_t c = 0; c < blocks; ++c) {
          gemm_tn(k, n, m, a.values().data() + c * m * k, g + c * m * n, db + c * k * n);
        }
      }
    });
  }
  return out;
}

// --- elementwise -------------------------------------------------------------

Tensor add(Tape& tape, const Tensor& a, const Tensor& b) {
  const int64_t period = check_trailing_broadcast(a, b, "add");
  const auto av = a.values();
  const auto bv = b.values();
  std::vector<float> out_data(av.size());
  for (size_t i = 0; i < av.size(); ++i) {
    out_data[i] = av[i] + bv[i % static_cast<size_t>(period)];
  }
  Tensor out = make_output(tape, a.shape(), std::move(out_data), {&a, &b});
  if (out.requires_grad()) {
    tape.record(out, [a, b, period](const Tensor& o) {
      const auto g = o.grad();
      if (a.requires_grad()) {
        Tensor at = a;
        at.accumulate_grad(g);
      }
      if (b.requires_grad()) {
        Tensor bt = b;
        auto db = bt.grad_mut();
        for (size_t i = 0; i < g.size(); ++i) db[i % static_cast<size_t>(period)] += g[i];
      }
    });
  }
  return out;
}

Tensor mul(Tape& tape, const Tensor& a, const Tensor& b) {
  const int64_t period = check_trailing_broadcast(a, b, "mul");
  const auto av = a.values();
  const auto bv = b.values();
  std::vector<float> out_data(av.size());
  for (size_t i = 0; i < av.size(); ++i) {
    out_data[i] = av[i] * bv[i % static_cast<size_t>(period)];
  }
  Tensor out = make_output(tape, a.shape(), std::move(out_data), {&a, &b});
  if (out.requires_grad()) {
    tape.record(out, [a, b, period](const Tensor& o) {
      const auto g = o.grad();
      const auto av = a.values();
      const auto bv = b.values();
      if (a.requires_grad()) {
        Tensor at = a;
        auto da = at.grad_mut();
        for (size_t i = 0; i < g.size(); ++i) da[i] += g[i] * bv[i % static_cast<size_t>(period)];
      }
      if (b.requires_grad()) {
        Tensor bt = b;
        auto db = bt.grad_mut();
        for (size_t i = 0; i < g.size(); ++i) db[i % static_cast<size_t>(period)] += g[i] * av[i];
      }
    });
  }
  return out;
}

Tensor relu(Tape& tape, const Tensor& x) {
  const auto xv = x.values();
  std::vector<float> out_data(xv.size());
  for (size_t i = 0; i < xv.size(); ++i) out_data[i] = xv[i] > 0.0f ? xv[i] : 0.0f;
  Tensor out = make_output(tape, x.shape(), std::move(out_data), {&x});
  if (out.requires_grad()) {
    tape.record(out, [x](const Tensor& o) {
      const auto g = o.grad();
      const auto xv = x.values();
      Tensor xt = x;
      auto dx = xt.grad_mut();
      for (size_t i = 0; i < g.size(); ++i) {
        if (xv[i] > 0.0f) dx[i] += g[i];
      }
    });
  }
  return out;
}

namespace {
constexpr float kGeluC0 = 0.7978845608028654f;  // sqrt(2/pi)
constexpr float kGeluC1 = 0.044715f;
}  // namespace

Tensor gelu(Tape& tape, const Tensor& x) {
  const auto xv = x.values();
  std::vector<float> out_data(xv.size());
  for (size_t i = 0; i < xv.size(); ++i) {
    const float v = xv[i];
    const float u = kGeluC0 * (v + kGeluC1 * v * v * v);
    out_data[i] = 0.5f * v * (1.0f + std::tanh(u));
  }
  Tensor out = make_output(tape, x.shape(), std::move(out_data), {&x});
  if (out.requires_grad()) {
    tape.record(out, [x](const Tensor& o) {
      const auto g = o.grad();
      const auto xv = x.values();
      Tensor xt = x;
      auto dx = xt.grad_mut();
      for (size_t i = 0; i < g.size(); ++i) {
        const float v = xv[i];
        const float u = kGeluC0 * (v + kGeluC1 * v * v * v);
        const float t = std::tanh(u);
        const float du = kGeluC0 * (1.0f + 3.0f * kGeluC1 * v * v);
        dx[i] += g[i] * (0.5f * (1.0f + t) + 0.5f * v * (1.0f - t * t) * du);
      }
    });
  }
  return out;
}

Tensor scale(Tape& tape, const Tensor& x, float factor) {
  const auto xv = x.values();
  std::vector<float> out_data(xv.size());
  for (size_t i = 0; i < xv.size(); ++i) out_data[i] = xv[i] * factor;
  Tensor out = make_output(tape, x.shape(), std::move(out_data), {&x});
  if (out.requires_grad()) {
    tape.record(out, [x, factor](const Tensor& o) {
      const auto g = o.grad();
      Tensor xt = x;
      auto dx = xt.grad_mut();
      for (size_t i = 0; i < g.size(); ++i) dx[i] += g[i] * factor;
    });
  }
  return out;
}

Tensor elementwise(Tape& tape, EwOp op, const Tensor& a, const Tensor& b) {
  switch (op) {
    case EwOp::add:
      if (!b.defined()) throw value_error("elementwise: add needs two operands");
      return add(tape, a, b);
    case EwOp::mul:
      if (!b.defined()) throw value_error("elementwise: mul needs two operands");
      return mul(tape, a, b);
    case EwOp::relu:
      if (b.defined()) throw value_error("elementwise: relu is unary");
      return relu(tape, a);
    case EwOp::gelu:
      if (b.defined()) throw value_error("elementwise: gelu is unary");
      return gelu(tape, a);
  }
  throw value_error("elementwise: unknown op");
}

// --- softmax -----------------------------------------------------------------

Tensor softmax(Tape& tape, const Tensor& x, int axis) {
  if (axis < 0) axis += x.ndim();
  if (axis < 0 || axis >= x.ndim()) {
    throw shape_error("softmax: axis out of bounds for " + shape_str(x.shape()));
  }
  const Shape& s = x.shape();
  int64_t outer = 1, inner = 1;
  for (int i = 0; i < axis; ++i) outer *= s[i];
  for (int i = axis + 1; i < x.ndim(); ++i) inner *= s[i];
  const int64_t len = s[axis];

  const auto xv = x.values();
  std::vector<float> out_data(xv.size());
  for (int64_t o = 0; o < outer; ++o) {
    for (int64_t in = 0; in < inner; ++in) {
      const int64_t base = o * len * inner + in;
      float mx = -std::numeric_limits<float>::infinity();
      for (int64_t t = 0; t < len; ++t) mx = std::max(mx, xv[base + t * inner]);
      float total = 0.0f;
      for (int64_t t = 0; t < len; ++t) {
        const float e = std::exp(xv[base + t * inner] - mx);
        out_data[base + t * inner] = e;
        total += e;
      }
      const float inv = 1.0f / total;
      for (int64_t t = 0; t < len; ++t) out_data[base + t * inner] *= inv;
    }
  }
  Tensor out = make_output(tape, x.shape(), std::move(out_data), {&x});
  if (out.requires_grad()) {
    tape.record(out, [x, outer, inner, len](const Tensor& o) {
      const auto g = o.grad();
      const auto yv = o.values();
      Tensor xt = x;
      auto dx = xt.grad_mut();
      for (int64_t ou = 0; ou < outer; ++ou) {
        for (int64_t in = 0; in < inner; ++in) {
          const int64_t base = ou * len * inner + in;
          float dot = 0.0f;
          for (int64_t t = 0; t < len; ++t) {
            const int64_t i = base + t * inner;
            dot += g[i] * yv[i];
          }
          for (int64_t t = 0; t < len; ++t) {
            const int64_t i = base + t * inner;
            dx[i] += yv[i] * (g[i] - dot);
          }
        }
      }
    });
  }
  return out;
}

// --- layer_norm --------------------------------------------------------------

Tensor layer_norm(Tape& tape, const Tensor& x, const Tensor& gain,
                  const Tensor& bias, float eps) {
  const int64_t n = x.dim(-1);
  if (gain.numel() != n || bias.numel() != n) {
    throw shape_error("layer_norm: gain/bias length must equal last dim " +
                      std::to_string(n) + ", got " + shape_str(gain.shape()) +
                      " and " + shape_str(bias.shape()));
  }
  const int64_t rows = x.numel() / n;
  const auto xv = x.values();
  const auto gv = gain.values();
  const auto bv = bias.values();
  std::vector<float> out_data(xv.size());
  auto xhat = std::make_shared<std::vector<float>>(xv.size());
  auto inv_std = std::make_shared<std::vector<float>>(static_cast<size_t>(rows));
  for (int64_t r = 0; r < rows; ++r) {
    const float* row = xv.data() + r * n;
    float mean = 0.0f;
    for (int64_t i = 0; i < n; ++i) mean += row[i];
    mean /= static_cast<float>(n);
    float var = 0.0f;
    for (int64_t i = 0; i < n; ++i) {
      const float d = row[i] - mean;
      var += d * d;
    }
    var /= static_cast<float>(n);
    const float is = 1.0f / std::sqrt(var + eps);
    (*inv_std)[static_cast<size_t>(r)] = is;
    for (int64_t i = 0; i < n; ++i) {
      const float h = (row[i] - mean) * is;
      (*xhat)[static_cast<size_t>(r * n + i)] = h;
      out_data[static_cast<size_t>(r * n + i)] = h * gv[i] + bv[i];
    }
  }
  Tensor out = make_output(tape, x.shape(), std::move(out_data), {&x, &gain, &bias});
  if (out.requires_grad()) {
    tape.record(out, [x, gain, bias, xhat, inv_std, rows, n](const Tensor& o) {
      const auto g = o.grad();
      const auto gv = gain.values();
      if (x.requires_grad()) {
        Tensor xt = x;
        auto dx = xt.grad_mut();
        for (int64_t r = 0; r < rows; ++r) {
          const float is = (*inv_std)[static_cast<size_t>(r)];
          const float* h = xhat->data() + r * n;
          const float* gr = g.data() + r * n;
          float m1 = 0.0f, m2 = 0.0f;
          for (int64_t i = 0; i < n; ++i) {
            const float dh = gr[i] * gv[i];
            m1 += dh;
            m2 += dh * h[i];
          }
          m1 /= static_cast<float>(n);
          m2 /= static_cast<float>(n);
          for (int64_t i = 0; i < n; ++i) {
            const float dh = gr[i] * gv[i];
            dx[r * n + i] += is * (dh - m1 - h[i] * m2);
          }
        }
      }
      if (gain.requires_grad()) {
        Tensor gt = gain;
        auto dg = gt.grad_mut();
        for (int64_t r = 0; r < rows; ++r) {
          for (int64_t i = 0; i < n; ++i) {
            dg[i] += g[r * n + i] * (*xhat)[static_cast<size_t>(r * n + i)];
          }
        }
      }
      if (bias.requires_grad()) {
        Tensor bt = bias;
        auto db = bt.grad_mut();
        for (int64_t r = 0; r < rows; ++r) {
          for (int64_t i = 0; i < n; ++i) db[i] += g[r * n + i];
        }
      }
    });
  }
  return out;
}

// --- cross_entropy -----------------------------------------------------------

Tensor cross_entropy(Tape& tape, const Tensor& logits,
                     const std::vector<int64_t>& targets, int64_t ignore_index,
                     float label_smoothing) {
  if (logits.ndim() != 2) {
    throw shape_error("cross_entropy: logits must be [rows, classes], got " +
                      shape_str(logits.shape()));
  }
  const int64_t rows = logits.dim(0);
  const int64_t classes = logits.dim(1);
  if (static_cast<int64_t>(targets.size()) != rows) {
    throw shape_error("cross_entropy: " + std::to_string(targets.size()) +
                      " targets for " + std::to_string(rows) + " rows");
  }
  const auto zv = logits.values();
  auto probs = std::make_shared<std::vector<float>>(zv.size(), 0.0f);
  int64_t valid = 0;
  double total = 0.0;
  for (int64_t r = 0; r < rows; ++r) {
    const int64_t t = targets[static_cast<size_t>(r)];
    if (t == ignore_index) continue;
    if (t < 0 || t >= classes) {
      throw value_error("cross_entropy: target " + std::to_string(t) +
                        " out of range [0, " + std::to_string(classes) + ")");
    }
    ++valid;
    const float* z = zv.data() + r * classes;
    float mx = z[0];
    for (int64_t c = 1; c < classes; ++c) mx = std::max(mx, z[c]);
    double sum_exp = 0.0;
    double sum_z = 0.0;
    for (int64_t c = 0; c < classes; ++c) {
      sum_exp += std::exp(static_cast<double>(z[c] - mx));
      sum_z += z[c];
    }
    const double lse = mx + std::log(sum_exp);
    double row_loss = (1.0 - label_smoothing) * (lse - z[t]);
    if (label_smoothing > 0.0f) {
      row_loss += label_smoothing * (lse - sum_z / classes);
    }
    total += row_loss;
    float* p = probs->data() + r * classes;
    for (int64_t c = 0; c < classes; ++c) {
      p[c] = static_cast<float>(std::exp(static_cast<double>(z[c] - mx)) / sum_exp);
    }
  }
  if (valid == 0) {
    throw value_error("cross_entropy: every position is ignored, loss undefined");
  }
  std::vector<float> out_data{static_cast<float>(total / valid)};
  Tensor out = make_output(tape, Shape{}, std::move(out_data), {&logits});
  if (out.requires_grad()) {
    auto tgt = std::make_shared<std::vector<int64_t>>(targets);
    tape.record(out, [logits, tgt, probs, ignore_index, valid, rows, classes,
                      label_smoothing](const Tensor& o) {
      const float go = o.grad()[0];
      Tensor lt = logits;
      auto dz = lt.grad_mut();
      const float w = go / static_cast<float>(valid);
      const float on_target = 1.0f - label_smoothing;
      const float uniform = label_smoothing / static_cast<float>(classes);
      for (int64_t r = 0; r < rows; ++r) {
        const int64_t t = (*tgt)[static_cast<size_t>(r)];
        if (t == ignore_index) continue;
        const float* p = probs->data() + r * classes;
        float* d = dz.data() + r * classes;
        for (int64_t c = 0; c < classes; ++c) {
          float target_mass = uniform;
          if (c == t) target_mass += on_target;
          d[c] += w * (p[c] - target_mass);
        }
      }
    });
  }
  return out;
}

// --- straight_through --------------------------------------------------------

Tensor straight_through(Tape& tape, const Tensor& hard, const Tensor& soft) {
  if (hard.shape() != soft.shape()) {
    throw shape_error("straight_through: shapes disagree: " + shape_str(hard.shape()) +
                      " vs " + shape_str(soft.shape()));
  }
  std::vector<float> out_data(hard.values().begin(), hard.values().end());
  // Only soft participates in the gradient, by definition.
  Tensor out = make_output(tape, hard.shape(), std::move(out_data), {&soft});
  if (out.requires_grad()) {
    tape.record(out, [soft](const Tensor& o) {
      Tensor st = soft;
      st.accumulate_grad(o.grad());
    });
  }
  return out;
}

// --- embedding ---------------------------------------------------------------

Tensor embedding(Tape& tape, const Tensor& table, const std::vector<int64_t>& ids,
                 const Shape& id_shape) {
  if (table.ndim() != 2) {
    throw shape_error("embedding: table must be 2-d, got " + shape_str(table.shape()));
  }
  if (shape_numel(id_shape) != static_cast<int64_t>(ids.size())) {
    throw shape_error("embedding: id count " + std::to_string(ids.size()) +
                      " does not match shape " + shape_str(id_shape));
  }
  const int64_t vocab = table.dim(0);
  const int64_t cols = table.dim(1);
  const auto tv = table.values();
  std::vector<float> out_data(ids.size() * static_cast<size_t>(cols));
  for (size_t i = 0; i < ids.size(); ++i) {
    const int64_t id = ids[i];
    if (id < 0 || id >= vocab) {
      throw value_error("embedding: token id " + std::to_string(id) +
                        " out of range [0, " + std::to_string(vocab) + ")");
    }
    std::memcpy(out_data.data() + i * static_cast<size_t>(cols),
                tv.data() + id * cols, static_cast<size_t>(cols) * sizeof(float));
  }
  Shape out_shape = id_shape;
  out_shape.push_back(cols);
  Tensor out = make_output(tape, std::move(out_shape), std::move(out_data), {&table});
  if (out.requires_grad()) {
    auto idv = std::make_shared<std::vector<int64_t>>(ids);
    tape.record(out, [table, idv, cols](const Tensor& o) {
      const auto g = o.grad();
      Tensor tt = table;
      auto dt = tt.grad_mut();
      for (size_t i = 0; i < idv->size(); ++i) {
        const int64_t id = (*idv)[i];
        for (int64_t c = 0; c < cols; ++c) {
          dt[id * cols + c] += g[i * static_cast<size_t>(cols) + static_cast<size_t>(c)];
        }
      }
    });
  }
  return out;
}

// --- shape ops ---------------------------------------------------------------

Tensor reshape(Tape& tape, const Tensor& x, Shape new_shape) {
  if (shape_numel(new_shape) != x.numel()) {
    throw shape_error("reshape: cannot view " + shape_str(x.shape()) + " as " +
                      shape_str(new_shape));
  }
  std::vector<float> out_data(x.values().begin(), x.values().end());
  Tensor out = make_output(tape, std::move(new_shape), std::move(out_data), {&x});
  if (out.requires_grad()) {
    tape.record(out, [x](const Tensor& o) {
      Tensor xt = x;
      xt.accumulate_grad(o.grad());
    });
  }
  return out;
}

namespace {

// Copies src into dst so that dst[perm(index)] = src[index].
void permute_copy(const float* src, const Shape& src_shape,
                  const std::vector<int>& axes, float* dst) {
  const int nd = static_cast<int>(src_shape.size());
  Shape dst_shape(nd);
  for (int i = 0; i < nd; ++i) dst_shape[i] = src_shape[axes[i]];
  std::vector<int64_t> dst_strides(nd);
  int64_t acc = 1;
  for (int i = nd - 1; i >= 0; --i) {
    dst_strides[i] = acc;
    acc *= dst_shape[i];
  }
  // Stride of dst per unit step of each source axis.
  std::vector<int64_t> step(nd);
  for (int i = 0; i < nd; ++i) step[axes[i]] = dst_strides[i];

  const int64_t total = shape_numel(src_shape);
  std::vector<int64_t> idx(nd, 0);
  int64_t dpos = 0;
  for (int64_t s = 0; s < total; ++s) {
    dst[dpos] = src[s];
    for (int ax = nd - 1; ax >= 0; --ax) {
      dpos += step[ax];
      if (++idx[ax] < src_shape[ax]) break;
      dpos -= idx[ax] * step[ax];
      idx[ax] = 0;
    }
  }
}

}  // namespace

Tensor permute(Tape& tape, const Tensor& x, const std::vector<int>& axes) {
  const int nd = x.ndim();
  if (static_cast<int>(axes.size()) != nd) {
    throw shape_error("permute: axes count must equal rank " + std::to_string(nd));
  }
  std::vector<bool> seen(static_cast<size_t>(nd), false);
  for (int a : axes) {
    if (a < 0 || a >= nd || seen[static_cast<size_t>(a)]) {
      throw shape_error("permute: invalid axis permutation");
    }
    seen[static_cast<size_t>(a)] = true;
  }
  Shape out_shape(static_cast<size_t>(nd));
  for (int i = 0; i < nd; ++i) out_shape[static_cast<size_t>(i)] = x.dim(axes[static_cast<size_t>(i)]);
  std::vector<float> out_data(static_cast<size_t>(x.numel()));
  permute_copy(x.values().data(), x.shape(), axes, out_data.data());
  Tensor out = make_output(tape, std::move(out_shape), std::move(out_data), {&x});
  if (out.requires_grad()) {
    std::vector<int> inverse(static_cast<size_t>(nd));
    for (int i = 0; i < nd; ++i) inverse[static_cast<size_t>(axes[static_cast<size_t>(i)])] = i;
    tape.record(out, [x, inverse](const Tensor& o) {
      std::vector<float> gx(static_cast<size_t>(x.numel()));
      permute_copy(o.grad().data(), o.shape(), inverse, gx.data());
      Tensor xt = x;
      xt.accumulate_grad(gx);
    });
  }
  return out;
}

Tensor transpose_last2(Tape& tape, const Tensor& x) {
  if (x.ndim() < 2) {
    throw shape_error("transpose_last2: need at least 2 dims, got " + shape_str(x.shape()));
  }
  std::vector<int> axes(static_cast<size_t>(x.ndim()));
  for (int i = 0; i < x.ndim(); ++i) axes[static_cast<size_t>(i)] = i;
  std::swap(axes[axes.size() - 1], axes[axes.size() - 2]);
  return permute(tape, x, axes);
}

// --- reductions --------------------------------------------------------------

Tensor sum(Tape& tape, const Tensor& x) {
  double total = 0.0;
  for (float v : x.values()) total += v;
  Tensor out = make_output(tape, Shape{}, {static_cast<float>(total)}, {&x});
  if (out.requires_grad()) {
    tape.record(out, [x](const Tensor& o) {
      const float g = o.grad()[0];
      Tensor xt = x;
      auto dx = xt.grad_mut();
      for (float& v : dx) v += g;
    });
  }
  return out;
}

Tensor mean(Tape& tape, const Tensor& x) {
  if (x.numel() == 0) throw value_error("mean: empty tensor");
  double total = 0.0;
  for (float v : x.values()) total += v;
  const float inv = 1.0f / static_cast<float>(x.numel());
  Tensor out = make_output(tape, Shape{}, {static_cast<float>(total) * inv}, {&x});
  if (out.requires_grad()) {
    tape.record(out, [x, inv](const Tensor& o) {
      const float g = o.grad()[0] * inv;
      Tensor xt = x;
      auto dx = xt.grad_mut();
      for (float& v : dx) v += g;
    });
  }
  return out;
}

}  // namespace olt
