#pragma once

#include <functional>
#include <vector>

#include "olt/tensor.hpp"

namespace olt {

// Reverse-mode tape. Ops append nodes in execution order, so the record is
// already topologically sorted; backward() walks it once in reverse.
//
// Gradient semantics match the usual update loop: leaf tensors (anything not
// produced by a recorded op) accumulate gradients across backward() calls
// until zero_grad(), while intermediate gradients are scratch storage that
// backward() releases before returning.
//
// A Tape and the tensors recorded on it belong to one thread at a time.
class Tape {
 public:
  explicit Tape(bool recording = true) : recording_(recording) {}

  bool recording() const { return recording_; }
  void set_recording(bool value) { recording_ = value; }

  size_t size() const { return nodes_.size(); }
  void clear() { nodes_.clear(); }

  // backward_fn reads out.grad() and accumulates into the parents it
  // captured. It is only invoked when out actually received a gradient.
  void record(Tensor out, std::function<void(const Tensor& out)> backward_fn);

  // Seeds d(loss)/d(loss) = 1 and propagates through the tape.
  // Pre: loss is scalar (numel == 1).
  void backward(const Tensor& loss);

 private:
  struct Node {
    Tensor out;
    std::function<void(const Tensor&)> backward;
  };
  std::vector<Node> nodes_;
  bool recording_ = true;
};

// --- recorded operations ----------------------------------------------------
//
// Shapes follow row-major convention. Binary ops broadcast only the second
// argument, and only against a trailing suffix of the first argument's shape
// (or a single element). Anything else is a shape_error.

// Matrix product on the last two axes.
//   [*, m, k] x [k, n]     -> [*, m, n]   (shared right operand)
//   [*, m, k] x [*, k, n]  -> [*, m, n]   (matching leading axes)
Tensor matmul(Tape& tape, const Tensor& a, const Tensor& b);

Tensor add(Tape& tape, const Tensor& a, const Tensor& b);
Tensor mul(Tape& tape, const Tensor& a, const Tensor& b);
Tensor relu(Tape& tape, const Tensor& x);
// tanh approximation
Tensor gelu(Tape& tape, const Tensor& x);
Tensor scale(Tape& tape, const Tensor& x, float factor);

enum class EwOp { add, mul, relu, gelu };
Tensor elementwise(Tape& tape, EwOp op, const Tensor& a, const Tensor& b = {});

// Numerically stable softmax along `axis` (negative axes count from the end).
Tensor softmax(Tape& tape, const Tensor& x, int axis);

// Normalization over the last axis: (x - mean) / sqrt(var + eps) * gain + bias.
// gain and bias must have length == last dimension.
Tensor layer_norm(Tape& tape, const Tensor& x, const Tensor& gain,
                  const Tensor& bias, float eps = 1e-5f);

// Mean negative log-likelihood over rows whose target != ignore_index.
// logits: [rows, classes]. Throws value_error if every row is ignored.
// label_smoothing distributes that fraction of the target mass uniformly.
Tensor cross_entropy(Tape& tape, const Tensor& logits,
                     const std::vector<int64_t>& targets, int64_t ignore_index,
                     float label_smoothing = 0.0f);

// Forward returns `hard` unchanged; backward passes the incoming gradient
// through to `soft` as-is and sends nothing to `hard`.
Tensor straight_through(Tape& tape, const Tensor& hard, const Tensor& soft);

// Row gather: out[i, :] = table[ids[i], :], reshaped to id_shape + [columns].
Tensor embedding(Tape& tape, const Tensor& table, const std::vector<int64_t>& ids,
                 const Shape& id_shape);

Tensor reshape(Tape& tape, const Tensor& x, Shape new_shape);
Tensor permute(Tape& tape, const Tensor& x, const std::vector<int>& axes);
Tensor transpose_last2(Tape& tape, const Tensor& x);

Tensor sum(Tape& tape, const Tensor& x);
Tensor mean(Tape& tape, const Tensor& x);

}  // namespace olt
