#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace olt {

using Shape = std::vector<int64_t>;

int64_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

// Dense row-major float32 tensor. Copying a Tensor copies the handle, not
// the storage; two handles with the same id() alias one buffer.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, float value, bool requires_grad = false);
  static Tensor from_data(Shape shape, std::vector<float> data,
                          bool requires_grad = false);

  bool defined() const { return impl_ != nullptr; }
  const Shape& shape() const;
  int ndim() const;
  int64_t dim(int axis) const;
  int64_t numel() const;

  std::span<const float> values() const;
  std::span<float> values_mut();

  bool requires_grad() const;
  void set_requires_grad(bool value);

  // Gradient buffer; empty span until something has been accumulated.
  std::span<const float> grad() const;
  bool has_grad() const;
  void zero_grad();
  void accumulate_grad(std::span<const float> delta);
  std::span<float> grad_mut();  // allocates (zero-filled) on first use

  // Stable identity of the underlying storage.
  const void* id() const { return impl_.get(); }

  // CRC-32 of the raw value bytes; used for frozen-weight checks.
  uint32_t value_crc32() const;

  // Deep copy with fresh storage.
  Tensor clone() const;

  // Tape bookkeeping: outputs of recorded ops keep scratch gradients only
  // for the duration of one backward pass, leaves accumulate across passes.
  void set_node_output(bool value);
  bool is_node_output() const;
  void release_grad();

 private:
  struct Impl;
  std::shared_ptr<Impl> impl_;
};

}  // namespace olt
