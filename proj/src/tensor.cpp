#include "olt/tensor.hpp"

#include <cstring>
#include <sstream>

#include "olt/crc32.hpp"
#include "olt/errors.hpp"

namespace olt {

int64_t shape_numel(const Shape& shape) {
  int64_t n = 1;
  for (int64_t d : shape) n *= d;
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

struct Tensor::Impl {
  Shape shape;
  std::vector<float> value;
  std::vector<float> grad;
  bool requires_grad = false;
  bool node_output = false;
};

static void check_shape(const Shape& shape) {
  for (int64_t d : shape) {
    if (d < 0) throw shape_error("tensor dimension must be non-negative, got " + shape_str(shape));
  }
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
  check_shape(shape);
  auto impl = std::make_shared<Impl>();
  impl->value.assign(static_cast<size_t>(shape_numel(shape)), 0.0f);
  impl->shape = std::move(shape);
  impl->requires_grad = requires_grad;
  Tensor t;
  t.impl_ = std::move(impl);
  return t;
}

Tensor Tensor::full(Shape shape, float value, bool requires_grad) {
  Tensor t = zeros(std::move(shape), requires_grad);
  for (float& v : t.impl_->value) v = value;
  return t;
}

Tensor Tensor::from_data(Shape shape, std::vector<float> data, bool requires_grad) {
  check_shape(shape);
  if (shape_numel(shape) != static_cast<int64_t>(data.size())) {
    throw shape_error("data size " + std::to_string(data.size()) +
                      " does not match shape " + shape_str(shape));
  }
  auto impl = std::make_shared<Impl>();
  impl->shape = std::move(shape);
  impl->value = std::move(data);
  impl->requires_grad = requires_grad;
  Tensor t;
  t.impl_ = std::move(impl);
  return t;
}

const Shape& Tensor::shape() const { return impl_->shape; }
int Tensor::ndim() const { return static_cast<int>(impl_->shape.size()); }

int64_t Tensor::dim(int axis) const {
  if (axis < 0) axis += ndim();
  return impl_->shape.at(static_cast<size_t>(axis));
}

int64_t Tensor::numel() const { return static_cast<int64_t>(impl_->value.size()); }

std::span<const float> Tensor::values() const { return impl_->value; }
std::span<float> Tensor::values_mut() { return impl_->value; }

bool Tensor::requires_grad() const { return impl_->requires_grad; }
void Tensor::set_requires_grad(bool value) { impl_->requires_grad = value; }

std::span<const float> Tensor::grad() const { return impl_->grad; }
bool Tensor::has_grad() const { return !impl_->grad.empty(); }

void Tensor::zero_grad() {
  std::fill(impl_->grad.begin(), impl_->grad.end(), 0.0f);
}

void Tensor::release_grad() {
  impl_->grad.clear();
  impl_->grad.shrink_to_fit();
}

std::span<float> Tensor::grad_mut() {
  if (impl_->grad.empty()) impl_->grad.assign(impl_->value.size(), 0.0f);
  return impl_->grad;
}

void Tensor::accumulate_grad(std::span<const float> delta) {
  if (delta.size() != impl_->value.size()) {
    throw shape_error("gradient size mismatch: " + std::to_string(delta.size()) +
                      " vs " + std::to_string(impl_->value.size()));
  }
  auto g = grad_mut();
  for (size_t i = 0; i < delta.size(); ++i) g[i] += delta[i];
}

void Tensor::set_node_output(bool value) { impl_->node_output = value; }
bool Tensor::is_node_output() const { return impl_->node_output; }

uint32_t Tensor::value_crc32() const {
  return crc32_bytes(impl_->value.data(), impl_->value.size() * sizeof(float));
}

Tensor Tensor::clone() const {
  Tensor t = Tensor::from_data(impl_->shape, impl_->value, impl_->requires_grad);
  return t;
}

}  // namespace olt
