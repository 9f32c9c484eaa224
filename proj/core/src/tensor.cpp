#include "cardiolabel/tensor.hpp"

#include <sstream>
#include <stdexcept>

namespace cardiolabel {

std::int64_t shape_numel(const std::vector<std::int64_t>& shape) {
  std::int64_t n = 1;
  for (std::int64_t d : shape) {
    if (d < 0) throw std::runtime_error("tensor shape has negative dimension " + shape_to_string(shape));
    n *= d;
  }
  return n;
}

std::string shape_to_string(const std::vector<std::int64_t>& shape) {
  std::ostringstream os;
  os << '{';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ',';
    os << shape[i];
  }
  os << '}';
  return os.str();
}

Tensor::Tensor(std::vector<std::int64_t> shape)
    : shape_(std::move(shape)), data_(static_cast<std::size_t>(shape_numel(shape_)), 0.0) {}

Tensor::Tensor(std::vector<std::int64_t> shape, std::vector<double> values) : shape_(std::move(shape)), data_(std::move(values)) {
  if (shape_numel(shape_) != static_cast<std::int64_t>(data_.size()))
    throw std::runtime_error("tensor value count " + std::to_string(data_.size()) + " does not match shape " + shape_to_string(shape_));
}

Tensor Tensor::scalar(double v) {
  Tensor t;
  t.data_.assign(1, v);
  return t;
}

Tensor Tensor::full(std::vector<std::int64_t> shape, double v) {
  Tensor t(std::move(shape));
  t.fill(v);
  return t;
}

std::int64_t Tensor::dim(int axis) const {
  if (axis < 0 || axis >= rank()) throw std::runtime_error("tensor axis " + std::to_string(axis) + " out of range for shape " + shape_to_string(shape_));
  return shape_[static_cast<std::size_t>(axis)];
}

std::int64_t Tensor::offset(std::initializer_list<std::int64_t> idx) const {
  if (static_cast<int>(idx.size()) != rank()) throw std::runtime_error("index rank " + std::to_string(idx.size()) + " does not match tensor rank " + std::to_string(rank()));
  std::int64_t off = 0;
  int axis = 0;
  for (std::int64_t i : idx) {
    const std::int64_t d = shape_[static_cast<std::size_t>(axis)];
    if (i < 0 || i >= d) throw std::runtime_error("index " + std::to_string(i) + " out of range on axis " + std::to_string(axis) + " of " + shape_to_string(shape_));
    off = off * d + i;
    ++axis;
  }
  return off;
}

double& Tensor::at(std::initializer_list<std::int64_t> idx) { return data_[static_cast<std::size_t>(offset(idx))]; }

double Tensor::at(std::initializer_list<std::int64_t> idx) const { return data_[static_cast<std::size_t>(offset(idx))]; }

void Tensor::fill(double v) { std::fill(data_.begin(), data_.end(), v); }

double Tensor::item() const {
  if (data_.size() != 1) throw std::runtime_error("item() on tensor of size " + std::to_string(data_.size()));
  return data_[0];
}

}  // namespace cardiolabel
