/*
 * Copyright (c) 2026 The ktu Authors
 *
 * Licensed under the Apache License, Version 2.0;
 * You may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an 'AS IS' BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "ktu/autodiff/ndarray.hpp"

#include <cmath>
#include <cstring>
#include <sstream>

namespace ktu::ad {

std::size_t shape_size(const Shape& shape) {
  std::size_t n = 1;
  for (std::size_t e : shape) n *= e;
  return n;
}

std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '(';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ", ";
    os << shape[i];
  }
  os << ')';
  return os.str();
}

bool all_finite(std::span<const double> values) {
  for (double v : values) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

namespace {

void check_shape(const Shape& shape, std::size_t n) {
  for (std::size_t e : shape) {
    if (e == 0) throw ShapeError("NdArray: zero extent in shape " + shape_string(shape));
  }
  if (shape_size(shape) != n) {
    throw ShapeError("NdArray: shape " + shape_string(shape) + " holds " +
                     std::to_string(shape_size(shape)) + " values, got " +
                     std::to_string(n));
  }
}

}  // namespace

NdArray::NdArray() : shape_{1}, data_(std::make_shared<const std::vector<double>>(1, 0.0)) {}

NdArray::NdArray(Shape shape, std::vector<double> values) {
  check_shape(shape, values.size());
  if (!all_finite(values)) throw NumericError("NdArray: non-finite value");
  shape_ = std::move(shape);
  data_ = std::make_shared<const std::vector<double>>(std::move(values));
}

NdArray NdArray::unchecked(Shape shape, std::vector<double> values) {
  check_shape(shape, values.size());
  NdArray a;
  a.shape_ = std::move(shape);
  a.data_ = std::make_shared<const std::vector<double>>(std::move(values));
  return a;
}

NdArray NdArray::zeros(Shape shape) { return filled(std::move(shape), 0.0); }

NdArray NdArray::filled(Shape shape, double value) {
  std::size_t n = shape_size(shape);
  return NdArray(std::move(shape), std::vector<double>(n, value));
}

NdArray NdArray::scalar(double value) { return NdArray({1}, {value}); }

NdArray NdArray::vector(std::vector<double> values) {
  std::size_t n = values.size();
  return NdArray({n}, std::move(values));
}

NdArray NdArray::matrix(std::size_t rows, std::size_t cols, std::vector<double> values) {
  return NdArray({rows, cols}, std::move(values));
}

std::size_t NdArray::extent(std::size_t axis) const {
  if (axis >= shape_.size()) {
    throw ShapeError("NdArray: axis " + std::to_string(axis) + " out of range for shape " +
                     shape_string(shape_));
  }
  return shape_[axis];
}

std::size_t NdArray::rows() const {
  if (shape_.size() == 1) return 1;
  if (shape_.size() == 2) return shape_[0];
  throw ShapeError("NdArray: rows() needs rank <= 2, shape " + shape_string(shape_));
}

std::size_t NdArray::cols() const {
  if (shape_.size() == 1) return shape_[0];
  if (shape_.size() == 2) return shape_[1];
  throw ShapeError("NdArray: cols() needs rank <= 2, shape " + shape_string(shape_));
}

std::span<const double> NdArray::values() const {
  return data_ ? std::span<const double>(*data_) : std::span<const double>();
}

double NdArray::at(std::size_t r, std::size_t c) const {
  return (*data_)[r * cols() + c];
}

double NdArray::item() const {
  if (size() != 1) throw ShapeError("NdArray: item() on shape " + shape_string(shape_));
  return (*data_)[0];
}

NdArray NdArray::reshaped(Shape shape) const {
  check_shape(shape, size());
  NdArray a = *this;
  a.shape_ = std::move(shape);
  return a;
}

bool NdArray::same_values(const NdArray& other) const {
  if (shape_ != other.shape_) return false;
  return std::memcmp(data(), other.data(), size() * sizeof(double)) == 0;
}

}  // namespace ktu::ad
