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

#pragma once

#include <cstddef>
#include <initializer_list>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "ktu/error.hpp"

namespace ktu::ad {

using Shape = std::vector<std::size_t>;

std::size_t shape_size(const Shape& shape);
std::string shape_string(const Shape& shape);

/// Immutable dense array of doubles in row-major order.
///
/// Storage is reference counted, so copies are cheap and an NdArray can be
/// shared across threads once built. Construction rejects non-finite values.
class NdArray {
 public:
  NdArray();
  NdArray(Shape shape, std::vector<double> values);

  static NdArray zeros(Shape shape);
  static NdArray filled(Shape shape, double value);
  static NdArray scalar(double value);
  static NdArray vector(std::vector<double> values);
  static NdArray matrix(std::size_t rows, std::size_t cols,
                        std::vector<double> values);

  /// Skips the finiteness scan. Used by ops whose outputs are finite by
  /// construction (and by the tape, which checks once per node).
  static NdArray unchecked(Shape shape, std::vector<double> values);

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t size() const { return data_ ? data_->size() : 0; }
  std::size_t extent(std::size_t axis) const;

  /// Rows/cols view for rank <= 2. A vector is one row.
  std::size_t rows() const;
  std::size_t cols() const;

  std::span<const double> values() const;
  const double* data() const { return data_ ? data_->data() : nullptr; }
  double operator[](std::size_t i) const { return (*data_)[i]; }
  double at(std::size_t r, std::size_t c) const;
  double item() const;

  NdArray reshaped(Shape shape) const;
  bool same_values(const NdArray& other) const;

 private:
  Shape shape_;
  std::shared_ptr<const std::vector<double>> data_;
};

bool all_finite(std::span<const double> values);

}  // namespace ktu::ad
