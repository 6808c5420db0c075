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
#include <functional>
#include <map>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "ktu/autodiff/ndarray.hpp"

namespace ktu::ad {

class Tape;

// Handle to a node on a tape. Cheap to copy; only valid while its tape lives.
class Var {
 public:
  Var() = default;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  const NdArray& value() const;
  const Shape& shape() const { return value().shape(); }
  std::size_t id() const { return id_; }
  Tape* tape() const { return tape_; }
  bool valid() const { return tape_ != nullptr; }

 private:
  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

// Gradient buffers of a node's inputs, handed to its backward function.
// input(k) is empty when input k does not lead to any parameter.
class GradSink {
 public:
  explicit GradSink(std::vector<std::span<double>> inputs) : inputs_(std::move(inputs)) {}
  std::span<double> input(std::size_t k) const { return inputs_[k]; }
  bool wants(std::size_t k) const { return !inputs_[k].empty(); }

 private:
  std::vector<std::span<double>> inputs_;
};

using BackwardFn = std::function<void(std::span<const double> out_grad, const GradSink& sink)>;

struct TapeNode {
  const char* op = "leaf";
  std::vector<std::size_t> inputs;
  NdArray value;
  BackwardFn backward;
  bool requires_grad = false;
};

using GradientTable = std::map<std::string, NdArray>;
using ParamTable = std::map<std::string, NdArray>;

/// Dynamic reverse-mode tape. Nodes are appended in creation order, which is
/// a topological order; backward walks it exactly in reverse.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(NdArray value);
  // One node per name: registering a name twice returns the original node.
  Var parameter(const std::string& name, const NdArray& value);

  Var push(const char* op, NdArray value, std::vector<Var> inputs, BackwardFn backward);

  const TapeNode& node(std::size_t id) const { return nodes_[id]; }
  std::size_t size() const { return nodes_.size(); }

  GradientTable backward(Var loss) const;

 private:
  std::vector<TapeNode> nodes_;
  std::vector<std::pair<std::string, std::size_t>> params_;
  std::unordered_map<std::string, std::size_t> param_index_;
};

}  // namespace ktu::ad
