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

#include "ktu/autodiff/tape.hpp"

namespace ktu::ad {

const NdArray& Var::value() const { return tape_->node(id_).value; }

Var Tape::constant(NdArray value) {
  if (!all_finite(value.values())) throw NumericError("Tape: non-finite constant");
  TapeNode n;
  n.op = "constant";
  n.value = std::move(value);
  nodes_.push_back(std::move(n));
  return Var(this, nodes_.size() - 1);
}

Var Tape::parameter(const std::string& name, const NdArray& value) {
  if (auto it = param_index_.find(name); it != param_index_.end()) {
    return Var(this, it->second);
  }
  if (!all_finite(value.values())) throw NumericError("Tape: non-finite parameter " + name);
  TapeNode n;
  n.op = "parameter";
  n.value = value;
  n.requires_grad = true;
  nodes_.push_back(std::move(n));
  std::size_t id = nodes_.size() - 1;
  params_.emplace_back(name, id);
  param_index_.emplace(name, id);
  return Var(this, id);
}

Var Tape::push(const char* op, NdArray value, std::vector<Var> inputs, BackwardFn backward) {
  if (!all_finite(value.values())) {
    throw NumericError(std::string("Tape: op '") + op + "' produced a non-finite value");
  }
  TapeNode n;
  n.op = op;
  n.value = std::move(value);
  n.inputs.reserve(inputs.size());
  for (const Var& v : inputs) {
    if (v.tape() != this) throw std::invalid_argument(std::string("Tape: foreign input to ") + op);
    n.inputs.push_back(v.id());
    n.requires_grad = n.requires_grad || nodes_[v.id()].requires_grad;
  }
  if (n.requires_grad) n.backward = std::move(backward);
  nodes_.push_back(std::move(n));
  return Var(this, nodes_.size() - 1);
}

GradientTable Tape::backward(Var loss) const {
  if (loss.tape() != this) throw std::invalid_argument("Tape::backward: loss from another tape");
  const TapeNode& root = nodes_[loss.id()];
  if (root.value.size() != 1) {
    throw ShapeError("Tape::backward: loss must be scalar, got shape " +
                     shape_string(root.value.shape()));
  }

  std::vector<std::vector<double>> grads(loss.id() + 1);
  if (root.requires_grad) grads[loss.id()].assign(1, 1.0);

  for (std::size_t id = loss.id() + 1; id-- > 0;) {
    const TapeNode& n = nodes_[id];
    if (grads[id].empty() || !n.backward) continue;
    std::vector<std::span<double>> sinks;
    sinks.reserve(n.inputs.size());
    for (std::size_t in : n.inputs) {
      if (!nodes_[in].requires_grad) {
        sinks.emplace_back();
        continue;
      }
      if (grads[in].empty()) grads[in].assign(nodes_[in].value.size(), 0.0);
      sinks.emplace_back(grads[in]);
    }
    n.backward(grads[id], GradSink(std::move(sinks)));
    // Dead once propagated; parameters never reach here (no backward fn).
    std::vector<double>().swap(grads[id]);
  }

  GradientTable table;
  for (const auto& [name, id] : params_) {
    const NdArray& v = nodes_[id].value;
    if (id < grads.size() && !grads[id].empty()) {
      table.emplace(name, NdArray::unchecked(v.shape(), grads[id]));
    } else {
      table.emplace(name, NdArray::zeros(v.shape()));
    }
  }
  return table;
}

}  // namespace ktu::ad
