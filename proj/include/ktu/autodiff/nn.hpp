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

#include <optional>

#include "ktu/autodiff/ops.hpp"

namespace ktu::ad {

// Gate blocks are laid out [input | forget | candidate | output] along the
// 4*hidden axis.
struct LstmWeights {
  Var input_to_gates;   // (d_in, 4h)
  Var hidden_to_gates;  // (h, 4h)
  Var gate_bias;        // (4h)
};

struct LstmState {
  Var h;
  Var c;
};

// One LSTM cell step. x is (d_in) or (B, d_in); states match x's batch shape.
//   i, f, o = sigmoid(.), g = tanh(.), c = f*c_prev + i*g, h = o*tanh(c)
LstmState lstm_step(Var x, Var h_prev, Var c_prev, const LstmWeights& w);

struct AttentionResult {
  Var output;   // (T, d)
  Var weights;  // (T, T), row i is zero past column i
};

// Single-head causal scaled dot-product attention:
//   scores = Q K^T / sqrt(d) + bias, keys j > i masked, output = softmax(scores) V.
AttentionResult causal_attention(Var queries, Var keys, Var values,
                                 std::optional<Var> extra_score_bias = std::nullopt);

}  // namespace ktu::ad
