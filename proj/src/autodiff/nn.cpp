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

#include "ktu/autodiff/nn.hpp"

#include <cmath>

namespace ktu::ad {

LstmState lstm_step(Var x, Var h_prev, Var c_prev, const LstmWeights& w) {
  const bool vector_input = x.value().rank() == 1;
  const std::size_t d_in = x.value().cols();
  const std::size_t batch = x.value().rows();
  const std::size_t hidden = w.hidden_to_gates.value().rows();
  const Shape& wi = w.input_to_gates.shape();
  const Shape& wh = w.hidden_to_gates.shape();
  if (wi.size() != 2 || wi[0] != d_in || wi[1] != 4 * hidden || wh.size() != 2 ||
      wh[1] != 4 * hidden || w.gate_bias.value().size() != 4 * hidden) {
    throw ShapeError("lstm_step: weights " + shape_string(wi) + ", " + shape_string(wh) +
                     " do not fit input width " + std::to_string(d_in) + " and hidden " +
                     std::to_string(hidden));
  }
  if (h_prev.value().size() != batch * hidden || c_prev.value().size() != batch * hidden ||
      h_prev.value().cols() != hidden || c_prev.value().cols() != hidden) {
    throw ShapeError("lstm_step: state shapes " + shape_string(h_prev.shape()) + ", " +
                     shape_string(c_prev.shape()) + " expected (" + std::to_string(batch) + ", " +
                     std::to_string(hidden) + ")");
  }

  Var xm = vector_input ? reshape(x, {1, d_in}) : x;
  Var hm = h_prev.value().rank() == 1 ? reshape(h_prev, {1, hidden}) : h_prev;
  Var cm = c_prev.value().rank() == 1 ? reshape(c_prev, {1, hidden}) : c_prev;

  Var z = add_rowvec(add(matmul(xm, w.input_to_gates), matmul(hm, w.hidden_to_gates)), w.gate_bias);
  Var i = sigmoid(slice_cols(z, 0, hidden));
  Var f = sigmoid(slice_cols(z, hidden, hidden));
  Var g = tanh(slice_cols(z, 2 * hidden, hidden));
  Var o = sigmoid(slice_cols(z, 3 * hidden, hidden));
  Var c = add(mul(f, cm), mul(i, g));
  Var h = mul(o, tanh(c));
  if (vector_input) return {reshape(h, {hidden}), reshape(c, {hidden})};
  return {h, c};
}

AttentionResult causal_attention(Var queries, Var keys, Var values,
                                 std::optional<Var> extra_score_bias) {
  const Shape qs = queries.shape();
  const Shape ks = keys.shape();
  const Shape vs = values.shape();
  if (qs.size() != 2 || ks.size() != 2 || vs.size() != 2 || qs != ks || vs[0] != ks[0]) {
    throw ShapeError("causal_attention: Q " + shape_string(qs) + ", K " + shape_string(ks) +
                     ", V " + shape_string(vs));
  }
  const std::size_t steps = qs[0];
  Var scores = scale(matmul_nt(queries, keys), 1.0 / std::sqrt(static_cast<double>(qs[1])));
  if (extra_score_bias) {
    const Shape bs = extra_score_bias->shape();
    if (bs.size() != 2 || bs[0] != steps || bs[1] != steps) {
      throw ShapeError("causal_attention: bias " + shape_string(bs) + " for " +
                       std::to_string(steps) + " steps");
    }
    scores = add(scores, *extra_score_bias);
  }
  Var weights = causal_softmax(scores);
  return {matmul(weights, values), weights};
}

}  // namespace ktu::ad
