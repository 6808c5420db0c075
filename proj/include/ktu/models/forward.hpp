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

#include <vector>

#include "ktu/autodiff/nn.hpp"
#include "ktu/data/batching.hpp"
#include "ktu/models/params.hpp"

namespace ktu::models {

struct ForwardOptions {
  bool dropout_on = false;
  RngStream* rng = nullptr;  // required when dropout_on
  bool keep_attention = false;
};

struct ForwardOutput {
  ad::Var logits;  // (rows * steps, 4), row r * steps + t scores position t
  // With keep_attention: the last attention block's head-averaged weights,
  // one (steps, steps) matrix per batch row.
  std::vector<NdArray> attention;
};

// Position t is scored for the question answered at t. Only interactions at
// positions < t reach it; a learned start token stands in for the empty
// history at t = 0.
ForwardOutput dkt_forward(ad::Tape& tape, const ModelParams& params, const data::Batch& batch,
                          const ForwardOptions& options);
ForwardOutput sakt_forward(ad::Tape& tape, const ModelParams& params, const data::Batch& batch,
                           const ForwardOptions& options);
ForwardOutput akt_forward(ad::Tape& tape, const ModelParams& params, const data::Batch& batch,
                          const ForwardOptions& options);
// Needs text features attached to params.
ForwardOutput llmkt_forward(ad::Tape& tape, const ModelParams& params, const data::Batch& batch,
                            const ForwardOptions& options);

ForwardOutput forward(ad::Tape& tape, const ModelParams& params, const data::Batch& batch,
                      const ForwardOptions& options);

// Forward on a private tape; returns the logit values.
NdArray predict_logits(const ModelParams& params, const data::Batch& batch, bool dropout_on, RngStream& rng);

// Mean cross-entropy over non-padding positions.
ad::Var batch_loss(const ForwardOutput& out, const data::Batch& batch);

// Attention pieces, exposed for tests.

// Distance between query position t and key position tau scaled by how much
// attention mass the query puts on keys strictly between them:
//   d(t, tau) = |t - tau| * sum_{tau < s <= t} softmax_causal(scores)[t, s]
ad::Var context_distance(ad::Var scores);

// scores = Q K^T / sqrt(d); bias = -softplus(decay_raw) * context_distance(scores).
ad::AttentionResult decayed_attention(ad::Var queries, ad::Var keys, ad::Var values, ad::Var decay_raw);

}  // namespace ktu::models
