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

#include "ktu/models/forward.hpp"

#include <cmath>
#include <stdexcept>

#include "ktu/autodiff/nn.hpp"
#include "ktu/error.hpp"

namespace ktu::models {

using ad::Var;

namespace {

constexpr std::size_t kStartOption = data::kNumOptions;

class Context {
 public:
  Context(ad::Tape& tape, const ModelParams& params, const data::Batch& batch, const ForwardOptions& options)
      : tape_(tape), params_(params), batch_(batch), options_(options), idle_rng_(0, 0) {
    if (options.dropout_on && options.rng == nullptr) {
      throw std::invalid_argument("forward: dropout_on needs an RngStream");
    }
    if (batch.rows == 0 || batch.steps == 0) throw ShapeError("forward: empty batch");
  }

  const ModelConfig& config() const { return params_.config; }
  const data::Batch& batch() const { return batch_; }
  std::size_t rows() const { return batch_.rows; }
  std::size_t steps() const { return batch_.steps; }
  std::size_t cells() const { return batch_.rows * batch_.steps; }
  ad::Tape& tape() { return tape_; }

  Var param(const std::string& name) {
    auto it = params_.table.find(name);
    if (it == params_.table.end()) throw DataError("model parameter '" + name + "' missing");
    return tape_.parameter(name, it->second);
  }

  Var linear(Var x, const std::string& name) {
    return ad::add_rowvec(ad::matmul(x, param(name)), param(name + "_bias"));
  }

  Var drop(Var x) {
    return ad::dropout(x, params_.config.dropout_rate, options_.rng ? *options_.rng : idle_rng_,
                       options_.dropout_on);
  }

  std::vector<NdArray>* attention_sink() { return options_.keep_attention ? &attention_ : nullptr; }
  std::vector<NdArray> take_attention() { return std::move(attention_); }

  // Question asked at each cell.
  std::vector<std::size_t> question_rows() const { return batch_.question_index; }

  // Interaction visible as history token t: the one answered at t - 1, or the
  // start token (row n_questions / option kStartOption) at t = 0.
  std::vector<std::size_t> history_question_rows() const {
    std::vector<std::size_t> idx(cells());
    for (std::size_t r = 0; r < rows(); ++r)
      for (std::size_t t = 0; t < steps(); ++t)
        idx[batch_.at(r, t)] = t == 0 ? config().n_questions : batch_.question_index[batch_.at(r, t - 1)];
    return idx;
  }
  std::vector<std::size_t> history_option_rows() const {
    std::vector<std::size_t> idx(cells());
    for (std::size_t r = 0; r < rows(); ++r) {
      for (std::size_t t = 0; t < steps(); ++t) {
        const int prev = t == 0 ? -1 : batch_.target[batch_.at(r, t - 1)];
        idx[batch_.at(r, t)] = prev < 0 ? kStartOption : static_cast<std::size_t>(prev);
      }
    }
    return idx;
  }
  // Row t - 1 of the same batch row, or `start_row` at t = 0.
  std::vector<std::size_t> shifted_rows(std::size_t start_row) const {
    std::vector<std::size_t> idx(cells());
    for (std::size_t r = 0; r < rows(); ++r)
      for (std::size_t t = 0; t < steps(); ++t) idx[batch_.at(r, t)] = t == 0 ? start_row : batch_.at(r, t - 1);
    return idx;
  }

 private:
  ad::Tape& tape_;
  const ModelParams& params_;
  const data::Batch& batch_;
  const ForwardOptions& options_;
  RngStream idle_rng_;
  std::vector<NdArray> attention_;
};

void require_architecture(const ModelParams& params, Architecture expected) {
  if (params.config.architecture != expected) {
    throw std::invalid_argument("forward: parameters are for " + to_string(params.config.architecture) +
                                ", not " + to_string(expected));
  }
}

// Multi-head causal attention over every batch row; inputs are (rows * steps, d).
Var multi_head_attention(Context& ctx, const std::string& block, Var query_in, Var key_in, Var value_in,
                         bool decay) {
  const ModelConfig& c = ctx.config();
  auto [query_name, key_name] = query_key_names(c, block);
  Var q = ctx.linear(query_in, query_name);
  Var k = (key_name == query_name && key_in.id() == query_in.id()) ? q : ctx.linear(key_in, key_name);
  Var v = ctx.linear(value_in, block + ".value");
  std::optional<Var> decay_raw;
  if (decay) decay_raw = ctx.param(block + ".decay");

  const std::size_t steps = ctx.steps();
  const std::size_t heads = c.num_heads;
  const std::size_t dh = c.head_dim();
  std::vector<NdArray>* sink = ctx.attention_sink();
  if (sink) sink->clear();

  std::vector<Var> per_row;
  per_row.reserve(ctx.rows());
  for (std::size_t r = 0; r < ctx.rows(); ++r) {
    Var qr = ad::slice_rows(q, r * steps, steps);
    Var kr = ad::slice_rows(k, r * steps, steps);
    Var vr = ad::slice_rows(v, r * steps, steps);
    std::vector<Var> head_out;
    std::vector<double> mean_weights(sink ? steps * steps : 0, 0.0);
    for (std::size_t h = 0; h < heads; ++h) {
      Var qh = ad::slice_cols(qr, h * dh, dh);
      Var kh = ad::slice_cols(kr, h * dh, dh);
      Var vh = ad::slice_cols(vr, h * dh, dh);
      ad::AttentionResult res = decay_raw ? decayed_attention(qh, kh, vh, ad::slice_cols(*decay_raw, h, 1))
                                          : ad::causal_attention(qh, kh, vh);
      head_out.push_back(res.output);
      if (sink) {
        const NdArray w = res.weights.value();
        for (std::size_t i = 0; i < w.size(); ++i) mean_weights[i] += w[i] / static_cast<double>(heads);
      }
    }
    per_row.push_back(heads == 1 ? head_out[0] : ad::concat_cols(head_out));
    if (sink) sink->push_back(NdArray::unchecked({steps, steps}, std::move(mean_weights)));
  }
  Var joined = per_row.size() == 1 ? per_row[0] : ad::concat_rows(per_row);
  return ctx.linear(joined, block + ".output");
}

// Attention, residual, layer norm, GELU feed-forward, residual, layer norm.
Var attention_block(Context& ctx, const std::string& block, Var query, Var key, Var value, bool decay) {
  Var attended = ctx.drop(multi_head_attention(ctx, block, query, key, value, decay));
  Var x = ad::layer_norm(ad::add(query, attended), ctx.param(block + ".norm1_gain"), ctx.param(block + ".norm1_bias"));
  Var f = ctx.linear(ad::gelu(ctx.linear(x, block + ".ffn_in")), block + ".ffn_out");
  f = ctx.drop(f);
  return ad::layer_norm(ad::add(x, f), ctx.param(block + ".norm2_gain"), ctx.param(block + ".norm2_bias"));
}

Var history_tokens(Context& ctx, const std::string& question_table, const std::string& option_table) {
  const auto hq = ctx.history_question_rows();
  const auto ho = ctx.history_option_rows();
  return ad::add(ad::gather_rows(ctx.param(question_table), hq), ad::gather_rows(ctx.param(option_table), ho));
}

std::string layer(const std::string& base, std::size_t l) { return base + std::to_string(l); }

ForwardOutput finish(Context& ctx, Var logits) {
  ForwardOutput out;
  out.logits = logits;
  out.attention = ctx.take_attention();
  return out;
}

NdArray constant_matrix(std::size_t n, double (*entry)(std::size_t, std::size_t)) {
  std::vector<double> v(n * n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) v[i * n + j] = entry(i, j);
  return NdArray::unchecked({n, n}, std::move(v));
}

}  // namespace

Var context_distance(Var scores) {
  const Shape shape = scores.shape();
  if (shape.size() != 2 || shape[0] != shape[1]) {
    throw ShapeError("context_distance: expected a square score matrix, got " + ad::shape_string(shape));
  }
  const std::size_t n = shape[0];
  ad::Tape& tape = *scores.tape();
  Var probs = ad::causal_softmax(scores);
  // (P U)[t, tau] = sum over s > tau of P[t, s]; entries past t are already zero.
  Var later = tape.constant(constant_matrix(n, [](std::size_t s, std::size_t tau) { return s > tau ? 1.0 : 0.0; }));
  Var gap = tape.constant(constant_matrix(n, [](std::size_t t, std::size_t tau) {
    return t > tau ? static_cast<double>(t - tau) : static_cast<double>(tau - t);
  }));
  return ad::mul(ad::matmul(probs, later), gap);
}

ad::AttentionResult decayed_attention(Var queries, Var keys, Var values, Var decay_raw) {
  const std::size_t dk = queries.shape().back();
  Var scores = ad::scale(ad::matmul_nt(queries, keys), 1.0 / std::sqrt(static_cast<double>(dk)));
  Var rate = ad::scale(ad::softplus(decay_raw), -1.0);
  Var bias = ad::mul_scalar(context_distance(scores), rate);
  return ad::causal_attention(queries, keys, values, bias);
}

ForwardOutput dkt_forward(ad::Tape& tape, const ModelParams& params, const data::Batch& batch,
                          const ForwardOptions& options) {
  require_architecture(params, Architecture::kDkt);
  Context ctx(tape, params, batch, options);
  const ModelConfig& c = params.config;
  const std::size_t rows = batch.rows, steps = batch.steps;

  Var tokens = history_tokens(ctx, "dkt.question_embedding", "dkt.option_embedding");
  std::vector<Var> inputs;
  inputs.reserve(steps);
  for (std::size_t t = 0; t < steps; ++t) {
    std::vector<std::size_t> idx(rows);
    for (std::size_t r = 0; r < rows; ++r) idx[r] = batch.at(r, t);
    inputs.push_back(ad::gather_rows(tokens, idx));
  }
  for (std::size_t l = 0; l < c.num_layers; ++l) {
    const std::string p = layer("dkt.lstm", l);
    ad::LstmWeights w{ctx.param(p + ".input"), ctx.param(p + ".hidden"), ctx.param(p + ".bias")};
    Var h = tape.constant(NdArray::zeros({rows, c.hidden_dim}));
    Var cell = h;
    for (std::size_t t = 0; t < steps; ++t) {
      ad::LstmState s = ad::lstm_step(inputs[t], h, cell, w);
      h = s.h;
      cell = s.c;
      inputs[t] = h;
    }
  }
  // Stack time-major states back into row-major cells.
  Var stacked = steps == 1 ? inputs[0] : ad::concat_rows(inputs);
  std::vector<std::size_t> order(rows * steps);
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t t = 0; t < steps; ++t) order[batch.at(r, t)] = t * rows + r;
  Var hidden = ctx.drop(ad::gather_rows(stacked, order));
  Var target = ad::gather_rows(ctx.param("dkt.target_embedding"), ctx.question_rows());
  Var logits = ctx.linear(ad::concat_cols(std::vector<Var>{hidden, target}), "dkt.head");
  return finish(ctx, logits);
}

ForwardOutput sakt_forward(ad::Tape& tape, const ModelParams& params, const data::Batch& batch,
                           const ForwardOptions& options) {
  require_architecture(params, Architecture::kSakt);
  Context ctx(tape, params, batch, options);
  const ModelConfig& c = params.config;
  if (batch.steps > c.max_length) {
    throw ShapeError("sakt: sequence of " + std::to_string(batch.steps) + " exceeds max_length " +
                     std::to_string(c.max_length));
  }
  std::vector<std::size_t> positions(ctx.cells());
  for (std::size_t r = 0; r < batch.rows; ++r)
    for (std::size_t t = 0; t < batch.steps; ++t) positions[batch.at(r, t)] = t;

  Var history = ad::add(history_tokens(ctx, "sakt.history_question", "sakt.option_embedding"),
                        ad::gather_rows(ctx.param("sakt.position_embedding"), positions));
  Var x = ad::gather_rows(ctx.param("sakt.question_embedding"), ctx.question_rows());
  for (std::size_t l = 0; l < c.num_layers; ++l) x = attention_block(ctx, layer("sakt.block", l), x, history, history, false);
  return finish(ctx, ctx.linear(x, "sakt.head"));
}

ForwardOutput akt_forward(ad::Tape& tape, const ModelParams& params, const data::Batch& batch,
                          const ForwardOptions& options) {
  require_architecture(params, Architecture::kAkt);
  Context ctx(tape, params, batch, options);
  const ModelConfig& c = params.config;

  Var question = ad::gather_rows(ctx.param("akt.question_embedding"), ctx.question_rows());
  Var knowledge = history_tokens(ctx, "akt.history_question", "akt.option_embedding");
  Var x = question;
  for (std::size_t l = 0; l < c.num_layers; ++l) {
    x = attention_block(ctx, layer("akt.question_encoder", l), x, x, x, true);
    knowledge = attention_block(ctx, layer("akt.knowledge_encoder", l), knowledge, knowledge, knowledge, true);
  }
  // Key for history token t is the encoding of the question answered at t - 1.
  Var keys = ad::gather_rows(ad::concat_rows(std::vector<Var>{x, ctx.param("akt.start_key")}),
                             ctx.shifted_rows(ctx.cells()));
  Var retrieved = x;
  for (std::size_t l = 0; l < c.num_layers; ++l) {
    retrieved = attention_block(ctx, layer("akt.retriever", l), retrieved, keys, knowledge, true);
  }
  Var h = ad::concat_cols(std::vector<Var>{retrieved, question});
  h = ctx.drop(ad::gelu(ctx.linear(h, "akt.out1")));
  h = ctx.drop(ad::gelu(ctx.linear(h, "akt.out2")));
  return finish(ctx, ctx.linear(h, "akt.out3"));
}

ForwardOutput llmkt_forward(ad::Tape& tape, const ModelParams& params, const data::Batch& batch,
                            const ForwardOptions& options) {
  require_architecture(params, Architecture::kLlmkt);
  Context ctx(tape, params, batch, options);
  const ModelConfig& c = params.config;
  const std::size_t width = c.text_fields.size() * c.llm_truncation_dim;
  if (params.text_features.rank() != 2 || params.text_features.rows() != c.n_questions ||
      params.text_features.cols() != width) {
    throw DataError("llmkt: text features missing or not (" + std::to_string(c.n_questions) + ", " +
                    std::to_string(width) + ")");
  }
  // Project each bank question once, then look rows up.
  Var projected = ctx.linear(tape.constant(params.text_features), "llmkt.text_projection");
  Var with_start = ad::concat_rows(std::vector<Var>{projected, ctx.param("llmkt.start_text")});
  Var questions = ad::gather_rows(projected, ctx.question_rows());
  Var responses = ad::add(ad::gather_rows(with_start, ctx.history_question_rows()),
                          ad::gather_rows(ctx.param("llmkt.option_embedding"), ctx.history_option_rows()));
  for (std::size_t l = 0; l < c.num_layers; ++l) {
    questions = attention_block(ctx, layer("llmkt.question_encoder", l), questions, questions, questions, false);
    responses = attention_block(ctx, layer("llmkt.response_encoder", l), responses, responses, responses, false);
  }
  Var x = questions;
  for (std::size_t l = 0; l < c.num_layers; ++l) {
    x = attention_block(ctx, layer("llmkt.cross", l), x, responses, responses, false);
  }
  return finish(ctx, ctx.linear(x, "llmkt.head"));
}

ForwardOutput forward(ad::Tape& tape, const ModelParams& params, const data::Batch& batch,
                      const ForwardOptions& options) {
  switch (params.config.architecture) {
    case Architecture::kDkt: return dkt_forward(tape, params, batch, options);
    case Architecture::kSakt: return sakt_forward(tape, params, batch, options);
    case Architecture::kAkt: return akt_forward(tape, params, batch, options);
    case Architecture::kLlmkt: return llmkt_forward(tape, params, batch, options);
  }
  throw std::invalid_argument("forward: unknown architecture tag " +
                              std::to_string(static_cast<int>(params.config.architecture)));
}

NdArray predict_logits(const ModelParams& params, const data::Batch& batch, bool dropout_on, RngStream& rng) {
  ad::Tape tape;
  ForwardOptions options;
  options.dropout_on = dropout_on;
  options.rng = &rng;
  return forward(tape, params, batch, options).logits.value();
}

Var batch_loss(const ForwardOutput& out, const data::Batch& batch) {
  return ad::cross_entropy(ad::softmax(out.logits, 1), batch.target);
}

}  // namespace ktu::models
