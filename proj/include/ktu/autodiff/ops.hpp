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
#include <span>
#include <vector>

#include "ktu/autodiff/ndarray.hpp"
#include "ktu/autodiff/rng.hpp"
#include "ktu/autodiff/tape.hpp"

namespace ktu::ad {

// Clamp applied before every log (and inside sqrt of variances).
inline constexpr double kLogEpsilon = 1e-12;
inline constexpr double kLayerNormEpsilon = 1e-5;

// ---- value-level kernels (no tape) ----

NdArray softmax(const NdArray& logits, std::size_t axis);
// -log(max(p[target], 1e-12)); probabilities is a single K-vector.
double cross_entropy(const NdArray& probabilities, int target);
NdArray dropout(const NdArray& x, double rate, RngStream& rng, bool active);

// ---- differentiable ops ----

Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var a, double s);
// a: (m, n) plus bias: (n), broadcast over rows.
Var add_rowvec(Var a, Var bias);
// a times a one-element Var.
Var mul_scalar(Var a, Var s);

// Rank-1 operands act as a single row.
Var matmul(Var a, Var b);
// a * b^T with a: (m, k), b: (n, k).
Var matmul_nt(Var a, Var b);

Var sigmoid(Var a);
Var tanh(Var a);
Var gelu(Var a);
Var softplus(Var a);
Var exp(Var a);
Var log(Var a);  // clamped at kLogEpsilon
Var square(Var a);

Var sum(Var a);
Var mean(Var a);

Var softmax(Var logits, std::size_t axis);
// Row softmax over a (T, T) score matrix with entries j > i excluded;
// excluded entries come out as exactly 0.
Var causal_softmax(Var scores);

// Mean over rows of -log(max(p[row, target[row]], 1e-12)). Rows with a
// negative target are padding and ignored.
Var cross_entropy(Var probabilities, std::span<const int> targets);

// Inverted dropout. Identity (same node) when inactive or rate == 0.
Var dropout(Var x, double rate, RngStream& rng, bool active);

Var gather_rows(Var table, std::span<const std::size_t> rows);
Var slice_rows(Var a, std::size_t begin, std::size_t count);
Var slice_cols(Var a, std::size_t begin, std::size_t count);
Var concat_rows(std::span<const Var> parts);
Var concat_cols(std::span<const Var> parts);
Var reshape(Var a, Shape shape);

// Normalizes each row, then applies per-column gain and bias.
Var layer_norm(Var x, Var gain, Var bias);

}  // namespace ktu::ad
