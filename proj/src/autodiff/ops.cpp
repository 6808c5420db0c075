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

#include "ktu/autodiff/ops.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

namespace ktu::ad {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMat>;
using MutMap = Eigen::Map<RowMat>;

Tape& tape_of(Var a) {
  if (!a.valid()) throw std::invalid_argument("ad: op on an empty Var");
  return *a.tape();
}

Tape& tape_of(Var a, Var b) {
  if (a.tape() != b.tape()) throw std::invalid_argument("ad: operands live on different tapes");
  return tape_of(a);
}

void require_same_shape(const char* op, const NdArray& a, const NdArray& b) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_string(a.shape()) + " vs " +
                     shape_string(b.shape()));
  }
}

void require_matrix(const char* op, const NdArray& a) {
  if (a.rank() != 2) {
    throw ShapeError(std::string(op) + ": expected a matrix, got shape " + shape_string(a.shape()));
  }
}

template <typename Fwd, typename Deriv>
Var unary(const char* op, Var a, Fwd fwd, Deriv deriv) {
  const NdArray x = a.value();
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = fwd(x[i]);
  NdArray y = NdArray::unchecked(x.shape(), std::move(out));
  return tape_of(a).push(op, y, {a}, [x, y, deriv](std::span<const double> g, const GradSink& s) {
    auto ga = s.input(0);
    for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g[i] * deriv(x[i], y[i]);
  });
}

double stable_sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  double e = std::exp(x);
  return e / (1.0 + e);
}

struct AxisLayout {
  std::size_t outer = 1, len = 1, inner = 1;
};

AxisLayout axis_layout(const Shape& shape, std::size_t axis) {
  if (axis >= shape.size()) {
    throw ShapeError("softmax: axis " + std::to_string(axis) + " invalid for shape " +
                     shape_string(shape));
  }
  AxisLayout l;
  for (std::size_t i = 0; i < axis; ++i) l.outer *= shape[i];
  l.len = shape[axis];
  for (std::size_t i = axis + 1; i < shape.size(); ++i) l.inner *= shape[i];
  if (l.len == 0) throw ShapeError("softmax: empty axis");
  return l;
}

std::vector<double> softmax_values(const NdArray& x, const AxisLayout& l) {
  std::vector<double> y(x.size());
  for (std::size_t o = 0; o < l.outer; ++o) {
    for (std::size_t in = 0; in < l.inner; ++in) {
      std::size_t base = o * l.len * l.inner + in;
      double mx = x[base];
      for (std::size_t j = 1; j < l.len; ++j) mx = std::max(mx, x[base + j * l.inner]);
      double z = 0.0;
      for (std::size_t j = 0; j < l.len; ++j) {
        double e = std::exp(x[base + j * l.inner] - mx);
        y[base + j * l.inner] = e;
        z += e;
      }
      for (std::size_t j = 0; j < l.len; ++j) y[base + j * l.inner] /= z;
    }
  }
  return y;
}

void check_rate(double rate) {
  if (!(rate >= 0.0) || rate >= 1.0) {
    throw std::invalid_argument("dropout: rate must be in [0, 1), got " + std::to_string(rate));
  }
}

std::vector<double> dropout_mask(std::size_t n, double rate, RngStream& rng) {
  std::vector<double> mask(n);
  const double keep_scale = 1.0 / (1.0 - rate);
  for (double& m : mask) m = rng.uniform() < rate ? 0.0 : keep_scale;
  return mask;
}

}  // namespace

// ---- value-level kernels ----

NdArray softmax(const NdArray& logits, std::size_t axis) {
  if (!all_finite(logits.values())) throw NumericError("softmax: non-finite input");
  return NdArray::unchecked(logits.shape(), softmax_values(logits, axis_layout(logits.shape(), axis)));
}

double cross_entropy(const NdArray& probabilities, int target) {
  if (target < 0 || static_cast<std::size_t>(target) >= probabilities.size()) {
    throw std::out_of_range("cross_entropy: target " + std::to_string(target) + " outside 0.." +
                            std::to_string(probabilities.size() - 1));
  }
  return -std::log(std::max(probabilities[static_cast<std::size_t>(target)], kLogEpsilon));
}

NdArray dropout(const NdArray& x, double rate, RngStream& rng, bool active) {
  check_rate(rate);
  if (!active || rate == 0.0) return x;
  std::vector<double> mask = dropout_mask(x.size(), rate, rng);
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] * mask[i];
  return NdArray::unchecked(x.shape(), std::move(out));
}

// ---- elementwise ----

Var add(Var a, Var b) {
  Tape& t = tape_of(a, b);
  require_same_shape("add", a.value(), b.value());
  const NdArray& x = a.value();
  const NdArray& y = b.value();
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] + y[i];
  return t.push("add", NdArray::unchecked(x.shape(), std::move(out)), {a, b},
                [](std::span<const double> g, const GradSink& s) {
                  for (std::size_t k = 0; k < 2; ++k) {
                    auto gi = s.input(k);
                    for (std::size_t i = 0; i < gi.size(); ++i) gi[i] += g[i];
                  }
                });
}

Var sub(Var a, Var b) {
  Tape& t = tape_of(a, b);
  require_same_shape("sub", a.value(), b.value());
  const NdArray& x = a.value();
  const NdArray& y = b.value();
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] - y[i];
  return t.push("sub", NdArray::unchecked(x.shape(), std::move(out)), {a, b},
                [](std::span<const double> g, const GradSink& s) {
                  auto ga = s.input(0);
                  for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g[i];
                  auto gb = s.input(1);
                  for (std::size_t i = 0; i < gb.size(); ++i) gb[i] -= g[i];
                });
}

Var mul(Var a, Var b) {
  Tape& t = tape_of(a, b);
  require_same_shape("mul", a.value(), b.value());
  const NdArray x = a.value();
  const NdArray y = b.value();
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] * y[i];
  return t.push("mul", NdArray::unchecked(x.shape(), std::move(out)), {a, b},
                [x, y](std::span<const double> g, const GradSink& s) {
                  auto ga = s.input(0);
                  for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g[i] * y[i];
                  auto gb = s.input(1);
                  for (std::size_t i = 0; i < gb.size(); ++i) gb[i] += g[i] * x[i];
                });
}

Var scale(Var a, double factor) {
  return unary(
      "scale", a, [factor](double x) { return factor * x; },
      [factor](double, double) { return factor; });
}

Var add_rowvec(Var a, Var bias) {
  Tape& t = tape_of(a, bias);
  const NdArray& x = a.value();
  const NdArray& b = bias.value();
  std::size_t m = x.rows(), n = x.cols();
  if (b.size() != n) {
    throw ShapeError("add_rowvec: bias " + shape_string(b.shape()) + " vs matrix " +
                     shape_string(x.shape()));
  }
  std::vector<double> out(x.size());
  for (std::size_t r = 0; r < m; ++r)
    for (std::size_t c = 0; c < n; ++c) out[r * n + c] = x[r * n + c] + b[c];
  return t.push("add_rowvec", NdArray::unchecked(x.shape(), std::move(out)), {a, bias},
                [m, n](std::span<const double> g, const GradSink& s) {
                  auto ga = s.input(0);
                  for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g[i];
                  auto gb = s.input(1);
                  if (!gb.empty()) {
                    for (std::size_t r = 0; r < m; ++r)
                      for (std::size_t c = 0; c < n; ++c) gb[c] += g[r * n + c];
                  }
                });
}

Var mul_scalar(Var a, Var sv) {
  Tape& t = tape_of(a, sv);
  if (sv.value().size() != 1) throw ShapeError("mul_scalar: factor must have one element");
  const NdArray x = a.value();
  const double f = sv.value()[0];
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] * f;
  return t.push("mul_scalar", NdArray::unchecked(x.shape(), std::move(out)), {a, sv},
                [x, f](std::span<const double> g, const GradSink& s) {
                  auto ga = s.input(0);
                  for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g[i] * f;
                  auto gs = s.input(1);
                  if (!gs.empty()) {
                    double acc = 0.0;
                    for (std::size_t i = 0; i < x.size(); ++i) acc += g[i] * x[i];
                    gs[0] += acc;
                  }
                });
}

// ---- matrix products ----

Var matmul(Var a, Var b) {
  Tape& t = tape_of(a, b);
  const NdArray A = a.value();
  const NdArray B = b.value();
  if (A.rank() > 2 || B.rank() != 2) {
    throw ShapeError("matmul: unsupported shapes " + shape_string(A.shape()) + " x " +
                     shape_string(B.shape()));
  }
  const std::size_t m = A.rows(), k = A.cols(), n = B.cols();
  if (B.rows() != k) {
    throw ShapeError("matmul: inner dimensions differ " + shape_string(A.shape()) + " x " +
                     shape_string(B.shape()));
  }
  std::vector<double> out(m * n);
  MutMap(out.data(), m, n).noalias() = ConstMap(A.data(), m, k) * ConstMap(B.data(), k, n);
  return t.push("matmul", NdArray::unchecked({m, n}, std::move(out)), {a, b},
                [A, B, m, k, n](std::span<const double> g, const GradSink& s) {
                  ConstMap G(g.data(), m, n);
                  if (s.wants(0)) {
                    MutMap(s.input(0).data(), m, k).noalias() += G * ConstMap(B.data(), k, n).transpose();
                  }
                  if (s.wants(1)) {
                    MutMap(s.input(1).data(), k, n).noalias() += ConstMap(A.data(), m, k).transpose() * G;
                  }
                });
}

Var matmul_nt(Var a, Var b) {
  Tape& t = tape_of(a, b);
  const NdArray A = a.value();
  const NdArray B = b.value();
  require_matrix("matmul_nt", A);
  require_matrix("matmul_nt", B);
  const std::size_t m = A.rows(), k = A.cols(), n = B.rows();
  if (B.cols() != k) {
    throw ShapeError("matmul_nt: inner dimensions differ " + shape_string(A.shape()) + " x " +
                     shape_string(B.shape()) + "^T");
  }
  std::vector<double> out(m * n);
  MutMap(out.data(), m, n).noalias() =
      ConstMap(A.data(), m, k) * ConstMap(B.data(), n, k).transpose();
  return t.push("matmul_nt", NdArray::unchecked({m, n}, std::move(out)), {a, b},
                [A, B, m, k, n](std::span<const double> g, const GradSink& s) {
                  ConstMap G(g.data(), m, n);
                  if (s.wants(0)) {
                    MutMap(s.input(0).data(), m, k).noalias() += G * ConstMap(B.data(), n, k);
                  }
                  if (s.wants(1)) {
                    MutMap(s.input(1).data(), n, k).noalias() += G.transpose() * ConstMap(A.data(), m, k);
                  }
                });
}

// ---- pointwise nonlinearities ----

Var sigmoid(Var a) {
  return unary("sigmoid", a, stable_sigmoid, [](double, double y) { return y * (1.0 - y); });
}

Var tanh(Var a) {
  return unary(
      "tanh", a, [](double x) { return std::tanh(x); }, [](double, double y) { return 1.0 - y * y; });
}

Var gelu(Var a) {
  return unary(
      "gelu", a, [](double x) { return 0.5 * x * (1.0 + std::erf(x * std::numbers::sqrt2 / 2.0)); },
      [](double x, double) {
        double cdf = 0.5 * (1.0 + std::erf(x * std::numbers::sqrt2 / 2.0));
        double pdf = std::exp(-0.5 * x * x) * std::numbers::inv_sqrtpi / std::numbers::sqrt2;
        return cdf + x * pdf;
      });
}

Var softplus(Var a) {
  return unary(
      "softplus", a, [](double x) { return std::log1p(std::exp(-std::abs(x))) + std::max(x, 0.0); },
      [](double x, double) { return stable_sigmoid(x); });
}

Var exp(Var a) {
  return unary(
      "exp", a, [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}

Var log(Var a) {
  return unary(
      "log", a, [](double x) { return std::log(std::max(x, kLogEpsilon)); },
      [](double x, double) { return x > kLogEpsilon ? 1.0 / x : 0.0; });
}

Var square(Var a) {
  return unary(
      "square", a, [](double x) { return x * x; }, [](double x, double) { return 2.0 * x; });
}

// ---- reductions ----

Var sum(Var a) {
  double acc = 0.0;
  for (double v : a.value().values()) acc += v;
  return tape_of(a).push("sum", NdArray::unchecked({1}, {acc}), {a},
                         [](std::span<const double> g, const GradSink& s) {
                           auto ga = s.input(0);
                           for (double& v : ga) v += g[0];
                         });
}

Var mean(Var a) { return scale(sum(a), 1.0 / static_cast<double>(a.value().size())); }

// ---- softmax family ----

Var softmax(Var logits, std::size_t axis) {
  const NdArray& x = logits.value();
  const AxisLayout l = axis_layout(x.shape(), axis);
  NdArray y = NdArray::unchecked(x.shape(), softmax_values(x, l));
  return tape_of(logits).push(
      "softmax", y, {logits}, [y, l](std::span<const double> g, const GradSink& s) {
        auto gx = s.input(0);
        for (std::size_t o = 0; o < l.outer; ++o) {
          for (std::size_t in = 0; in < l.inner; ++in) {
            std::size_t base = o * l.len * l.inner + in;
            double dot = 0.0;
            for (std::size_t j = 0; j < l.len; ++j) {
              std::size_t idx = base + j * l.inner;
              dot += g[idx] * y[idx];
            }
            for (std::size_t j = 0; j < l.len; ++j) {
              std::size_t idx = base + j * l.inner;
              gx[idx] += y[idx] * (g[idx] - dot);
            }
          }
        }
      });
}

Var causal_softmax(Var scores) {
  const NdArray& x = scores.value();
  require_matrix("causal_softmax", x);
  const std::size_t rows = x.rows(), cols = x.cols();
  std::vector<double> out(x.size(), 0.0);
  for (std::size_t i = 0; i < rows; ++i) {
    const std::size_t visible = std::min(i + 1, cols);
    const double* row = x.data() + i * cols;
    double mx = row[0];
    for (std::size_t j = 1; j < visible; ++j) mx = std::max(mx, row[j]);
    double z = 0.0;
    for (std::size_t j = 0; j < visible; ++j) {
      out[i * cols + j] = std::exp(row[j] - mx);
      z += out[i * cols + j];
    }
    for (std::size_t j = 0; j < visible; ++j) out[i * cols + j] /= z;
  }
  NdArray y = NdArray::unchecked(x.shape(), std::move(out));
  return tape_of(scores).push(
      "causal_softmax", y, {scores},
      [y, rows, cols](std::span<const double> g, const GradSink& s) {
        auto gx = s.input(0);
        for (std::size_t i = 0; i < rows; ++i) {
          const std::size_t visible = std::min(i + 1, cols);
          double dot = 0.0;
          for (std::size_t j = 0; j < visible; ++j) dot += g[i * cols + j] * y[i * cols + j];
          for (std::size_t j = 0; j < visible; ++j) {
            gx[i * cols + j] += y[i * cols + j] * (g[i * cols + j] - dot);
          }
        }
      });
}

Var cross_entropy(Var probabilities, std::span<const int> targets) {
  const NdArray p = probabilities.value();
  require_matrix("cross_entropy", p);
  const std::size_t n = p.rows(), k = p.cols();
  if (targets.size() != n) {
    throw ShapeError("cross_entropy: " + std::to_string(targets.size()) + " targets for " +
                     std::to_string(n) + " rows");
  }
  std::vector<int> tgt(targets.begin(), targets.end());
  std::size_t counted = 0;
  double total = 0.0;
  for (std::size_t r = 0; r < n; ++r) {
    if (tgt[r] < 0) continue;
    if (static_cast<std::size_t>(tgt[r]) >= k) {
      throw std::out_of_range("cross_entropy: target " + std::to_string(tgt[r]) + " outside 0.." +
                              std::to_string(k - 1));
    }
    total += -std::log(std::max(p.at(r, static_cast<std::size_t>(tgt[r])), kLogEpsilon));
    ++counted;
  }
  if (counted == 0) throw std::invalid_argument("cross_entropy: no non-padding targets");
  const double inv = 1.0 / static_cast<double>(counted);
  return tape_of(probabilities)
      .push("cross_entropy", NdArray::unchecked({1}, {total * inv}), {probabilities},
            [p, tgt = std::move(tgt), k, inv](std::span<const double> g, const GradSink& s) {
              auto gp = s.input(0);
              for (std::size_t r = 0; r < tgt.size(); ++r) {
                if (tgt[r] < 0) continue;
                std::size_t idx = r * k + static_cast<std::size_t>(tgt[r]);
                if (p[idx] > kLogEpsilon) gp[idx] += -g[0] * inv / p[idx];
              }
            });
}

Var dropout(Var x, double rate, RngStream& rng, bool active) {
  check_rate(rate);
  if (!active || rate == 0.0) return x;
  const NdArray& in = x.value();
  std::vector<double> mask = dropout_mask(in.size(), rate, rng);
  std::vector<double> out(in.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = in[i] * mask[i];
  return tape_of(x).push("dropout", NdArray::unchecked(in.shape(), std::move(out)), {x},
                         [mask = std::move(mask)](std::span<const double> g, const GradSink& s) {
                           auto gx = s.input(0);
                           for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += g[i] * mask[i];
                         });
}

// ---- indexing and layout ----

Var gather_rows(Var table, std::span<const std::size_t> rows) {
  const NdArray& tv = table.value();
  require_matrix("gather_rows", tv);
  const std::size_t n = tv.rows(), d = tv.cols();
  std::vector<std::size_t> idx(rows.begin(), rows.end());
  if (idx.empty()) throw ShapeError("gather_rows: no rows requested");
  std::vector<double> out(idx.size() * d);
  for (std::size_t r = 0; r < idx.size(); ++r) {
    if (idx[r] >= n) {
      throw std::out_of_range("gather_rows: row " + std::to_string(idx[r]) + " of " +
                              std::to_string(n));
    }
    std::copy_n(tv.data() + idx[r] * d, d, out.begin() + static_cast<std::ptrdiff_t>(r * d));
  }
  const std::size_t count = idx.size();
  return tape_of(table).push("gather_rows", NdArray::unchecked({count, d}, std::move(out)),
                             {table},
                             [idx = std::move(idx), d](std::span<const double> g, const GradSink& s) {
                               auto gt = s.input(0);
                               for (std::size_t r = 0; r < idx.size(); ++r)
                                 for (std::size_t c = 0; c < d; ++c) gt[idx[r] * d + c] += g[r * d + c];
                             });
}

Var slice_rows(Var a, std::size_t begin, std::size_t count) {
  const NdArray& x = a.value();
  require_matrix("slice_rows", x);
  const std::size_t d = x.cols();
  if (count == 0 || begin + count > x.rows()) {
    throw ShapeError("slice_rows: [" + std::to_string(begin) + ", +" + std::to_string(count) +
                     ") outside " + shape_string(x.shape()));
  }
  std::vector<double> out(x.data() + begin * d, x.data() + (begin + count) * d);
  return tape_of(a).push("slice_rows", NdArray::unchecked({count, d}, std::move(out)), {a},
                         [begin, d](std::span<const double> g, const GradSink& s) {
                           auto ga = s.input(0);
                           for (std::size_t i = 0; i < g.size(); ++i) ga[begin * d + i] += g[i];
                         });
}

Var slice_cols(Var a, std::size_t begin, std::size_t count) {
  const NdArray& x = a.value();
  require_matrix("slice_cols", x);
  const std::size_t m = x.rows(), n = x.cols();
  if (count == 0 || begin + count > n) {
    throw ShapeError("slice_cols: [" + std::to_string(begin) + ", +" + std::to_string(count) +
                     ") outside " + shape_string(x.shape()));
  }
  std::vector<double> out(m * count);
  for (std::size_t r = 0; r < m; ++r)
    std::copy_n(x.data() + r * n + begin, count, out.begin() + static_cast<std::ptrdiff_t>(r * count));
  return tape_of(a).push("slice_cols", NdArray::unchecked({m, count}, std::move(out)), {a},
                         [m, n, begin, count](std::span<const double> g, const GradSink& s) {
                           auto ga = s.input(0);
                           for (std::size_t r = 0; r < m; ++r)
                             for (std::size_t c = 0; c < count; ++c)
                               ga[r * n + begin + c] += g[r * count + c];
                         });
}

Var concat_rows(std::span<const Var> parts) {
  if (parts.empty()) throw ShapeError("concat_rows: nothing to concatenate");
  Tape& t = tape_of(parts[0]);
  const std::size_t d = parts[0].value().cols();
  std::vector<std::size_t> offsets;
  std::vector<double> out;
  for (const Var& p : parts) {
    tape_of(parts[0], p);
    const NdArray& v = p.value();
    if (v.cols() != d) throw ShapeError("concat_rows: column counts differ");
    offsets.push_back(out.size());
    out.insert(out.end(), v.values().begin(), v.values().end());
  }
  const std::size_t rows = out.size() / d;
  offsets.push_back(out.size());
  return t.push("concat_rows", NdArray::unchecked({rows, d}, std::move(out)),
                std::vector<Var>(parts.begin(), parts.end()),
                [offsets = std::move(offsets)](std::span<const double> g, const GradSink& s) {
                  for (std::size_t k = 0; k + 1 < offsets.size(); ++k) {
                    auto gk = s.input(k);
                    for (std::size_t i = 0; i < gk.size(); ++i) gk[i] += g[offsets[k] + i];
                  }
                });
}

Var concat_cols(std::span<const Var> parts) {
  if (parts.empty()) throw ShapeError("concat_cols: nothing to concatenate");
  Tape& t = tape_of(parts[0]);
  const std::size_t m = parts[0].value().rows();
  std::vector<std::size_t> widths;
  std::size_t total = 0;
  for (const Var& p : parts) {
    tape_of(parts[0], p);
    if (p.value().rows() != m) throw ShapeError("concat_cols: row counts differ");
    widths.push_back(p.value().cols());
    total += widths.back();
  }
  std::vector<double> out(m * total);
  std::size_t col = 0;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const NdArray& v = parts[k].value();
    for (std::size_t r = 0; r < m; ++r)
      std::copy_n(v.data() + r * widths[k], widths[k],
                  out.begin() + static_cast<std::ptrdiff_t>(r * total + col));
    col += widths[k];
  }
  return t.push("concat_cols", NdArray::unchecked({m, total}, std::move(out)),
                std::vector<Var>(parts.begin(), parts.end()),
                [widths = std::move(widths), m, total](std::span<const double> g, const GradSink& s) {
                  std::size_t col = 0;
                  for (std::size_t k = 0; k < widths.size(); ++k) {
                    auto gk = s.input(k);
                    if (!gk.empty()) {
                      for (std::size_t r = 0; r < m; ++r)
                        for (std::size_t c = 0; c < widths[k]; ++c)
                          gk[r * widths[k] + c] += g[r * total + col + c];
                    }
                    col += widths[k];
                  }
                });
}

Var reshape(Var a, Shape shape) {
  NdArray y = a.value().reshaped(std::move(shape));
  return tape_of(a).push("reshape", y, {a}, [](std::span<const double> g, const GradSink& s) {
    auto ga = s.input(0);
    for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g[i];
  });
}

Var layer_norm(Var x, Var gain, Var bias) {
  Tape& t = tape_of(x, gain);
  tape_of(x, bias);
  const NdArray& in = x.value();
  require_matrix("layer_norm", in);
  const std::size_t m = in.rows(), n = in.cols();
  if (gain.value().size() != n || bias.value().size() != n) {
    throw ShapeError("layer_norm: gain/bias must have " + std::to_string(n) + " entries");
  }
  std::vector<double> xhat(in.size()), inv_std(m), out(in.size());
  const NdArray g = gain.value();
  const NdArray& b = bias.value();
  for (std::size_t r = 0; r < m; ++r) {
    const double* row = in.data() + r * n;
    double mu = 0.0;
    for (std::size_t c = 0; c < n; ++c) mu += row[c];
    mu /= static_cast<double>(n);
    double var = 0.0;
    for (std::size_t c = 0; c < n; ++c) var += (row[c] - mu) * (row[c] - mu);
    var /= static_cast<double>(n);
    inv_std[r] = 1.0 / std::sqrt(var + kLayerNormEpsilon);
    for (std::size_t c = 0; c < n; ++c) {
      xhat[r * n + c] = (row[c] - mu) * inv_std[r];
      out[r * n + c] = xhat[r * n + c] * g[c] + b[c];
    }
  }
  return t.push("layer_norm", NdArray::unchecked(in.shape(), std::move(out)), {x, gain, bias},
                [xhat = std::move(xhat), inv_std = std::move(inv_std), g, m, n](
                    std::span<const double> go, const GradSink& s) {
                  auto gx = s.input(0);
                  auto gg = s.input(1);
                  auto gb = s.input(2);
                  std::vector<double> dxhat(n);
                  for (std::size_t r = 0; r < m; ++r) {
                    double sum_d = 0.0, sum_dx = 0.0;
                    for (std::size_t c = 0; c < n; ++c) {
                      const std::size_t i = r * n + c;
                      if (!gg.empty()) gg[c] += go[i] * xhat[i];
                      if (!gb.empty()) gb[c] += go[i];
                      dxhat[c] = go[i] * g[c];
                      sum_d += dxhat[c];
                      sum_dx += dxhat[c] * xhat[i];
                    }
                    if (gx.empty()) continue;
                    const double nn = static_cast<double>(n);
                    for (std::size_t c = 0; c < n; ++c) {
                      const std::size_t i = r * n + c;
                      gx[i] += inv_std[r] / nn * (nn * dxhat[c] - sum_d - xhat[i] * sum_dx);
                    }
                  }
                });
}

}  // namespace ktu::ad
