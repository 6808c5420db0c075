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

#include "ktu/uncertainty/mc_dropout.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "ktu/autodiff/ops.hpp"
#include "ktu/models/forward.hpp"

namespace ktu::mc {

namespace {

// Sum with a running TwoSum error term.
double compensated_sum(std::span<const double> values) {
  double sum = 0.0, err = 0.0;
  for (double v : values) {
    const double t = sum + v;
    err += std::abs(sum) >= std::abs(v) ? (sum - t) + v : (v - t) + sum;
    sum = t;
  }
  return sum + err;
}

std::size_t class_count(std::span<const PredictiveSample> samples, const char* op) {
  if (samples.empty()) throw std::invalid_argument(std::string(op) + ": no samples");
  const std::size_t k = samples[0].probs.size();
  if (k == 0) throw std::invalid_argument(std::string(op) + ": empty distribution");
  for (const auto& s : samples) {
    if (s.probs.size() != k) throw std::invalid_argument(std::string(op) + ": samples disagree on class count");
  }
  return k;
}

std::vector<double> sorted_column(std::span<const PredictiveSample> samples, std::size_t k) {
  std::vector<double> col(samples.size());
  for (std::size_t m = 0; m < samples.size(); ++m) col[m] = samples[m].probs[k];
  std::sort(col.begin(), col.end());
  return col;
}

// Mean as smallest value plus the mean offset from it, summed in sorted order.
double column_mean(const std::vector<double>& sorted) {
  const double lo = sorted.front();
  std::vector<double> offsets(sorted.size());
  for (std::size_t i = 0; i < sorted.size(); ++i) offsets[i] = sorted[i] - lo;
  return lo + compensated_sum(offsets) / static_cast<double>(sorted.size());
}

double column_std(const std::vector<double>& sorted, double mean) {
  std::vector<double> sq(sorted.size());
  for (std::size_t i = 0; i < sorted.size(); ++i) sq[i] = (sorted[i] - mean) * (sorted[i] - mean);
  std::sort(sq.begin(), sq.end());
  return std::sqrt(compensated_sum(sq) / static_cast<double>(sorted.size()));
}

}  // namespace

void McConfig::validate() const {
  if (samples == 0) throw std::invalid_argument("McConfig: samples must be at least 1");
}

std::vector<std::vector<PredictiveSample>> mc_predict(const models::ModelParams& params,
                                                      const data::Batch& batch, const McConfig& mc) {
  mc.validate();
  const std::size_t cells = batch.rows * batch.steps;
  std::vector<std::vector<PredictiveSample>> out(cells);
  for (auto& v : out) v.reserve(mc.samples);
  for (std::size_t m = 0; m < mc.samples; ++m) {
    RngStream rng(mc.base_seed, stream_id(StreamPurpose::kMcSample, m));
    const ad::NdArray probs = ad::softmax(models::predict_logits(params, batch, true, rng), 1);
    const std::size_t k = probs.cols();
    for (std::size_t c = 0; c < cells; ++c) {
      PredictiveSample s;
      s.index = m;
      s.probs.assign(probs.data() + c * k, probs.data() + (c + 1) * k);
      out[c].push_back(std::move(s));
    }
  }
  return out;
}

double entropy(std::span<const double> probs) {
  std::vector<double> terms;
  terms.reserve(probs.size());
  for (double p : probs) {
    if (p > 0.0) terms.push_back(-p * std::log(p));
  }
  return compensated_sum(terms);
}

std::vector<double> mean_probabilities(std::span<const PredictiveSample> samples) {
  const std::size_t k = class_count(samples, "mean_probabilities");
  std::vector<double> mean(k);
  for (std::size_t c = 0; c < k; ++c) mean[c] = column_mean(sorted_column(samples, c));
  return mean;
}

double total_entropy(std::span<const PredictiveSample> samples) {
  return entropy(mean_probabilities(samples));
}

StdDev prediction_stddev(std::span<const PredictiveSample> samples) {
  const std::size_t k = class_count(samples, "prediction_stddev");
  StdDev out;
  out.class_std.resize(k);
  for (std::size_t c = 0; c < k; ++c) {
    const std::vector<double> col = sorted_column(samples, c);
    out.class_std[c] = column_std(col, column_mean(col));
  }
  out.mean_std = compensated_sum(out.class_std) / static_cast<double>(k);
  return out;
}

PredictiveSummary summarize(std::span<const PredictiveSample> samples) {
  PredictiveSummary s;
  s.mean_probs = mean_probabilities(samples);
  s.total_entropy = entropy(s.mean_probs);
  StdDev sd = prediction_stddev(samples);
  s.class_std = std::move(sd.class_std);
  s.mean_std = sd.mean_std;
  s.predicted_class = argmax(s.mean_probs);
  s.samples = samples.size();
  return s;
}

int argmax(std::span<const double> values) {
  if (values.empty()) throw std::invalid_argument("argmax: empty input");
  std::size_t best = 0;
  for (std::size_t i = 1; i < values.size(); ++i)
    if (values[i] > values[best]) best = i;
  return static_cast<int>(best);
}

}  // namespace ktu::mc
