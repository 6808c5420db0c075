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
#include <cstdint>
#include <span>
#include <vector>

#include "ktu/data/batching.hpp"
#include "ktu/models/params.hpp"

namespace ktu::mc {

inline constexpr std::size_t kDefaultSamples = 30;

struct McConfig {
  std::size_t samples = kDefaultSamples;  // M
  std::uint64_t base_seed = 0;
  void validate() const;
};

struct PredictiveSample {
  std::size_t index = 0;       // m
  std::vector<double> probs;   // one entry per class
};

struct PredictiveSummary {
  std::vector<double> mean_probs;
  double total_entropy = 0.0;  // nats
  std::vector<double> class_std;
  double mean_std = 0.0;
  int predicted_class = 0;
  std::size_t samples = 0;
};

struct StdDev {
  std::vector<double> class_std;
  double mean_std = 0.0;
};

// M dropout-on forwards; sample m uses RngStream(base_seed, m). Result is
// indexed [cell][m] with cells in batch order (padding cells included).
std::vector<std::vector<PredictiveSample>> mc_predict(const models::ModelParams& params,
                                                      const data::Batch& batch, const McConfig& mc);

// Entropy in nats with 0 ln 0 = 0.
double entropy(std::span<const double> probs);

// Aggregates are independent of sample order, and M bitwise-equal samples
// aggregate back to that sample exactly.
std::vector<double> mean_probabilities(std::span<const PredictiveSample> samples);
double total_entropy(std::span<const PredictiveSample> samples);
// Population standard deviation per class (divisor M), then the class average.
StdDev prediction_stddev(std::span<const PredictiveSample> samples);
PredictiveSummary summarize(std::span<const PredictiveSample> samples);

// Index of the largest entry; ties go to the lowest index.
int argmax(std::span<const double> values);

}  // namespace ktu::mc
