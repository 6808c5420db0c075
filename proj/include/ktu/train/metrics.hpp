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
#include <string>
#include <vector>

namespace ktu::train {

using ConfusionMatrix = std::vector<std::vector<std::size_t>>;  // [truth][predicted]

struct MetricsReport {
  std::size_t classes = 0;
  double accuracy = 0.0;
  double macro_f1 = 0.0;
  // Mean over classes that occur both as positives and negatives; 0.5 when
  // no class qualifies.
  double macro_ovr_auc = 0.0;
  std::vector<double> precision;
  std::vector<double> recall;
  std::vector<double> f1;
  std::vector<double> class_auc;  // NaN where undefined
  ConfusionMatrix confusion;
  std::size_t n_predictions = 0;
};

ConfusionMatrix confusion_matrix(std::span<const int> truth, std::span<const int> predicted, std::size_t classes);

// Per-class F1 with 0 for classes that never occur; unweighted mean.
double macro_f1(const ConfusionMatrix& confusion);

// Rank-based one-vs-rest AUC (tied scores share their average rank). NaN when
// the class has no positives or no negatives.
double one_vs_rest_auc(std::span<const double> scores, std::span<const int> truth, int positive_class);

// scores holds `classes` values per prediction, row-major.
MetricsReport compute_metrics(std::span<const int> truth, std::span<const int> predicted,
                              std::span<const double> scores, std::size_t classes);

std::string metrics_to_json(const MetricsReport& report);

}  // namespace ktu::train
