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

#include "ktu/train/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "json.hpp"

namespace ktu::train {

ConfusionMatrix confusion_matrix(std::span<const int> truth, std::span<const int> predicted, std::size_t classes) {
  if (truth.size() != predicted.size()) throw std::invalid_argument("confusion_matrix: length mismatch");
  ConfusionMatrix m(classes, std::vector<std::size_t>(classes, 0));
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (truth[i] < 0 || predicted[i] < 0 || static_cast<std::size_t>(truth[i]) >= classes ||
        static_cast<std::size_t>(predicted[i]) >= classes) {
      throw std::out_of_range("confusion_matrix: label outside 0.." + std::to_string(classes - 1));
    }
    ++m[static_cast<std::size_t>(truth[i])][static_cast<std::size_t>(predicted[i])];
  }
  return m;
}

namespace {

struct ClassCounts {
  double tp = 0, fp = 0, fn = 0;
};

ClassCounts counts(const ConfusionMatrix& m, std::size_t k) {
  ClassCounts c;
  for (std::size_t j = 0; j < m.size(); ++j) {
    if (j == k) continue;
    c.fp += static_cast<double>(m[j][k]);
    c.fn += static_cast<double>(m[k][j]);
  }
  c.tp = static_cast<double>(m[k][k]);
  return c;
}

double f1_of(const ClassCounts& c) {
  const double denom = 2 * c.tp + c.fp + c.fn;
  return denom > 0 ? 2 * c.tp / denom : 0.0;
}

}  // namespace

double macro_f1(const ConfusionMatrix& m) {
  if (m.empty()) throw std::invalid_argument("macro_f1: empty confusion matrix");
  double sum = 0;
  for (std::size_t k = 0; k < m.size(); ++k) sum += f1_of(counts(m, k));
  return sum / static_cast<double>(m.size());
}

double one_vs_rest_auc(std::span<const double> scores, std::span<const int> truth, int positive_class) {
  if (scores.size() != truth.size()) throw std::invalid_argument("one_vs_rest_auc: length mismatch");
  const std::size_t n = scores.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  double positive_rank_sum = 0, positives = 0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j + 1 < n && scores[order[j + 1]] == scores[order[i]]) ++j;
    const double rank = (static_cast<double>(i + j) + 2.0) / 2.0;  // 1-based average rank
    for (std::size_t k = i; k <= j; ++k) {
      if (truth[order[k]] == positive_class) {
        positive_rank_sum += rank;
        positives += 1;
      }
    }
    i = j + 1;
  }
  const double negatives = static_cast<double>(n) - positives;
  if (positives == 0 || negatives == 0) return std::numeric_limits<double>::quiet_NaN();
  return (positive_rank_sum - positives * (positives + 1) / 2) / (positives * negatives);
}

MetricsReport compute_metrics(std::span<const int> truth, std::span<const int> predicted,
                              std::span<const double> scores, std::size_t classes) {
  if (truth.empty()) throw std::invalid_argument("compute_metrics: no predictions");
  if (classes == 0) throw std::invalid_argument("compute_metrics: no classes");
  if (scores.size() != truth.size() * classes) throw std::invalid_argument("compute_metrics: score shape mismatch");
  MetricsReport r;
  r.classes = classes;
  r.n_predictions = truth.size();
  r.confusion = confusion_matrix(truth, predicted, classes);
  std::size_t correct = 0;
  for (std::size_t k = 0; k < classes; ++k) correct += r.confusion[k][k];
  r.accuracy = static_cast<double>(correct) / static_cast<double>(r.n_predictions);

  std::vector<double> column(truth.size());
  double auc_sum = 0;
  std::size_t auc_count = 0;
  for (std::size_t k = 0; k < classes; ++k) {
    const ClassCounts c = counts(r.confusion, k);
    r.precision.push_back(c.tp + c.fp > 0 ? c.tp / (c.tp + c.fp) : 0.0);
    r.recall.push_back(c.tp + c.fn > 0 ? c.tp / (c.tp + c.fn) : 0.0);
    r.f1.push_back(f1_of(c));
    for (std::size_t i = 0; i < truth.size(); ++i) column[i] = scores[i * classes + k];
    const double auc = one_vs_rest_auc(column, truth, static_cast<int>(k));
    r.class_auc.push_back(auc);
    if (!std::isnan(auc)) {
      auc_sum += auc;
      ++auc_count;
    }
  }
  r.macro_f1 = macro_f1(r.confusion);
  r.macro_ovr_auc = auc_count ? auc_sum / static_cast<double>(auc_count) : 0.5;
  return r;
}

std::string metrics_to_json(const MetricsReport& r) {
  nlohmann::ordered_json j;
  j["n_predictions"] = r.n_predictions;
  j["accuracy"] = r.accuracy;
  j["macro_f1"] = r.macro_f1;
  j["macro_ovr_auc"] = r.macro_ovr_auc;
  j["precision"] = r.precision;
  j["recall"] = r.recall;
  j["f1"] = r.f1;
  nlohmann::ordered_json auc = nlohmann::ordered_json::array();
  for (double a : r.class_auc) auc.push_back(std::isnan(a) ? nlohmann::ordered_json(nullptr) : nlohmann::ordered_json(a));
  j["class_auc"] = auc;
  j["confusion"] = r.confusion;
  return j.dump(2);
}

}  // namespace ktu::train
