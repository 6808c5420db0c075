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
#include <map>
#include <string>
#include <vector>

#include "ktu/data/dataset.hpp"
#include "ktu/models/params.hpp"
#include "ktu/uncertainty/mc_dropout.hpp"

namespace ktu::analysis {

struct PredictionRecord {
  std::int64_t student_id = 0;
  std::size_t position = 0;
  int quiz_slot = 0;
  std::int64_t question_id = 0;
  int chosen_option = 0;
  int correct_option = 0;
  int predicted_class = 0;
  double total_entropy = 0.0;
  double mean_std = 0.0;
  std::vector<double> mean_probs;

  bool model_correct() const { return predicted_class == chosen_option; }
  bool student_correct() const { return chosen_option == correct_option; }
  bool operator==(const PredictionRecord&) const = default;
};

// Which argmax counts as "the model prediction".
enum class PredictionMode { kMcMean, kDeterministic };

PredictionMode parse_prediction_mode(const std::string& text);
std::string to_string(PredictionMode mode);

// One record per non-padding (student, position), in split order.
std::vector<PredictionRecord> collect_predictions(const models::ModelParams& params,
                                                  const data::DatasetSplit& split,
                                                  const data::QuestionBank& bank, const mc::McConfig& mc,
                                                  PredictionMode mode = PredictionMode::kMcMean,
                                                  std::size_t batch_size = 64);

// Records from precomputed MC samples ([cell][m] per batch, as mc_predict
// returns them), keeping only the first `samples` of each cell.
std::vector<PredictionRecord> records_from_samples(const std::vector<data::Batch>& batches,
                                                   const std::vector<std::vector<std::vector<mc::PredictiveSample>>>& samples,
                                                   const data::QuestionBank& bank, std::size_t use_samples);

// Tabular report: leading key columns (strings) then numeric columns.
struct AnalysisReport {
  std::string tag;
  std::vector<std::string> key_columns;
  std::vector<std::string> value_columns;
  struct Row {
    std::vector<std::string> keys;
    std::vector<double> values;
  };
  std::vector<Row> rows;

  double value(std::size_t row, const std::string& column) const;
  std::string to_csv() const;
};

enum class Measure { kEntropy, kStd };
std::string to_string(Measure measure);

struct BoxStats {
  std::size_t count = 0;
  double mean = 0, min = 0, whisker_low = 0, q1 = 0, median = 0, q3 = 0, whisker_high = 0, max = 0;
};

// Quantile at position q * (n - 1), averaging the two neighbours when it
// falls between them.
double midpoint_quantile(const std::vector<double>& sorted, double q);
// Whiskers reach the most extreme values within 1.5 IQR of the quartiles.
BoxStats box_stats(std::vector<double> values);

// Columns: group, count, mean, min, whisker_low, q1, median, q3, whisker_high, max.
AnalysisReport entropy_by_model_correctness(const std::vector<PredictionRecord>& records);
AnalysisReport uncertainty_by_student_correctness(const std::vector<PredictionRecord>& records, Measure measure);

// Columns: position, quiz_slot, count, mean, std_error.
AnalysisReport uncertainty_by_position(const std::vector<PredictionRecord>& records, Measure measure);

// Columns: position, quiz_slot, count, mean_difficulty. Questions missing
// from `difficulty` are skipped.
AnalysisReport difficulty_by_position(const data::DatasetSplit& split,
                                      const std::map<std::int64_t, double>& difficulty);

struct Correlation {
  double pearson = 0.0;
  double spearman = 0.0;
  // Columns: question_id, count, mean_entropy, difficulty, pearson_r, spearman_rho.
  AnalysisReport table;
};

double pearson(const std::vector<double>& x, const std::vector<double>& y);
double spearman(const std::vector<double>& x, const std::vector<double>& y);

Correlation entropy_difficulty_correlation(const std::vector<PredictionRecord>& records,
                                           const std::map<std::int64_t, double>& difficulty);

std::string predictions_csv(const std::vector<PredictionRecord>& records);

}  // namespace ktu::analysis
