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

#include "ktu/analysis/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "ktu/autodiff/ops.hpp"
#include "ktu/data/batching.hpp"
#include "ktu/error.hpp"
#include "ktu/format.hpp"
#include "ktu/models/forward.hpp"

namespace ktu::analysis {

namespace {

// Smallest value plus the mean offset from it: exact for constant input.
double stable_mean(const std::vector<double>& v) {
  const double lo = *std::min_element(v.begin(), v.end());
  double offsets = 0;
  for (double x : v) offsets += x - lo;
  return lo + offsets / static_cast<double>(v.size());
}

}  // namespace

PredictionMode parse_prediction_mode(const std::string& text) {
  if (text == "mc_mean") return PredictionMode::kMcMean;
  if (text == "deterministic") return PredictionMode::kDeterministic;
  throw std::invalid_argument("unknown prediction mode '" + text + "' (expected mc_mean or deterministic)");
}

std::string to_string(PredictionMode mode) {
  return mode == PredictionMode::kMcMean ? "mc_mean" : "deterministic";
}

std::string to_string(Measure measure) { return measure == Measure::kEntropy ? "entropy" : "std"; }

namespace {

PredictionRecord make_record(const data::Batch& b, std::size_t r, std::size_t t, const data::QuestionBank& bank,
                             const mc::PredictiveSummary& s) {
  const std::size_t c = b.at(r, t);
  PredictionRecord rec;
  rec.student_id = b.student_ids[r];
  rec.position = t;
  rec.quiz_slot = static_cast<int>(t % data::kQuizLength);
  rec.question_id = b.question_ids[c];
  rec.chosen_option = b.target[c];
  rec.correct_option = bank.at(rec.question_id).correct_option;
  rec.predicted_class = s.predicted_class;
  rec.total_entropy = s.total_entropy;
  rec.mean_std = s.mean_std;
  rec.mean_probs = s.mean_probs;
  return rec;
}

}  // namespace

std::vector<PredictionRecord> records_from_samples(
    const std::vector<data::Batch>& batches,
    const std::vector<std::vector<std::vector<mc::PredictiveSample>>>& samples, const data::QuestionBank& bank,
    std::size_t use_samples) {
  if (batches.size() != samples.size()) throw std::invalid_argument("records_from_samples: batch count mismatch");
  if (use_samples == 0) throw std::invalid_argument("records_from_samples: need at least one sample");
  std::vector<PredictionRecord> out;
  for (std::size_t i = 0; i < batches.size(); ++i) {
    const data::Batch& b = batches[i];
    for (std::size_t r = 0; r < b.rows; ++r) {
      for (std::size_t t = 0; t < b.lengths[r]; ++t) {
        const auto& cell = samples[i].at(b.at(r, t));
        if (cell.size() < use_samples)
          throw std::invalid_argument("records_from_samples: only " + std::to_string(cell.size()) + " samples");
        out.push_back(make_record(b, r, t, bank, mc::summarize(std::span(cell.data(), use_samples))));
      }
    }
  }
  return out;
}

std::vector<PredictionRecord> collect_predictions(const models::ModelParams& params, const data::DatasetSplit& split,
                                                  const data::QuestionBank& bank, const mc::McConfig& mc,
                                                  PredictionMode mode, std::size_t batch_size) {
  if (split.sequences.empty()) throw std::invalid_argument("collect_predictions: empty split");
  std::vector<PredictionRecord> out;
  RngStream unused(0, 0);
  for (const data::Batch& b : data::make_batches(split, bank, batch_size)) {
    const auto samples = mc::mc_predict(params, b, mc);
    ad::NdArray det;
    if (mode == PredictionMode::kDeterministic) det = models::predict_logits(params, b, false, unused);
    for (std::size_t r = 0; r < b.rows; ++r) {
      for (std::size_t t = 0; t < b.lengths[r]; ++t) {
        const std::size_t c = b.at(r, t);
        PredictionRecord rec = make_record(b, r, t, bank, mc::summarize(samples[c]));
        if (mode == PredictionMode::kDeterministic)
          rec.predicted_class = mc::argmax(std::span(det.data() + c * det.cols(), det.cols()));
        out.push_back(std::move(rec));
      }
    }
  }
  return out;
}

double AnalysisReport::value(std::size_t row, const std::string& column) const {
  auto it = std::find(value_columns.begin(), value_columns.end(), column);
  if (it == value_columns.end()) throw std::out_of_range(tag + ": no column " + column);
  return rows.at(row).values.at(static_cast<std::size_t>(it - value_columns.begin()));
}

std::string AnalysisReport::to_csv() const {
  std::vector<std::string> header = key_columns;
  header.insert(header.end(), value_columns.begin(), value_columns.end());
  std::string out = csv_line(header);
  for (const Row& r : rows) {
    std::vector<std::string> f = r.keys;
    for (double v : r.values) f.push_back(format_double(v));
    out += csv_line(f);
  }
  return out;
}

double midpoint_quantile(const std::vector<double>& sorted, double q) {
  if (sorted.empty()) throw std::invalid_argument("midpoint_quantile: no values");
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = static_cast<std::size_t>(std::ceil(pos));
  return lo == hi ? sorted[lo] : (sorted[lo] + sorted[hi]) / 2.0;
}

BoxStats box_stats(std::vector<double> v) {
  if (v.empty()) throw std::invalid_argument("box_stats: no values");
  std::sort(v.begin(), v.end());
  BoxStats b;
  b.count = v.size();
  b.mean = stable_mean(v);
  b.min = v.front();
  b.max = v.back();
  b.q1 = midpoint_quantile(v, 0.25);
  b.median = midpoint_quantile(v, 0.5);
  b.q3 = midpoint_quantile(v, 0.75);
  const double reach = 1.5 * (b.q3 - b.q1);
  b.whisker_low = *std::lower_bound(v.begin(), v.end(), b.q1 - reach);
  b.whisker_high = *(std::upper_bound(v.begin(), v.end(), b.q3 + reach) - 1);
  return b;
}

namespace {

const std::vector<std::string> kBoxColumns{"count", "mean", "min", "whisker_low", "q1",
                                           "median", "q3", "whisker_high", "max"};

AnalysisReport grouped_box_report(const std::string& tag, const std::vector<PredictionRecord>& records,
                                  const std::string& yes, const std::string& no,
                                  bool (*in_yes)(const PredictionRecord&), Measure measure) {
  std::vector<double> a, b;
  for (const auto& r : records) {
    const double v = measure == Measure::kEntropy ? r.total_entropy : r.mean_std;
    (in_yes(r) ? a : b).push_back(v);
  }
  if (a.empty()) throw DataError(tag + ": group " + yes + " empty");
  if (b.empty()) throw DataError(tag + ": group " + no + " empty");
  AnalysisReport rep;
  rep.tag = tag;
  rep.key_columns = {"group"};
  rep.value_columns = kBoxColumns;
  for (const auto& [name, values] : {std::pair{yes, &a}, std::pair{no, &b}}) {
    const BoxStats s = box_stats(*values);
    rep.rows.push_back({{name},
                        {static_cast<double>(s.count), s.mean, s.min, s.whisker_low, s.q1, s.median, s.q3,
                         s.whisker_high, s.max}});
  }
  return rep;
}

}  // namespace

AnalysisReport entropy_by_model_correctness(const std::vector<PredictionRecord>& records) {
  return grouped_box_report("entropy_by_model_correctness", records, "model_correct", "model_incorrect",
                            [](const PredictionRecord& r) { return r.model_correct(); }, Measure::kEntropy);
}

AnalysisReport uncertainty_by_student_correctness(const std::vector<PredictionRecord>& records, Measure measure) {
  return grouped_box_report(to_string(measure) + "_by_student_correctness", records, "student_correct",
                            "student_incorrect", [](const PredictionRecord& r) { return r.student_correct(); },
                            measure);
}

AnalysisReport uncertainty_by_position(const std::vector<PredictionRecord>& records, Measure measure) {
  std::map<std::size_t, std::vector<double>> by_pos;
  for (const auto& r : records) by_pos[r.position].push_back(measure == Measure::kEntropy ? r.total_entropy : r.mean_std);
  AnalysisReport rep;
  rep.tag = to_string(measure) + "_by_position";
  rep.key_columns = {"position"};
  rep.value_columns = {"quiz_slot", "count", "mean", "std_error"};
  for (const auto& [pos, v] : by_pos) {
    const double n = static_cast<double>(v.size());
    const double mean = stable_mean(v);
    double ss = 0;
    for (double x : v) ss += (x - mean) * (x - mean);
    const double se = v.size() > 1 ? std::sqrt(ss / (n - 1)) / std::sqrt(n) : 0.0;
    rep.rows.push_back({{std::to_string(pos)},
                        {static_cast<double>(pos % data::kQuizLength), n, mean, se}});
  }
  return rep;
}

AnalysisReport difficulty_by_position(const data::DatasetSplit& split, const std::map<std::int64_t, double>& difficulty) {
  if (split.sequences.empty()) throw std::invalid_argument("difficulty_by_position: empty split");
  std::map<std::size_t, std::pair<double, std::size_t>> acc;
  for (const auto& s : split.sequences) {
    for (const auto& it : s.interactions) {
      auto d = difficulty.find(it.question_id);
      if (d == difficulty.end()) continue;
      acc[it.position].first += d->second;
      acc[it.position].second += 1;
    }
  }
  AnalysisReport rep;
  rep.tag = "difficulty_by_position";
  rep.key_columns = {"position"};
  rep.value_columns = {"quiz_slot", "count", "mean_difficulty"};
  for (const auto& [pos, a] : acc)
    rep.rows.push_back({{std::to_string(pos)},
                        {static_cast<double>(pos % data::kQuizLength), static_cast<double>(a.second),
                         a.first / static_cast<double>(a.second)}});
  return rep;
}

double pearson(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size()) throw std::invalid_argument("pearson: length mismatch");
  if (x.size() < 2) throw DataError("correlation needs at least 2 points, got " + std::to_string(x.size()));
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0) throw DataError("correlation undefined: first variable has zero variance");
  if (syy == 0) throw DataError("correlation undefined: second variable has zero variance");
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

namespace {

std::vector<double> average_ranks(const std::vector<double>& v) {
  std::vector<std::size_t> idx(v.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> r(v.size());
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
    for (std::size_t k = i; k <= j; ++k) r[idx[k]] = static_cast<double>(i + j) / 2.0 + 1.0;
    i = j + 1;
  }
  return r;
}

}  // namespace

double spearman(const std::vector<double>& x, const std::vector<double>& y) {
  return pearson(average_ranks(x), average_ranks(y));
}

Correlation entropy_difficulty_correlation(const std::vector<PredictionRecord>& records,
                                           const std::map<std::int64_t, double>& difficulty) {
  std::map<std::int64_t, std::pair<double, std::size_t>> acc;
  for (const auto& r : records) {
    if (!difficulty.count(r.question_id)) continue;
    acc[r.question_id].first += r.total_entropy;
    acc[r.question_id].second += 1;
  }
  std::vector<double> ent, diff;
  for (const auto& [q, a] : acc) {
    ent.push_back(a.first / static_cast<double>(a.second));
    diff.push_back(difficulty.at(q));
  }
  Correlation c;
  c.pearson = pearson(ent, diff);
  c.spearman = spearman(ent, diff);
  c.table.tag = "entropy_difficulty_correlation";
  c.table.key_columns = {"question_id"};
  c.table.value_columns = {"count", "mean_entropy", "difficulty", "pearson_r", "spearman_rho"};
  std::size_t i = 0;
  for (const auto& [q, a] : acc) {
    c.table.rows.push_back({{std::to_string(q)},
                            {static_cast<double>(a.second), ent[i], diff[i], c.pearson, c.spearman}});
    ++i;
  }
  return c;
}

std::string predictions_csv(const std::vector<PredictionRecord>& records) {
  std::string out = csv_line({"student_id", "position", "quiz_slot", "question_id", "chosen_option",
                              "correct_option", "predicted_class", "model_correct", "student_correct",
                              "total_entropy", "mean_std", "prob_A", "prob_B", "prob_C", "prob_D"});
  for (const auto& r : records) {
    std::vector<std::string> f{std::to_string(r.student_id), std::to_string(r.position),
                               std::to_string(r.quiz_slot), std::to_string(r.question_id),
                               data::option_label(r.chosen_option), data::option_label(r.correct_option),
                               data::option_label(r.predicted_class), r.model_correct() ? "1" : "0",
                               r.student_correct() ? "1" : "0", format_double(r.total_entropy),
                               format_double(r.mean_std)};
    for (double p : r.mean_probs) f.push_back(format_double(p));
    out += csv_line(f);
  }
  return out;
}

}  // namespace ktu::analysis
