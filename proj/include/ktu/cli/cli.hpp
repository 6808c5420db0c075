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

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "ktu/analysis/analysis.hpp"
#include "ktu/autodiff/gradcheck.hpp"
#include "ktu/data/dataset.hpp"
#include "ktu/data/embeddings.hpp"
#include "ktu/models/config.hpp"
#include "ktu/train/metrics.hpp"

namespace ktu::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitData = 2;

// A dataset directory as written by `simulate`.
struct DataDir {
  data::QuestionBank bank;
  data::DatasetSplit train;
  data::DatasetSplit val;
  std::optional<data::EmbeddingTable> embeddings;
  std::size_t sequence_length = 0;

  const data::DatasetSplit& split(const std::string& name) const;
};

// sequence_length defaults to the one recorded in sim_config.json, else 100.
DataDir load_data_dir(const std::filesystem::path& dir, std::optional<std::size_t> sequence_length = std::nullopt,
                      bool with_embeddings = true);

// Finite-difference check of one architecture's tiny model on a 2-student,
// 10-position synthetic batch.
ad::GradCheckReport model_gradcheck(models::Architecture arch, std::uint64_t seed = 5);

struct AnalysisBundle {
  std::vector<analysis::PredictionRecord> records;
  analysis::AnalysisReport entropy_by_model;
  analysis::AnalysisReport entropy_by_student;
  analysis::AnalysisReport std_by_student;
  analysis::AnalysisReport entropy_by_position;
  analysis::AnalysisReport std_by_position;
  analysis::AnalysisReport difficulty_by_position;
  analysis::Correlation correlation;
  train::MetricsReport mc_mean_metrics;  // argmax of the MC-mean probabilities
};

// `difficulty` is the per-question error rate, normally over the training split.
AnalysisBundle build_analysis(std::vector<analysis::PredictionRecord> records, const data::DatasetSplit& split,
                              const std::map<std::int64_t, double>& difficulty);

// Writes the report CSVs; metrics.json gets `metrics_json` verbatim.
void write_analysis(const std::filesystem::path& out_dir, const AnalysisBundle& bundle,
                    const std::string& metrics_json);

int cli_main(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int cli_main(int argc, char** argv);

}  // namespace ktu::cli
