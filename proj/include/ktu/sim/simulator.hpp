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

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "ktu/autodiff/rng.hpp"
#include "ktu/data/dataset.hpp"
#include "ktu/data/embeddings.hpp"

namespace ktu::sim {

struct SimConfig {
  std::size_t n_students = 600;
  std::size_t n_questions = 300;
  std::size_t sequence_length = 50;  // multiple of 5
  double ability_spread = 1.0;       // std of student ability
  double guess_floor = 0.25;
  std::size_t misconception_count = 20;
  std::uint64_t seed = 7;

  double learning_drift = 0.02;  // ability gain per completed quiz
  double difficulty_spread = 1.0;
  std::size_t templates_per_construct = 2;
  std::size_t embedding_dimension = 512;
  double embedding_noise = 1.0;  // per-question noise relative to the construct centroid
  double val_fraction = 1.0 / 6.0;

  void validate() const;
};

SimConfig sim_config_from_json(const std::string& text);
std::string sim_config_to_json(const SimConfig& config);

struct SimQuestion {
  data::QuestionRecord record;
  double difficulty = 0.0;  // latent b
  std::size_t quiz_template = 0;
  int quiz_slot = 0;
  // Misconception behind each option; the entry for the correct option is -1.
  std::array<int, data::kNumOptions> option_misconception{-1, -1, -1, -1};
  std::vector<double> pseudo_embedding;
};

struct SimStudent {
  double ability = 0.0;
  std::vector<double> susceptibility;  // per misconception, >= 0
};

// Quiz templates are groups of five consecutive questions in the bank,
// ordered by strictly increasing difficulty. Leftover questions (n mod 5)
// belong to no template.
std::vector<SimQuestion> generate_bank(const SimConfig& config);
std::size_t template_count(const SimConfig& config);

// Construct centroids double as the construct-text vectors.
std::vector<double> construct_centroid(const SimConfig& config, std::int64_t construct_id);

// Population-level weight of each misconception.
std::vector<double> misconception_prevalence(const SimConfig& config);

SimStudent draw_student(const SimConfig& config, RngStream& rng);

// P(correct) = guess_floor + (1 - guess_floor) * sigmoid(ability - difficulty).
double correct_probability(double ability, double difficulty, double guess_floor);

// Distractor weights are the student's susceptibility to each distractor's
// misconception; all-zero weights fall back to uniform.
int choose_distractor(const SimQuestion& question, const SimStudent& student, RngStream& rng);

// One quiz per template index; ability grows by learning_drift after each quiz.
data::StudentSequence simulate_student(std::int64_t student_id, const SimStudent& student,
                                       const std::vector<std::size_t>& quiz_sequence,
                                       const std::vector<SimQuestion>& bank,
                                       const SimConfig& config, RngStream& rng);

struct SimDataset {
  SimConfig config;
  std::vector<SimQuestion> questions;
  std::vector<SimStudent> students;  // index = student_id - 1
  data::QuestionBank bank;
  std::vector<data::StudentSequence> sequences;
  data::DatasetSplit train;
  data::DatasetSplit val;
  data::EmbeddingTable embeddings;
};

SimDataset generate_dataset(const SimConfig& config);

// File names written into a dataset directory.
struct DatasetFiles {
  static constexpr const char* kQuestions = "questions.jsonl";
  static constexpr const char* kInteractions = "interactions.jsonl";
  static constexpr const char* kTrain = "train.jsonl";
  static constexpr const char* kVal = "val.jsonl";
  static constexpr const char* kEmbeddingIndex = "embeddings.index.json";
  static constexpr const char* kEmbeddingBlob = "embeddings.bin";
  static constexpr const char* kConfig = "sim_config.json";
};

void write_dataset(const std::filesystem::path& dir, const SimDataset& dataset);

}  // namespace ktu::sim
