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
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "ktu/autodiff/rng.hpp"
#include "ktu/error.hpp"

namespace ktu::data {

inline constexpr int kNumOptions = 4;
inline constexpr std::size_t kQuizLength = 5;
inline constexpr std::size_t kDefaultSequenceLength = 100;

// "A".."D" <-> 0..3. Throws DataError on anything else.
int option_index(std::string_view label);
std::string option_label(int index);

struct QuestionRecord {
  std::int64_t question_id = 0;
  int correct_option = 0;
  std::int64_t construct_id = 0;
  std::string text_key;

  bool operator==(const QuestionRecord&) const = default;
};

// Questions in file order. The position of a question in the bank is its
// dense index, which is what models embed.
class QuestionBank {
 public:
  void add(QuestionRecord q);

  std::size_t size() const { return questions_.size(); }
  const std::vector<QuestionRecord>& records() const { return questions_; }
  bool contains(std::int64_t question_id) const { return index_.count(question_id) != 0; }
  std::size_t index_of(std::int64_t question_id) const;
  const QuestionRecord& at(std::int64_t question_id) const;

  // Constructs get dense indices in order of first appearance.
  std::size_t construct_count() const { return construct_ids_.size(); }
  std::size_t construct_index(std::int64_t construct_id) const;
  const std::vector<std::int64_t>& construct_ids() const { return construct_ids_; }

  bool operator==(const QuestionBank& o) const { return questions_ == o.questions_; }

 private:
  std::vector<QuestionRecord> questions_;
  std::unordered_map<std::int64_t, std::size_t> index_;
  std::vector<std::int64_t> construct_ids_;
  std::unordered_map<std::int64_t, std::size_t> construct_index_;
};

struct InteractionRecord {
  std::int64_t question_id = 0;
  int chosen_option = 0;
  std::size_t position = 0;
  int quiz_slot = 0;  // position mod 5

  bool operator==(const InteractionRecord&) const = default;
};

struct StudentSequence {
  std::int64_t student_id = 0;
  std::vector<InteractionRecord> interactions;

  bool operator==(const StudentSequence&) const = default;
};

struct DatasetSplit {
  std::string name;
  std::vector<StudentSequence> sequences;

  std::size_t interaction_count() const;
  bool operator==(const DatasetSplit&) const = default;
};

struct LoadStats {
  std::size_t students_read = 0;
  std::size_t students_kept = 0;
  std::size_t students_dropped = 0;
  std::size_t interactions_read = 0;
  std::size_t interactions_kept = 0;
};

struct Dataset {
  QuestionBank bank;
  std::vector<StudentSequence> sequences;
  LoadStats stats;
};

QuestionBank load_questions(const std::filesystem::path& path);

// Keeps students with at least `sequence_length` responses, truncated to
// their final `sequence_length` and renumbered from 0.
std::vector<StudentSequence> load_interactions(const std::filesystem::path& path,
                                               const QuestionBank& bank,
                                               std::size_t sequence_length = kDefaultSequenceLength,
                                               LoadStats* stats = nullptr);

Dataset load_dataset(const std::filesystem::path& questions_path,
                     const std::filesystem::path& interactions_path,
                     std::size_t sequence_length = kDefaultSequenceLength);

void write_questions(const std::filesystem::path& path, const QuestionBank& bank);
void write_interactions(const std::filesystem::path& path,
                        const std::vector<StudentSequence>& sequences);

// Renumbers positions from 0 and sets quiz slots.
StudentSequence make_sequence(std::int64_t student_id,
                              const std::vector<std::pair<std::int64_t, int>>& responses);

// Student-disjoint partition. The validation share is round(fraction * n),
// clamped so both sides keep at least one student.
std::pair<DatasetSplit, DatasetSplit> split_students(const std::vector<StudentSequence>& sequences,
                                                     double val_fraction, RngStream rng);

// Empirical error rate per question over the split. Questions never answered
// in the split are absent.
std::map<std::int64_t, double> question_difficulty(const DatasetSplit& split,
                                                   const QuestionBank& bank);

}  // namespace ktu::data
