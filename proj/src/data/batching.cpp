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

#include "ktu/data/batching.hpp"

#include <algorithm>

namespace ktu::data {

std::size_t Batch::target_count() const {
  return static_cast<std::size_t>(std::count_if(target.begin(), target.end(), [](int t) { return t >= 0; }));
}

Batch make_batch(const std::vector<const StudentSequence*>& students, const QuestionBank& bank) {
  if (students.empty()) throw std::invalid_argument("make_batch: no students");
  Batch b;
  b.rows = students.size();
  for (const StudentSequence* s : students) {
    if (s->interactions.empty()) {
      throw DataError("student " + std::to_string(s->student_id) + " has no interactions");
    }
    b.steps = std::max(b.steps, s->interactions.size());
  }
  const std::size_t cells = b.rows * b.steps;
  b.question_ids.assign(cells, 0);
  b.question_index.assign(cells, 0);
  b.construct_index.assign(cells, 0);
  b.target.assign(cells, -1);
  for (std::size_t r = 0; r < b.rows; ++r) {
    const StudentSequence& s = *students[r];
    b.student_ids.push_back(s.student_id);
    b.lengths.push_back(s.interactions.size());
    for (std::size_t t = 0; t < s.interactions.size(); ++t) {
      const InteractionRecord& rec = s.interactions[t];
      const QuestionRecord& q = bank.at(rec.question_id);
      const std::size_t i = b.at(r, t);
      b.question_ids[i] = rec.question_id;
      b.question_index[i] = bank.index_of(rec.question_id);
      b.construct_index[i] = bank.construct_index(q.construct_id);
      b.target[i] = rec.chosen_option;
    }
  }
  return b;
}

std::vector<Batch> make_batches(const DatasetSplit& split, const QuestionBank& bank,
                                std::size_t batch_size) {
  if (batch_size == 0) throw std::invalid_argument("make_batches: batch_size must be at least 1");
  if (split.sequences.empty()) throw std::invalid_argument("make_batches: split '" + split.name + "' is empty");
  std::vector<Batch> out;
  for (std::size_t start = 0; start < split.sequences.size(); start += batch_size) {
    std::vector<const StudentSequence*> chunk;
    for (std::size_t i = start; i < std::min(start + batch_size, split.sequences.size()); ++i) {
      chunk.push_back(&split.sequences[i]);
    }
    out.push_back(make_batch(chunk, bank));
  }
  return out;
}

}  // namespace ktu::data
