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
#include <vector>

#include "ktu/data/dataset.hpp"

namespace ktu::data {

/// Teacher-forced batch. Every per-position table is row-major
/// [row * steps + t], where row is the student within the batch.
///
/// Position t is scored against the question answered at t (question,
/// construct, target). The model may look at interactions j < t only; the
/// first position sees nothing but the start token.
struct Batch {
  std::size_t rows = 0;
  std::size_t steps = 0;
  std::vector<std::int64_t> student_ids;
  std::vector<std::size_t> lengths;

  std::vector<std::int64_t> question_ids;
  std::vector<std::size_t> question_index;   // dense bank index
  std::vector<std::size_t> construct_index;  // dense construct index
  std::vector<int> target;                   // chosen option, -1 on padding

  std::size_t at(std::size_t row, std::size_t t) const { return row * steps + t; }
  bool valid(std::size_t row, std::size_t t) const { return t < lengths[row]; }
  // Whether interaction j is part of the conditioning history for position t.
  bool visible(std::size_t row, std::size_t t, std::size_t j) const {
    return j < t && j < lengths[row];
  }
  std::size_t target_count() const;
};

// Consecutive chunks in split order; the final partial batch is kept.
// Shorter sequences are right-padded to the longest in their batch.
std::vector<Batch> make_batches(const DatasetSplit& split, const QuestionBank& bank,
                                std::size_t batch_size);

Batch make_batch(const std::vector<const StudentSequence*>& students, const QuestionBank& bank);

}  // namespace ktu::data
