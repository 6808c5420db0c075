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
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "ktu/data/dataset.hpp"

namespace ktu::data {

// Key of the construct-text vector for a construct id.
std::string construct_text_key(std::int64_t construct_id);

/// Text embeddings keyed by string handle. Vectors are widened from the
/// on-disk 32-bit floats.
class EmbeddingTable {
 public:
  EmbeddingTable() = default;
  explicit EmbeddingTable(std::size_t dimension) : dimension_(dimension) {}

  std::size_t dimension() const { return dimension_; }
  std::size_t size() const { return keys_.size(); }
  const std::vector<std::string>& keys() const { return keys_; }
  bool contains(const std::string& key) const { return index_.count(key) != 0; }

  void add(const std::string& key, std::vector<double> vector);
  // Throws DataError naming the key when absent.
  std::span<const double> row(const std::string& key) const;

  bool operator==(const EmbeddingTable& o) const {
    return dimension_ == o.dimension_ && keys_ == o.keys_ && rows_ == o.rows_;
  }

 private:
  std::size_t dimension_ = 0;
  std::vector<std::string> keys_;
  std::vector<std::vector<double>> rows_;
  std::unordered_map<std::string, std::size_t> index_;
};

// Index: {"dimension": int, "keys": [...]}; blob: little-endian float32,
// row-major in key order. Rows longer than `truncation` keep their prefix.
EmbeddingTable load_embeddings(const std::filesystem::path& index_path,
                               const std::filesystem::path& blob_path,
                               std::optional<std::size_t> truncation = std::nullopt);

// Values are narrowed to float32 on write.
void write_embeddings(const std::filesystem::path& index_path,
                      const std::filesystem::path& blob_path, const EmbeddingTable& table);

// Every question's text key (and construct key when asked) must be present.
void require_question_keys(const EmbeddingTable& table, const QuestionBank& bank,
                           bool construct_text);

}  // namespace ktu::data
