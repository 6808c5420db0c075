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

#include "ktu/data/embeddings.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>

#include "json.hpp"

namespace ktu::data {

namespace {

std::uint32_t to_little(std::uint32_t v) {
  if constexpr (std::endian::native == std::endian::little) {
    return v;
  } else {
    return ((v & 0xFFu) << 24) | ((v & 0xFF00u) << 8) | ((v >> 8) & 0xFF00u) | (v >> 24);
  }
}

}  // namespace

std::string construct_text_key(std::int64_t construct_id) {
  return "construct/" + std::to_string(construct_id);
}

void EmbeddingTable::add(const std::string& key, std::vector<double> vector) {
  if (vector.size() != dimension_) {
    throw DataError("embedding '" + key + "' has " + std::to_string(vector.size()) +
                    " entries, table dimension is " + std::to_string(dimension_));
  }
  for (double v : vector) {
    if (!std::isfinite(v)) throw DataError("embedding '" + key + "' has a non-finite entry");
  }
  if (!index_.emplace(key, keys_.size()).second) throw DataError("duplicate embedding key '" + key + "'");
  keys_.push_back(key);
  rows_.push_back(std::move(vector));
}

std::span<const double> EmbeddingTable::row(const std::string& key) const {
  auto it = index_.find(key);
  if (it == index_.end()) throw DataError("missing embedding key '" + key + "'");
  return rows_[it->second];
}

EmbeddingTable load_embeddings(const std::filesystem::path& index_path,
                               const std::filesystem::path& blob_path,
                               std::optional<std::size_t> truncation) {
  nlohmann::json index;
  {
    std::ifstream in(index_path);
    if (!in) throw DataError("cannot open " + index_path.string());
    try {
      in >> index;
    } catch (const nlohmann::json::exception& e) {
      throw DataError(index_path.string() + ": malformed JSON (" + e.what() + ")");
    }
  }
  if (!index.is_object() || !index.contains("dimension") || !index["dimension"].is_number_integer() ||
      !index.contains("keys") || !index["keys"].is_array()) {
    throw DataError(index_path.string() + ": expected {\"dimension\": int, \"keys\": [...]}");
  }
  const auto dim = index["dimension"].get<std::int64_t>();
  if (dim <= 0) throw DataError(index_path.string() + ": dimension must be positive");
  const std::size_t dimension = static_cast<std::size_t>(dim);
  std::vector<std::string> keys;
  for (const auto& k : index["keys"]) {
    if (!k.is_string()) throw DataError(index_path.string() + ": keys must be strings");
    keys.push_back(k.get<std::string>());
  }

  std::ifstream blob(blob_path, std::ios::binary);
  if (!blob) throw DataError("cannot open " + blob_path.string());
  std::vector<char> bytes((std::istreambuf_iterator<char>(blob)), std::istreambuf_iterator<char>());
  const std::size_t expected = keys.size() * dimension * 4;
  if (bytes.size() != expected) {
    throw DataError(blob_path.string() + ": size mismatch, expected " + std::to_string(expected) +
                    " bytes, found " + std::to_string(bytes.size()));
  }

  const std::size_t kept = truncation ? std::min(*truncation, dimension) : dimension;
  if (kept == 0) throw std::invalid_argument("load_embeddings: truncation must be positive");
  EmbeddingTable table(kept);
  for (std::size_t r = 0; r < keys.size(); ++r) {
    std::vector<double> row(kept);
    for (std::size_t c = 0; c < kept; ++c) {
      std::uint32_t raw;
      std::memcpy(&raw, bytes.data() + (r * dimension + c) * 4, 4);
      row[c] = static_cast<double>(std::bit_cast<float>(to_little(raw)));
    }
    table.add(keys[r], std::move(row));
  }
  return table;
}

void write_embeddings(const std::filesystem::path& index_path,
                      const std::filesystem::path& blob_path, const EmbeddingTable& table) {
  nlohmann::ordered_json index;
  index["dimension"] = table.dimension();
  index["keys"] = table.keys();
  {
    std::ofstream out(index_path, std::ios::trunc);
    if (!out) throw DataError("cannot write " + index_path.string());
    out << index.dump() << '\n';
  }
  std::ofstream out(blob_path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + blob_path.string());
  for (const std::string& key : table.keys()) {
    for (double v : table.row(key)) {
      std::uint32_t raw = to_little(std::bit_cast<std::uint32_t>(static_cast<float>(v)));
      out.write(reinterpret_cast<const char*>(&raw), 4);
    }
  }
  if (!out) throw DataError("write failed: " + blob_path.string());
}

void require_question_keys(const EmbeddingTable& table, const QuestionBank& bank,
                           bool construct_text) {
  for (const QuestionRecord& q : bank.records()) {
    if (!table.contains(q.text_key)) {
      throw DataError("question " + std::to_string(q.question_id) + ": missing embedding key '" +
                      q.text_key + "'");
    }
    if (construct_text && !table.contains(construct_text_key(q.construct_id))) {
      throw DataError("construct " + std::to_string(q.construct_id) + ": missing embedding key '" +
                      construct_text_key(q.construct_id) + "'");
    }
  }
}

}  // namespace ktu::data
