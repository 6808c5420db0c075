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

#include "ktu/data/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <unordered_set>

#include "json.hpp"

namespace ktu::data {

namespace {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

std::string where(const std::filesystem::path& path, std::size_t line) {
  return path.string() + ":" + std::to_string(line) + ": ";
}

template <typename T>
T field(const json& obj, const char* key, const std::filesystem::path& path, std::size_t line) {
  auto it = obj.find(key);
  if (it == obj.end()) throw DataError(where(path, line) + "missing field '" + key + "'");
  try {
    return it->get<T>();
  } catch (const json::exception&) {
    throw DataError(where(path, line) + "field '" + key + "' has the wrong type");
  }
}

std::int64_t integer_field(const json& obj, const char* key, const std::filesystem::path& path,
                           std::size_t line) {
  auto it = obj.find(key);
  if (it == obj.end()) throw DataError(where(path, line) + "missing field '" + key + "'");
  if (!it->is_number_integer()) {
    throw DataError(where(path, line) + "field '" + key + "' must be an integer");
  }
  return it->get<std::int64_t>();
}

int option_field(const json& obj, const char* key, const std::filesystem::path& path,
                 std::size_t line) {
  std::string label = field<std::string>(obj, key, path, line);
  try {
    return option_index(label);
  } catch (const DataError& e) {
    throw DataError(where(path, line) + e.what());
  }
}

template <typename Fn>
void for_each_json_line(const std::filesystem::path& path, Fn&& fn) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  std::string text;
  std::size_t line = 0;
  while (std::getline(in, text)) {
    ++line;
    if (!text.empty() && text.back() == '\r') text.pop_back();
    if (text.find_first_not_of(" \t") == std::string::npos) continue;
    json obj;
    try {
      obj = json::parse(text);
    } catch (const json::parse_error& e) {
      throw DataError(where(path, line) + "malformed JSON (" + e.what() + ")");
    }
    if (!obj.is_object()) throw DataError(where(path, line) + "expected a JSON object");
    fn(obj, line);
  }
}

std::ofstream open_for_write(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  return out;
}

}  // namespace

int option_index(std::string_view label) {
  if (label.size() == 1 && label[0] >= 'A' && label[0] <= 'D') return label[0] - 'A';
  throw DataError("option label must be one of A, B, C, D (got '" + std::string(label) + "')");
}

std::string option_label(int index) {
  if (index < 0 || index >= kNumOptions) {
    throw std::out_of_range("option index " + std::to_string(index) + " outside 0..3");
  }
  return std::string(1, static_cast<char>('A' + index));
}

void QuestionBank::add(QuestionRecord q) {
  if (q.correct_option < 0 || q.correct_option >= kNumOptions) {
    throw DataError("question " + std::to_string(q.question_id) + ": correct option out of range");
  }
  if (!index_.emplace(q.question_id, questions_.size()).second) {
    throw DataError("duplicate question_id " + std::to_string(q.question_id));
  }
  if (construct_index_.emplace(q.construct_id, construct_ids_.size()).second) {
    construct_ids_.push_back(q.construct_id);
  }
  questions_.push_back(std::move(q));
}

std::size_t QuestionBank::index_of(std::int64_t question_id) const {
  auto it = index_.find(question_id);
  if (it == index_.end()) throw DataError("unknown question_id " + std::to_string(question_id));
  return it->second;
}

const QuestionRecord& QuestionBank::at(std::int64_t question_id) const {
  return questions_[index_of(question_id)];
}

std::size_t QuestionBank::construct_index(std::int64_t construct_id) const {
  auto it = construct_index_.find(construct_id);
  if (it == construct_index_.end()) {
    throw DataError("unknown construct_id " + std::to_string(construct_id));
  }
  return it->second;
}

std::size_t DatasetSplit::interaction_count() const {
  std::size_t n = 0;
  for (const auto& s : sequences) n += s.interactions.size();
  return n;
}

QuestionBank load_questions(const std::filesystem::path& path) {
  QuestionBank bank;
  for_each_json_line(path, [&](const json& obj, std::size_t line) {
    QuestionRecord q;
    q.question_id = integer_field(obj, "question_id", path, line);
    q.correct_option = option_field(obj, "correct_option", path, line);
    q.construct_id = integer_field(obj, "construct_id", path, line);
    q.text_key = field<std::string>(obj, "text_key", path, line);
    try {
      bank.add(std::move(q));
    } catch (const DataError& e) {
      throw DataError(where(path, line) + e.what());
    }
  });
  return bank;
}

StudentSequence make_sequence(std::int64_t student_id,
                              const std::vector<std::pair<std::int64_t, int>>& responses) {
  StudentSequence s;
  s.student_id = student_id;
  s.interactions.reserve(responses.size());
  for (std::size_t pos = 0; pos < responses.size(); ++pos) {
    InteractionRecord r;
    r.question_id = responses[pos].first;
    r.chosen_option = responses[pos].second;
    r.position = pos;
    r.quiz_slot = static_cast<int>(pos % kQuizLength);
    s.interactions.push_back(r);
  }
  return s;
}

std::vector<StudentSequence> load_interactions(const std::filesystem::path& path,
                                               const QuestionBank& bank,
                                               std::size_t sequence_length, LoadStats* stats) {
  if (sequence_length == 0) throw std::invalid_argument("load_interactions: sequence_length must be positive");
  LoadStats local;
  std::vector<StudentSequence> out;
  std::unordered_set<std::int64_t> seen;
  for_each_json_line(path, [&](const json& obj, std::size_t line) {
    const std::int64_t student = integer_field(obj, "student_id", path, line);
    if (!seen.insert(student).second) {
      throw DataError(where(path, line) + "duplicate student_id " + std::to_string(student));
    }
    auto it = obj.find("responses");
    if (it == obj.end() || !it->is_array()) {
      throw DataError(where(path, line) + "field 'responses' must be an array");
    }
    std::vector<std::pair<std::int64_t, int>> responses;
    responses.reserve(it->size());
    for (const json& r : *it) {
      if (!r.is_object()) throw DataError(where(path, line) + "response must be an object");
      const std::int64_t q = integer_field(r, "question_id", path, line);
      if (!bank.contains(q)) {
        throw DataError(where(path, line) + "unknown question_id " + std::to_string(q));
      }
      responses.emplace_back(q, option_field(r, "chosen", path, line));
    }
    ++local.students_read;
    local.interactions_read += responses.size();
    if (responses.size() < sequence_length) {
      ++local.students_dropped;
      return;
    }
    responses.erase(responses.begin(),
                    responses.end() - static_cast<std::ptrdiff_t>(sequence_length));
    ++local.students_kept;
    local.interactions_kept += responses.size();
    out.push_back(make_sequence(student, responses));
  });
  if (stats) *stats = local;
  return out;
}

Dataset load_dataset(const std::filesystem::path& questions_path,
                     const std::filesystem::path& interactions_path, std::size_t sequence_length) {
  Dataset d;
  d.bank = load_questions(questions_path);
  d.sequences = load_interactions(interactions_path, d.bank, sequence_length, &d.stats);
  return d;
}

void write_questions(const std::filesystem::path& path, const QuestionBank& bank) {
  std::ofstream out = open_for_write(path);
  for (const QuestionRecord& q : bank.records()) {
    ordered_json obj;
    obj["question_id"] = q.question_id;
    obj["correct_option"] = option_label(q.correct_option);
    obj["construct_id"] = q.construct_id;
    obj["text_key"] = q.text_key;
    out << obj.dump() << '\n';
  }
  if (!out) throw DataError("write failed: " + path.string());
}

void write_interactions(const std::filesystem::path& path,
                        const std::vector<StudentSequence>& sequences) {
  std::ofstream out = open_for_write(path);
  for (const StudentSequence& s : sequences) {
    ordered_json responses = ordered_json::array();
    for (const InteractionRecord& r : s.interactions) {
      ordered_json item;
      item["question_id"] = r.question_id;
      item["chosen"] = option_label(r.chosen_option);
      responses.push_back(std::move(item));
    }
    ordered_json obj;
    obj["student_id"] = s.student_id;
    obj["responses"] = std::move(responses);
    out << obj.dump() << '\n';
  }
  if (!out) throw DataError("write failed: " + path.string());
}

std::pair<DatasetSplit, DatasetSplit> split_students(const std::vector<StudentSequence>& sequences,
                                                     double val_fraction, RngStream rng) {
  if (!(val_fraction > 0.0 && val_fraction < 1.0)) {
    throw std::invalid_argument("split_students: val_fraction must lie in (0, 1)");
  }
  if (sequences.size() < 2) throw std::invalid_argument("split_students: need at least 2 students");

  std::vector<std::int64_t> ids;
  ids.reserve(sequences.size());
  for (const auto& s : sequences) ids.push_back(s.student_id);
  std::sort(ids.begin(), ids.end());
  if (std::adjacent_find(ids.begin(), ids.end()) != ids.end()) {
    throw DataError("split_students: duplicate student_id");
  }
  shuffle_in_place(ids, rng);

  const double n = static_cast<double>(sequences.size());
  auto n_val = static_cast<std::size_t>(std::llround(val_fraction * n));
  n_val = std::clamp<std::size_t>(n_val, 1, sequences.size() - 1);
  std::set<std::int64_t> val_ids(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(n_val));

  DatasetSplit train{"train", {}}, val{"val", {}};
  for (const auto& s : sequences) {
    (val_ids.count(s.student_id) ? val : train).sequences.push_back(s);
  }
  return {std::move(train), std::move(val)};
}

std::map<std::int64_t, double> question_difficulty(const DatasetSplit& split,
                                                   const QuestionBank& bank) {
  std::map<std::int64_t, std::pair<std::size_t, std::size_t>> counts;  // wrong, total
  for (const auto& s : split.sequences) {
    for (const auto& r : s.interactions) {
      auto& c = counts[r.question_id];
      c.first += r.chosen_option != bank.at(r.question_id).correct_option;
      ++c.second;
    }
  }
  std::map<std::int64_t, double> out;
  for (const auto& [q, c] : counts) {
    out.emplace(q, static_cast<double>(c.first) / static_cast<double>(c.second));
  }
  return out;
}

}  // namespace ktu::data
