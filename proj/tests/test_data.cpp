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

#include <cstring>
#include <map>
#include <set>
#include <sstream>

#include "doctest.h"
#include "ktu/data/batching.hpp"
#include "ktu/data/dataset.hpp"
#include "ktu/data/embeddings.hpp"
#include "test_util.hpp"

using namespace ktu;
using namespace ktu::data;
using ktu::testing::TempDir;
using ktu::testing::write_text;

namespace {

std::string questions_jsonl(int n) {
  std::ostringstream os;
  for (int q = 1; q <= n; ++q) {
    os << R"({"question_id": )" << q << R"(, "correct_option": ")" << option_label(q % 4)
       << R"(", "construct_id": )" << (q % 3) << R"(, "text_key": "q)" << q << "\"}\n";
  }
  return os.str();
}

std::string student_line(int student, int count, int question_offset = 0) {
  std::ostringstream os;
  os << R"({"student_id": )" << student << R"(, "responses": [)";
  for (int i = 0; i < count; ++i) {
    if (i) os << ", ";
    os << R"({"question_id": )" << ((i + question_offset) % 10 + 1) << R"(, "chosen": ")"
       << option_label(i % 4) << "\"}";
  }
  os << "]}\n";
  return os.str();
}

QuestionBank small_bank(int n = 10) {
  QuestionBank bank;
  for (int q = 1; q <= n; ++q) bank.add({q, 0, q % 2, "q" + std::to_string(q)});
  return bank;
}

std::vector<StudentSequence> students(int count, int length) {
  std::vector<StudentSequence> out;
  for (int s = 0; s < count; ++s) {
    std::vector<std::pair<std::int64_t, int>> r;
    for (int i = 0; i < length; ++i) r.emplace_back((s + i) % 10 + 1, (s * 7 + i) % 4);
    out.push_back(make_sequence(100 + s, r));
  }
  return out;
}

}  // namespace

TEST_CASE("option labels") {
  CHECK(option_index("A") == 0);
  CHECK(option_index("D") == 3);
  CHECK(option_label(2) == "C");
  CHECK_THROWS_AS(option_index("E"), DataError);
  CHECK_THROWS_AS(option_index("a"), DataError);
}

TEST_CASE("load_dataset") {
  TempDir dir;
  write_text(dir / "q.jsonl", questions_jsonl(10));

  SUBCASE("length threshold and final-100 truncation") {
    write_text(dir / "i.jsonl", student_line(1, 99) + student_line(2, 137) + student_line(3, 100));
    Dataset d = load_dataset(dir / "q.jsonl", dir / "i.jsonl");
    REQUIRE(d.sequences.size() == 2);
    CHECK(d.stats.students_read == 3);
    CHECK(d.stats.students_dropped == 1);
    CHECK(d.stats.interactions_read == 99 + 137 + 100);
    CHECK(d.stats.interactions_kept == 200);

    const StudentSequence& s = d.sequences[0];
    CHECK(s.student_id == 2);
    REQUIRE(s.interactions.size() == 100);
    for (std::size_t p = 0; p < 100; ++p) {
      const int original = static_cast<int>(p) + 37;
      CHECK(s.interactions[p].position == p);
      CHECK(s.interactions[p].quiz_slot == static_cast<int>(p % 5));
      CHECK(s.interactions[p].question_id == original % 10 + 1);
      CHECK(s.interactions[p].chosen_option == original % 4);
    }
  }
  SUBCASE("idempotent") {
    write_text(dir / "i.jsonl", student_line(1, 120) + student_line(2, 100, 3));
    Dataset a = load_dataset(dir / "q.jsonl", dir / "i.jsonl");
    Dataset b = load_dataset(dir / "q.jsonl", dir / "i.jsonl");
    CHECK(a.bank == b.bank);
    CHECK(a.sequences == b.sequences);
  }
  SUBCASE("malformed line reports its number") {
    write_text(dir / "i.jsonl", student_line(1, 100) + "{not json\n");
    try {
      load_dataset(dir / "q.jsonl", dir / "i.jsonl");
      FAIL("expected DataError");
    } catch (const DataError& e) {
      CHECK(std::string(e.what()).find("i.jsonl:2:") != std::string::npos);
    }
  }
  SUBCASE("unknown question id") {
    write_text(dir / "i.jsonl", R"({"student_id": 1, "responses": [{"question_id": 99, "chosen": "A"}]})" "\n");
    CHECK_THROWS_AS(load_dataset(dir / "q.jsonl", dir / "i.jsonl"), DataError);
  }
  SUBCASE("duplicate question id") {
    write_text(dir / "q2.jsonl", questions_jsonl(3) + questions_jsonl(1));
    try {
      load_questions(dir / "q2.jsonl");
      FAIL("expected DataError");
    } catch (const DataError& e) {
      CHECK(std::string(e.what()).find("q2.jsonl:4:") != std::string::npos);
      CHECK(std::string(e.what()).find("duplicate question_id 1") != std::string::npos);
    }
  }
  SUBCASE("bad option label") {
    write_text(dir / "i.jsonl", R"({"student_id": 1, "responses": [{"question_id": 1, "chosen": "E"}]})" "\n");
    CHECK_THROWS_AS(load_dataset(dir / "q.jsonl", dir / "i.jsonl"), DataError);
  }
  SUBCASE("write then load round-trips") {
    QuestionBank bank = load_questions(dir / "q.jsonl");
    auto seqs = students(3, 12);
    write_questions(dir / "q3.jsonl", bank);
    write_interactions(dir / "i3.jsonl", seqs);
    Dataset d = load_dataset(dir / "q3.jsonl", dir / "i3.jsonl", 12);
    CHECK(d.bank == bank);
    CHECK(d.sequences == seqs);
  }
}

TEST_CASE("split_students") {
  auto seqs = students(10, 5);
  auto [train, val] = split_students(seqs, 0.2, RngStream(1, 0));
  CHECK(train.sequences.size() == 8);
  CHECK(val.sequences.size() == 2);
  std::set<std::int64_t> tr, va, all;
  for (auto& s : train.sequences) tr.insert(s.student_id);
  for (auto& s : val.sequences) va.insert(s.student_id);
  for (auto& s : seqs) all.insert(s.student_id);
  std::set<std::int64_t> uni = tr;
  uni.insert(va.begin(), va.end());
  CHECK(uni == all);
  for (auto id : va) CHECK(tr.count(id) == 0);

  auto again = split_students(seqs, 0.2, RngStream(1, 0));
  CHECK(again.first == train);
  CHECK(again.second == val);
  auto other = split_students(seqs, 0.2, RngStream(2, 0));
  CHECK((other.second.sequences != val.sequences || other.first.sequences != train.sequences));

  CHECK_THROWS_AS(split_students(students(1, 5), 0.5, RngStream(1, 0)), std::invalid_argument);
  CHECK_THROWS_AS(split_students(seqs, 0.0, RngStream(1, 0)), std::invalid_argument);
  CHECK_THROWS_AS(split_students(seqs, 1.0, RngStream(1, 0)), std::invalid_argument);
}

TEST_CASE("make_batches") {
  QuestionBank bank = small_bank();
  DatasetSplit split{"train", students(130, 7)};
  auto batches = make_batches(split, bank, 64);
  REQUIRE(batches.size() == 3);
  CHECK(batches[0].rows == 64);
  CHECK(batches[1].rows == 64);
  CHECK(batches[2].rows == 2);

  std::map<std::pair<std::int64_t, std::size_t>, int> from_split, from_batches;
  for (auto& s : split.sequences)
    for (auto& r : s.interactions) from_split[{s.student_id, r.position}] = r.chosen_option;

  // Batch order is irrelevant to the pairing: walk them back to front.
  for (auto it = batches.rbegin(); it != batches.rend(); ++it) {
    const Batch& b = *it;
    for (std::size_t r = 0; r < b.rows; ++r) {
      for (std::size_t t = 0; t < b.steps; ++t) {
        from_batches[{b.student_ids[r], t}] = b.target[b.at(r, t)];
        CHECK(b.question_ids[b.at(r, t)] == bank.records()[b.question_index[b.at(r, t)]].question_id);
        for (std::size_t j = 0; j < b.steps; ++j) CHECK(b.visible(r, t, j) == (j < t));
      }
    }
  }
  CHECK(from_split == from_batches);
  CHECK(batches[0].target_count() == 64 * 7);

  CHECK_THROWS_AS(make_batches(split, bank, 0), std::invalid_argument);
  CHECK_THROWS_AS(make_batches(DatasetSplit{"val", {}}, bank, 4), std::invalid_argument);

  SUBCASE("ragged sequences are padded") {
    DatasetSplit ragged{"x", {students(1, 3)[0], students(2, 6)[1]}};
    auto b = make_batches(ragged, bank, 8).at(0);
    CHECK(b.steps == 6);
    CHECK(b.target[b.at(0, 4)] == -1);
    CHECK(!b.valid(0, 3));
    CHECK(!b.visible(0, 5, 4));
    CHECK(b.target_count() == 9);
  }
}

TEST_CASE("embeddings") {
  TempDir dir;
  EmbeddingTable t(1024);
  ktu::RngStream rng(3, 0);
  for (int k = 0; k < 3; ++k) {
    std::vector<double> v(1024);
    for (double& x : v) x = static_cast<double>(static_cast<float>(rng.normal()));
    t.add("key" + std::to_string(k), v);
  }
  write_embeddings(dir / "e.json", dir / "e.bin", t);
  CHECK(std::filesystem::file_size(dir / "e.bin") == 3 * 1024 * 4);

  SUBCASE("full-width truncation passes through") {
    EmbeddingTable back = load_embeddings(dir / "e.json", dir / "e.bin", 1024);
    CHECK(back == t);
  }
  SUBCASE("prefix truncation") {
    EmbeddingTable back = load_embeddings(dir / "e.json", dir / "e.bin", 8);
    CHECK(back.dimension() == 8);
    for (const auto& key : t.keys())
      for (std::size_t i = 0; i < 8; ++i) CHECK(back.row(key)[i] == t.row(key)[i]);
  }
  SUBCASE("little-endian float32 layout") {
    std::string bytes = ktu::testing::read_bytes(dir / "e.bin");
    float first;
    std::memcpy(&first, bytes.data(), 4);  // this host is little-endian
    CHECK(static_cast<double>(first) == t.row("key0")[0]);
  }
  SUBCASE("short blob") {
    std::string bytes = ktu::testing::read_bytes(dir / "e.bin");
    write_text(dir / "short.bin", bytes.substr(0, bytes.size() - 4));
    try {
      load_embeddings(dir / "e.json", dir / "short.bin");
      FAIL("expected DataError");
    } catch (const DataError& e) {
      std::string msg = e.what();
      CHECK(msg.find("12288") != std::string::npos);
      CHECK(msg.find("12284") != std::string::npos);
    }
  }
  SUBCASE("missing key referenced by the bank") {
    QuestionBank bank;
    bank.add({1, 0, 5, "key0"});
    bank.add({2, 1, 5, "nope"});
    CHECK_THROWS_AS(require_question_keys(t, bank, false), DataError);
    CHECK_THROWS_AS(t.row("nope"), DataError);
  }
}

TEST_CASE("question_difficulty") {
  QuestionBank bank;
  bank.add({1, 0, 1, "a"});
  bank.add({2, 2, 1, "b"});
  bank.add({3, 1, 1, "c"});
  auto split_of = [](std::vector<std::vector<std::pair<std::int64_t, int>>> per_student) {
    DatasetSplit s{"train", {}};
    for (std::size_t i = 0; i < per_student.size(); ++i)
      s.sequences.push_back(make_sequence(static_cast<std::int64_t>(i), per_student[i]));
    return s;
  };
  auto d = question_difficulty(split_of({{{1, 0}, {2, 1}, {3, 1}}, {{1, 0}, {2, 3}, {3, 1}},
                                         {{1, 0}, {3, 0}}, {{1, 2}, {3, 1}}}),
                               bank);
  CHECK(d.at(1) == 0.25);  // 3 correct of 4
  CHECK(d.at(2) == 1.0);
  CHECK(d.at(3) == 0.25);

  auto all_right = question_difficulty(split_of({{{1, 0}, {2, 2}}}), bank);
  CHECK(all_right.at(1) == 0.0);
  CHECK(all_right.count(3) == 0);

  SUBCASE("flipping a student to all-wrong never lowers difficulty") {
    auto students_split = split_of({{{1, 0}, {2, 2}, {3, 1}}, {{1, 1}, {2, 2}, {3, 0}}, {{1, 0}, {3, 1}}});
    auto before = question_difficulty(students_split, bank);
    for (auto& r : students_split.sequences[2].interactions)
      r.chosen_option = (bank.at(r.question_id).correct_option + 1) % 4;
    auto after = question_difficulty(students_split, bank);
    for (auto& [q, v] : before) {
      CHECK(after.at(q) >= v);
      CHECK((after.at(q) >= 0.0 && after.at(q) <= 1.0));
    }
  }
}
