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

#include "ktu/sim/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "json.hpp"

namespace ktu::sim {

namespace {

using json = nlohmann::json;

// Index offsets inside the kSimEmbedding / kSimBank stream namespaces.
constexpr std::uint64_t kCentroidStreamBase = std::uint64_t{1} << 40;
constexpr std::uint64_t kPrevalenceStream = 1;

double exponential(RngStream& rng) { return -std::log1p(-rng.uniform()); }

double to_float_precision(double v) { return static_cast<double>(static_cast<float>(v)); }

std::vector<double> gaussian_vector(RngStream rng, std::size_t n, double sd) {
  std::vector<double> v(n);
  for (double& x : v) x = rng.normal(0.0, sd);
  return v;
}

}  // namespace

void SimConfig::validate() const {
  if (n_students < 2) throw std::invalid_argument("SimConfig: n_students must be at least 2");
  if (n_questions < data::kQuizLength) throw std::invalid_argument("SimConfig: n_questions must be at least 5");
  if (sequence_length == 0 || sequence_length % data::kQuizLength != 0) {
    throw std::invalid_argument("SimConfig: sequence_length must be a positive multiple of 5");
  }
  if (!(guess_floor >= 0.0 && guess_floor < 1.0)) {
    throw std::invalid_argument("SimConfig: guess_floor must lie in [0, 1)");
  }
  if (!(ability_spread >= 0.0) || !(difficulty_spread > 0.0) || !(embedding_noise >= 0.0)) {
    throw std::invalid_argument("SimConfig: spreads must be non-negative");
  }
  if (templates_per_construct == 0) throw std::invalid_argument("SimConfig: templates_per_construct must be positive");
  if (embedding_dimension == 0) throw std::invalid_argument("SimConfig: embedding_dimension must be positive");
  if (!(val_fraction > 0.0 && val_fraction < 1.0)) {
    throw std::invalid_argument("SimConfig: val_fraction must lie in (0, 1)");
  }
}

SimConfig sim_config_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw DataError(std::string("SimConfig: malformed JSON (") + e.what() + ")");
  }
  if (!j.is_object()) throw DataError("SimConfig: expected a JSON object");
  SimConfig c;
  for (const auto& [key, value] : j.items()) {
    try {
      if (key == "n_students") c.n_students = value.get<std::size_t>();
      else if (key == "n_questions") c.n_questions = value.get<std::size_t>();
      else if (key == "sequence_length") c.sequence_length = value.get<std::size_t>();
      else if (key == "ability_spread") c.ability_spread = value.get<double>();
      else if (key == "guess_floor") c.guess_floor = value.get<double>();
      else if (key == "misconception_count") c.misconception_count = value.get<std::size_t>();
      else if (key == "seed") c.seed = value.get<std::uint64_t>();
      else if (key == "learning_drift") c.learning_drift = value.get<double>();
      else if (key == "difficulty_spread") c.difficulty_spread = value.get<double>();
      else if (key == "templates_per_construct") c.templates_per_construct = value.get<std::size_t>();
      else if (key == "embedding_dimension") c.embedding_dimension = value.get<std::size_t>();
      else if (key == "embedding_noise") c.embedding_noise = value.get<double>();
      else if (key == "val_fraction") c.val_fraction = value.get<double>();
      else throw DataError("SimConfig: unknown field '" + key + "'");
    } catch (const json::exception&) {
      throw DataError("SimConfig: field '" + key + "' has the wrong type");
    }
  }
  try {
    c.validate();
  } catch (const std::invalid_argument& e) {
    throw DataError(e.what());
  }
  return c;
}

std::string sim_config_to_json(const SimConfig& c) {
  nlohmann::ordered_json j;
  j["n_students"] = c.n_students;
  j["n_questions"] = c.n_questions;
  j["sequence_length"] = c.sequence_length;
  j["ability_spread"] = c.ability_spread;
  j["guess_floor"] = c.guess_floor;
  j["misconception_count"] = c.misconception_count;
  j["seed"] = c.seed;
  j["learning_drift"] = c.learning_drift;
  j["difficulty_spread"] = c.difficulty_spread;
  j["templates_per_construct"] = c.templates_per_construct;
  j["embedding_dimension"] = c.embedding_dimension;
  j["embedding_noise"] = c.embedding_noise;
  j["val_fraction"] = c.val_fraction;
  return j.dump(2);
}

std::size_t template_count(const SimConfig& config) { return config.n_questions / data::kQuizLength; }

std::vector<double> construct_centroid(const SimConfig& config, std::int64_t construct_id) {
  RngStream rng(config.seed, stream_id(StreamPurpose::kSimEmbedding,
                                       kCentroidStreamBase + static_cast<std::uint64_t>(construct_id)));
  std::vector<double> v = gaussian_vector(rng, config.embedding_dimension, 1.0);
  for (double& x : v) x = to_float_precision(x);
  return v;
}

std::vector<double> misconception_prevalence(const SimConfig& config) {
  RngStream rng(config.seed, stream_id(StreamPurpose::kSimBank, kPrevalenceStream));
  std::vector<double> w(config.misconception_count);
  for (double& x : w) x = exponential(rng);
  return w;
}

std::vector<SimQuestion> generate_bank(const SimConfig& config) {
  config.validate();
  RngStream rng(config.seed, stream_id(StreamPurpose::kSimBank, 0));
  const std::size_t templates = template_count(config);
  std::vector<SimQuestion> bank(config.n_questions);

  for (std::size_t tpl = 0; tpl <= templates; ++tpl) {
    const std::size_t first = tpl * data::kQuizLength;
    if (first >= config.n_questions) break;
    const std::size_t count = std::min(data::kQuizLength, config.n_questions - first);
    std::vector<double> b(count);
    for (double& x : b) x = rng.normal(0.0, config.difficulty_spread);
    std::sort(b.begin(), b.end());
    for (std::size_t i = 1; i < count; ++i) {
      if (b[i] <= b[i - 1]) b[i] = std::nextafter(b[i - 1], INFINITY);
    }
    const std::size_t construct = std::min(tpl, templates > 0 ? templates - 1 : 0) / config.templates_per_construct;
    for (std::size_t slot = 0; slot < count; ++slot) {
      SimQuestion& q = bank[first + slot];
      q.record.question_id = static_cast<std::int64_t>(first + slot + 1);
      q.record.construct_id = static_cast<std::int64_t>(construct + 1);
      q.record.text_key = "question/" + std::to_string(q.record.question_id);
      q.record.correct_option = static_cast<int>(rng.below(data::kNumOptions));
      q.difficulty = b[slot];
      q.quiz_template = tpl;
      q.quiz_slot = static_cast<int>(slot);
      for (int opt = 0; opt < data::kNumOptions; ++opt) {
        if (opt == q.record.correct_option || config.misconception_count == 0) continue;
        q.option_misconception[static_cast<std::size_t>(opt)] =
            static_cast<int>(rng.below(config.misconception_count));
      }
    }
  }

  for (SimQuestion& q : bank) {
    std::vector<double> centroid = construct_centroid(config, q.record.construct_id);
    RngStream noise(config.seed, stream_id(StreamPurpose::kSimEmbedding,
                                           static_cast<std::uint64_t>(q.record.question_id)));
    q.pseudo_embedding.resize(config.embedding_dimension);
    for (std::size_t d = 0; d < config.embedding_dimension; ++d) {
      q.pseudo_embedding[d] = to_float_precision(centroid[d] + noise.normal(0.0, config.embedding_noise));
    }
  }
  return bank;
}

SimStudent draw_student(const SimConfig& config, RngStream& rng) {
  SimStudent s;
  s.ability = rng.normal(0.0, config.ability_spread);
  const std::vector<double> prevalence = misconception_prevalence(config);
  s.susceptibility.resize(prevalence.size());
  for (std::size_t m = 0; m < prevalence.size(); ++m) s.susceptibility[m] = prevalence[m] * exponential(rng);
  return s;
}

double correct_probability(double ability, double difficulty, double guess_floor) {
  const double z = ability - difficulty;
  const double sig = z >= 0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
  return guess_floor + (1.0 - guess_floor) * sig;
}

int choose_distractor(const SimQuestion& question, const SimStudent& student, RngStream& rng) {
  std::array<int, 3> options{};
  std::array<double, 3> weights{};
  std::size_t n = 0;
  double total = 0.0;
  for (int opt = 0; opt < data::kNumOptions; ++opt) {
    if (opt == question.record.correct_option) continue;
    const int m = question.option_misconception[static_cast<std::size_t>(opt)];
    const double w = (m >= 0 && static_cast<std::size_t>(m) < student.susceptibility.size())
                         ? student.susceptibility[static_cast<std::size_t>(m)]
                         : 0.0;
    options[n] = opt;
    weights[n] = w;
    total += w;
    ++n;
  }
  const double u = rng.uniform();
  if (!(total > 0.0)) return options[std::min<std::size_t>(static_cast<std::size_t>(u * 3.0), 2)];
  double acc = 0.0;
  for (std::size_t i = 0; i < 3; ++i) {
    acc += weights[i] / total;
    if (u < acc) return options[i];
  }
  return options[2];
}

data::StudentSequence simulate_student(std::int64_t student_id, const SimStudent& student,
                                       const std::vector<std::size_t>& quiz_sequence,
                                       const std::vector<SimQuestion>& bank,
                                       const SimConfig& config, RngStream& rng) {
  if (quiz_sequence.size() * data::kQuizLength != config.sequence_length) {
    throw std::invalid_argument("simulate_student: expected " +
                                std::to_string(config.sequence_length / data::kQuizLength) +
                                " quizzes, got " + std::to_string(quiz_sequence.size()));
  }
  std::vector<std::pair<std::int64_t, int>> responses;
  responses.reserve(config.sequence_length);
  double ability = student.ability;
  for (std::size_t tpl : quiz_sequence) {
    const std::size_t first = tpl * data::kQuizLength;
    if (first + data::kQuizLength > bank.size()) {
      throw std::out_of_range("simulate_student: quiz template " + std::to_string(tpl) + " outside bank");
    }
    for (std::size_t slot = 0; slot < data::kQuizLength; ++slot) {
      const SimQuestion& q = bank[first + slot];
      const bool correct = rng.uniform() < correct_probability(ability, q.difficulty, config.guess_floor);
      const int chosen = correct ? q.record.correct_option : choose_distractor(q, student, rng);
      responses.emplace_back(q.record.question_id, chosen);
    }
    ability += config.learning_drift;
  }
  return data::make_sequence(student_id, responses);
}

SimDataset generate_dataset(const SimConfig& config) {
  config.validate();
  SimDataset out;
  out.config = config;
  out.questions = generate_bank(config);
  for (const SimQuestion& q : out.questions) out.bank.add(q.record);

  const std::size_t templates = template_count(config);
  const std::size_t quizzes = config.sequence_length / data::kQuizLength;
  for (std::size_t i = 0; i < config.n_students; ++i) {
    const auto student_id = static_cast<std::int64_t>(i + 1);
    RngStream rng(config.seed, stream_id(StreamPurpose::kSimStudent, static_cast<std::uint64_t>(student_id)));
    SimStudent student = draw_student(config, rng);

    std::vector<std::size_t> quiz_sequence(quizzes);
    if (templates >= quizzes) {
      std::vector<std::size_t> pool(templates);
      std::iota(pool.begin(), pool.end(), std::size_t{0});
      for (std::size_t k = 0; k < quizzes; ++k) {
        std::size_t j = k + static_cast<std::size_t>(rng.below(templates - k));
        std::swap(pool[k], pool[j]);
        quiz_sequence[k] = pool[k];
      }
    } else {
      for (auto& tpl : quiz_sequence) tpl = static_cast<std::size_t>(rng.below(templates));
    }
    out.sequences.push_back(simulate_student(student_id, student, quiz_sequence, out.questions, config, rng));
    out.students.push_back(std::move(student));
  }

  auto [train, val] = data::split_students(out.sequences, config.val_fraction,
                                           RngStream(config.seed, stream_id(StreamPurpose::kSplit, 0)));
  out.train = std::move(train);
  out.val = std::move(val);

  out.embeddings = data::EmbeddingTable(config.embedding_dimension);
  for (const SimQuestion& q : out.questions) out.embeddings.add(q.record.text_key, q.pseudo_embedding);
  for (std::int64_t construct : out.bank.construct_ids()) {
    out.embeddings.add(data::construct_text_key(construct), construct_centroid(config, construct));
  }
  return out;
}

void write_dataset(const std::filesystem::path& dir, const SimDataset& dataset) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw DataError("cannot create " + dir.string() + ": " + ec.message());
  data::write_questions(dir / DatasetFiles::kQuestions, dataset.bank);
  data::write_interactions(dir / DatasetFiles::kInteractions, dataset.sequences);
  data::write_interactions(dir / DatasetFiles::kTrain, dataset.train.sequences);
  data::write_interactions(dir / DatasetFiles::kVal, dataset.val.sequences);
  data::write_embeddings(dir / DatasetFiles::kEmbeddingIndex, dir / DatasetFiles::kEmbeddingBlob,
                         dataset.embeddings);
  std::ofstream cfg(dir / DatasetFiles::kConfig, std::ios::trunc);
  if (!cfg) throw DataError("cannot write " + (dir / DatasetFiles::kConfig).string());
  cfg << sim_config_to_json(dataset.config) << '\n';
}

}  // namespace ktu::sim
