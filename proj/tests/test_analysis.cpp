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

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "doctest.h"
#include "ktu/analysis/analysis.hpp"
#include "ktu/cli/cli.hpp"
#include "ktu/data/batching.hpp"
#include "ktu/models/forward.hpp"
#include "ktu/sim/simulator.hpp"
#include "test_util.hpp"

using namespace ktu;
using namespace ktu::analysis;

namespace {

PredictionRecord rec(double entropy, bool model_ok, bool student_ok, std::size_t position = 0,
                     double std_value = 0.0) {
  PredictionRecord r;
  r.position = position;
  r.quiz_slot = static_cast<int>(position % 5);
  r.correct_option = 2;
  r.chosen_option = student_ok ? 2 : 1;
  r.predicted_class = model_ok ? r.chosen_option : 3;
  r.total_entropy = entropy;
  r.mean_std = std_value;
  r.mean_probs = {0.25, 0.25, 0.25, 0.25};
  return r;
}

sim::SimDataset small_data(std::size_t students, std::size_t length) {
  sim::SimConfig c;
  c.n_students = students;
  c.n_questions = 20;
  c.sequence_length = length;
  c.embedding_dimension = 8;
  c.seed = 11;
  return sim::generate_dataset(c);
}

struct Run {
  int code;
  std::string out, err;
};

Run run(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = cli::cli_main(args, out, err);
  return {code, out.str(), err.str()};
}

std::set<std::string> listing(const std::filesystem::path& dir) {
  std::set<std::string> names;
  for (const auto& e : std::filesystem::directory_iterator(dir)) names.insert(e.path().filename().string());
  return names;
}

}  // namespace

TEST_CASE("box statistics") {
  std::vector<double> v{4, 1, 3, 2};
  BoxStats b = box_stats(v);
  CHECK(b.q1 == 1.5);
  CHECK(b.median == 2.5);
  CHECK(b.q3 == 3.5);
  CHECK(b.mean == 2.5);
  CHECK(b.whisker_low == 1.0);
  CHECK(b.whisker_high == 4.0);
  CHECK(b.count == 4);

  // Quartiles 1.5 and 5.5, fences at -4.5 and 11.5.
  BoxStats o = box_stats({-5, 1, 2, 3, 4, 5, 6, 20});
  CHECK(o.q1 == 1.5);
  CHECK(o.q3 == 5.5);
  CHECK(o.whisker_low == 1.0);
  CHECK(o.whisker_high == 6.0);
  CHECK(o.min == -5.0);
  CHECK(o.max == 20.0);
  CHECK(midpoint_quantile({7.0}, 0.25) == 7.0);
  CHECK_THROWS_AS(box_stats({}), std::invalid_argument);
}

TEST_CASE("correctness reports") {
  std::vector<PredictionRecord> r{rec(0.2, true, true), rec(0.4, true, false), rec(1.0, false, true),
                                  rec(1.2, false, false)};
  AnalysisReport m = entropy_by_model_correctness(r);
  REQUIRE(m.rows.size() == 2);
  CHECK(m.rows[0].keys[0] == "model_correct");
  CHECK(std::abs(m.value(0, "mean") - 0.3) < 1e-15);
  CHECK(std::abs(m.value(1, "mean") - 1.1) < 1e-15);
  CHECK(m.value(0, "count") + m.value(1, "count") == 4);
  CHECK(m.to_csv().rfind("group,count,mean,min,whisker_low,q1,median,q3,whisker_high,max\n", 0) == 0);

  std::vector<PredictionRecord> all_right{rec(0.2, true, true), rec(0.4, true, false)};
  try {
    entropy_by_model_correctness(all_right);
    FAIL("expected an error");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find("group model_incorrect empty") != std::string::npos);
  }
  std::vector<PredictionRecord> students_right{rec(0.2, true, true), rec(0.4, false, true)};
  CHECK_THROWS_AS(uncertainty_by_student_correctness(students_right, Measure::kEntropy), DataError);

  std::vector<PredictionRecord> flat;
  for (int i = 0; i < 10; ++i) flat.push_back(rec(0.7, i % 3 == 0, i % 2 == 0));
  AnalysisReport f = entropy_by_model_correctness(flat);
  CHECK(f.value(0, "mean") == f.value(1, "mean"));

  SUBCASE("measure selects the column") {
    std::vector<PredictionRecord> mixed{rec(1.0, true, true, 0, 0.01), rec(2.0, true, false, 0, 0.02),
                                        rec(3.0, false, true, 0, 0.03), rec(4.0, false, false, 0, 0.04)};
    AnalysisReport e = uncertainty_by_student_correctness(mixed, Measure::kEntropy);
    AnalysisReport s = uncertainty_by_student_correctness(mixed, Measure::kStd);
    CHECK(e.tag == "entropy_by_student_correctness");
    CHECK(s.tag == "std_by_student_correctness");
    CHECK(e.value(0, "mean") == 2.0);
    CHECK(s.value(0, "mean") == doctest::Approx(0.02));
    CHECK(e.value(1, "mean") == 3.0);
    CHECK(s.value(1, "mean") == doctest::Approx(0.03));
  }
}

TEST_CASE("position reports") {
  std::vector<PredictionRecord> one{rec(0.5, true, true, 3), rec(0.5, false, true, 3)};
  AnalysisReport p = uncertainty_by_position(one, Measure::kEntropy);
  REQUIRE(p.rows.size() == 1);
  CHECK(p.rows[0].keys[0] == "3");
  CHECK(p.value(0, "quiz_slot") == 3);
  CHECK(p.value(0, "std_error") == 0.0);
  CHECK(p.value(0, "mean") == 0.5);

  std::vector<PredictionRecord> two{rec(1.0, true, true, 0), rec(3.0, true, true, 0), rec(2.0, true, true, 6)};
  AnalysisReport q = uncertainty_by_position(two, Measure::kEntropy);
  CHECK(q.value(0, "mean") == 2.0);
  CHECK(q.value(0, "std_error") == 1.0);  // sample std sqrt(2) over sqrt(2)
  CHECK(q.value(1, "quiz_slot") == 1);

  SUBCASE("difficulty by position") {
    sim::SimDataset d = small_data(400, 20);
    auto diff = data::question_difficulty(d.train, d.bank);
    AnalysisReport r = difficulty_by_position(d.train, diff);
    CHECK(r.rows.size() == 20);
    double slot_mean[5] = {0, 0, 0, 0, 0};
    for (std::size_t i = 0; i < r.rows.size(); ++i)
      slot_mean[static_cast<int>(r.value(i, "quiz_slot"))] += r.value(i, "mean_difficulty");
    for (int s = 1; s < 5; ++s) CHECK(slot_mean[s] > slot_mean[s - 1]);

    data::DatasetSplit right = d.train;
    for (auto& s : right.sequences)
      for (auto& it : s.interactions) it.chosen_option = d.bank.at(it.question_id).correct_option;
    AnalysisReport z = difficulty_by_position(right, data::question_difficulty(right, d.bank));
    CHECK(z.rows.size() == 20);
    for (std::size_t i = 0; i < z.rows.size(); ++i) CHECK(z.value(i, "mean_difficulty") == 0.0);
    CHECK_THROWS_AS(difficulty_by_position(data::DatasetSplit{}, diff), std::invalid_argument);
  }
}

TEST_CASE("correlation") {
  CHECK(pearson({1, 2, 3, 4}, {2, 4, 6, 8}) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(std::abs(pearson({1, 2, 3, 4}, {1, 3, 2, 4}) - 0.8) < 1e-15);
  CHECK_THROWS_AS(pearson({1, 2, 3}, {5, 5, 5}), DataError);
  CHECK_THROWS_AS(pearson({1}, {2}), DataError);

  RngStream rng(2, 0);
  for (int c = 0; c < 50; ++c) {
    std::vector<double> x(12), y(12);
    for (std::size_t i = 0; i < 12; ++i) {
      x[i] = static_cast<double>(rng.below(5));
      y[i] = x[i] + rng.normal();
    }
    if (std::all_of(x.begin(), x.end(), [&](double v) { return v == x[0]; })) continue;
    CHECK(std::abs(pearson(x, y) - testing::pearson(x, y)) < 1e-12);
    CHECK(std::abs(spearman(x, y) - testing::spearman(x, y)) < 1e-12);
  }

  // Two questions: entropy tracks difficulty.
  std::vector<PredictionRecord> r{rec(0.2, true, true), rec(0.4, true, true), rec(1.0, true, true),
                                  rec(0.9, true, true)};
  r[0].question_id = r[1].question_id = 1;
  r[2].question_id = r[3].question_id = 2;
  r[3].total_entropy = 1.1;
  std::map<std::int64_t, double> diff{{1, 0.1}, {2, 0.6}, {3, 0.9}};
  Correlation c = entropy_difficulty_correlation(r, diff);
  CHECK(c.pearson == doctest::Approx(1.0));
  REQUIRE(c.table.rows.size() == 2);
  CHECK(std::abs(c.table.value(0, "mean_entropy") - 0.3) < 1e-15);
  CHECK(c.table.value(1, "difficulty") == 0.6);
  CHECK(c.table.value(1, "count") == 2);
  std::map<std::int64_t, double> flat{{1, 0.5}, {2, 0.5}};
  CHECK_THROWS_AS(entropy_difficulty_correlation(r, flat), DataError);
  std::map<std::int64_t, double> single{{1, 0.5}};
  CHECK_THROWS_AS(entropy_difficulty_correlation(r, single), DataError);
}

TEST_CASE("collect_predictions") {
  sim::SimDataset d = small_data(3, 10);
  data::DatasetSplit all{"all", d.sequences};
  for (models::Architecture a : models::all_architectures()) {
    INFO(models::to_string(a));
    RngStream init(1, 0);
    models::ModelParams p =
        models::init_params(models::tiny_config(a, d.bank.size(), d.bank.construct_count(), 10), init);
    if (a == models::Architecture::kLlmkt) models::attach_text_features(p, d.embeddings, d.bank);
    mc::McConfig mc{5, 17};
    auto records = collect_predictions(p, all, d.bank, mc);
    REQUIRE(records.size() == 30);
    CHECK(records == collect_predictions(p, all, d.bank, mc));
    const std::string csv = predictions_csv(records);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 31);

    const data::Batch b = data::make_batches(all, d.bank, 64).at(0);
    auto samples = mc::mc_predict(p, b, mc);
    for (std::size_t i = 0; i < records.size(); ++i) {
      const std::size_t row = i / 10, t = i % 10;
      const auto& r = records[i];
      CHECK(r.student_id == d.sequences[row].student_id);
      CHECK(r.position == t);
      CHECK(r.quiz_slot == d.sequences[row].interactions[t].quiz_slot);
      CHECK(r.chosen_option == d.sequences[row].interactions[t].chosen_option);
      CHECK(r.correct_option == d.bank.at(r.question_id).correct_option);
      const mc::PredictiveSummary s = mc::summarize(samples[b.at(row, t)]);
      CHECK(r.total_entropy == s.total_entropy);
      CHECK(r.mean_std == s.mean_std);
      CHECK(r.predicted_class == s.predicted_class);
    }

    // Sample m does not depend on M, so a prefix of a larger run is a smaller run.
    auto prefix = records_from_samples({b}, {mc::mc_predict(p, b, mc::McConfig{9, 17})}, d.bank, 5);
    CHECK(prefix == records);

    auto det = collect_predictions(p, all, d.bank, mc, PredictionMode::kDeterministic);
    RngStream unused(0, 0);
    ad::NdArray logits = models::predict_logits(p, b, false, unused);
    for (std::size_t i = 0; i < det.size(); ++i) {
      CHECK(det[i].total_entropy == records[i].total_entropy);
      CHECK(det[i].predicted_class == mc::argmax(std::span(logits.data() + i * 4, 4)));
    }
  }
  CHECK(parse_prediction_mode("deterministic") == PredictionMode::kDeterministic);
  CHECK_THROWS_AS(parse_prediction_mode("vote"), std::invalid_argument);
}

TEST_CASE("command line") {
  testing::TempDir tmp;
  const std::string data_dir = (tmp / "data").string();

  CHECK(run({}).code == cli::kExitUsage);
  CHECK(run({"frobnicate"}).code == cli::kExitUsage);
  CHECK(run({"simulate", "--out-dir", data_dir, "--bogus"}).code == cli::kExitUsage);
  CHECK(run({"--help"}).code == cli::kExitOk);
  CHECK(run({"gradcheck", "--arch", "transformer"}).code == cli::kExitUsage);

  const std::vector<std::string> sim_args{"simulate", "--seed", "1", "--students", "12", "--questions",
                                          "20", "--length", "10", "--embedding-dim", "8", "--out-dir"};
  auto with_dir = [&](std::vector<std::string> a, const std::string& dir) {
    a.push_back(dir);
    return a;
  };
  REQUIRE(run(with_dir(sim_args, data_dir)).code == cli::kExitOk);
  REQUIRE(run(with_dir(sim_args, (tmp / "data2").string())).code == cli::kExitOk);
  for (const auto& name : listing(tmp / "data"))
    CHECK(testing::read_bytes(tmp / "data" / name) == testing::read_bytes(tmp / "data2" / name));

  const std::string run_dir = (tmp / "run").string();
  Run t = run({"train", "--data", data_dir, "--arch", "llmkt", "--preset", "tiny", "--epochs", "2", "--batch-size",
               "4", "--seed", "3", "--out-dir", run_dir});
  INFO(t.err);
  REQUIRE(t.code == cli::kExitOk);
  CHECK(t.out.find("epoch 2 loss") != std::string::npos);
  CHECK(listing(tmp / "run") ==
        std::set<std::string>{"checkpoints", "config.json", "epoch_log.csv", "model.bin", "model.json"});

  const std::string model = (tmp / "run" / "model").string();
  Run e = run({"evaluate", "--checkpoint", model, "--data", data_dir});
  REQUIRE(e.code == cli::kExitOk);
  CHECK(e.out.find("\"macro_ovr_auc\"") != std::string::npos);

  const std::vector<std::string> an{"analyze", "--checkpoint", model, "--data", data_dir, "--mc-samples", "4",
                                    "--seed", "2", "--out-dir"};
  REQUIRE(run(with_dir(an, (tmp / "a1").string())).code == cli::kExitOk);
  REQUIRE(run(with_dir(an, (tmp / "a2").string())).code == cli::kExitOk);
  const std::set<std::string> expected{"predictions.csv",
                                       "entropy_by_model_correctness.csv",
                                       "entropy_by_student_correctness.csv",
                                       "std_by_student_correctness.csv",
                                       "entropy_by_position.csv",
                                       "std_by_position.csv",
                                       "difficulty_by_position.csv",
                                       "entropy_difficulty_correlation.csv",
                                       "metrics.json"};
  CHECK(listing(tmp / "a1") == expected);
  for (const auto& name : expected)
    CHECK(testing::read_bytes(tmp / "a1" / name) == testing::read_bytes(tmp / "a2" / name));

  SUBCASE("data errors exit 2") {
    testing::write_text(tmp / "data" / "questions.jsonl", "{not json\n");
    CHECK(run({"evaluate", "--checkpoint", model, "--data", data_dir}).code == cli::kExitData);
    CHECK(run({"evaluate", "--checkpoint", (tmp / "missing").string(), "--data", (tmp / "data2").string()}).code ==
          cli::kExitData);
  }
  SUBCASE("gradcheck") {
    Run g = run({"gradcheck", "--arch", "sakt"});
    CHECK(g.code == cli::kExitOk);
    CHECK(g.out.find("sakt max_relative_error") != std::string::npos);
  }
}
