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

#include <cmath>
#include <numbers>

#include "doctest.h"
#include "ktu/autodiff/ops.hpp"
#include "ktu/data/batching.hpp"
#include "ktu/models/forward.hpp"
#include "ktu/sim/simulator.hpp"
#include "ktu/train/train.hpp"
#include "test_util.hpp"

using namespace ktu;
using namespace ktu::train;

namespace {

// Fraction of (positive, negative) pairs ranked correctly, ties counted half.
double pairwise_auc(const std::vector<double>& s, const std::vector<int>& y, int k) {
  double good = 0, pairs = 0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (y[i] != k) continue;
    for (std::size_t j = 0; j < s.size(); ++j) {
      if (y[j] == k) continue;
      pairs += 1;
      good += s[i] > s[j] ? 1.0 : s[i] == s[j] ? 0.5 : 0.0;
    }
  }
  return good / pairs;
}

sim::SimDataset small_data(std::size_t students) {
  sim::SimConfig c;
  c.n_students = students;
  c.n_questions = 30;
  c.sequence_length = 10;
  c.embedding_dimension = 8;
  return sim::generate_dataset(c);
}

double eval_loss(const models::ModelParams& p, const data::Batch& b) {
  ad::Tape tape;
  models::ForwardOutput out = models::forward(tape, p, b, {});
  return models::batch_loss(out, b).value().item();
}

}  // namespace

TEST_CASE("metrics hand cases") {
  // truth 0,0,1,1 predicted 0,0,0,1: confusion [[2,0],[1,1]].
  std::vector<int> truth{0, 0, 1, 1}, pred{0, 0, 0, 1};
  std::vector<double> scores{0.9, 0.1, 0.8, 0.2, 0.6, 0.4, 0.3, 0.7};
  MetricsReport r = compute_metrics(truth, pred, scores, 2);
  CHECK(r.confusion == ConfusionMatrix{{2, 0}, {1, 1}});
  CHECK(r.accuracy == 0.75);
  // Class 0: tp 2 fp 1 fn 0 -> 4/5. Class 1: tp 1 fp 0 fn 1 -> 2/3.
  CHECK(std::abs(r.f1[0] - 0.8) < 1e-15);
  CHECK(std::abs(r.f1[1] - 2.0 / 3.0) < 1e-15);
  CHECK(std::abs(r.macro_f1 - 11.0 / 15.0) < 1e-15);
  CHECK(r.precision[0] == doctest::Approx(2.0 / 3.0));
  CHECK(r.recall[1] == 0.5);
  CHECK(r.macro_ovr_auc == 1.0);

  // A class absent from truth and predictions still counts, with F1 0.
  MetricsReport four = compute_metrics(truth, pred, std::vector<double>(16, 0.25), 4);
  CHECK(std::abs(four.macro_f1 - (0.8 + 2.0 / 3.0) / 4) < 1e-15);
  CHECK(four.macro_ovr_auc == 0.5);
  CHECK(std::isnan(four.class_auc[2]));

  SUBCASE("perfect predictions") {
    std::vector<int> y{0, 1, 2, 3, 3, 2, 1, 0};
    std::vector<double> s;
    for (int k : y)
      for (int c = 0; c < 4; ++c) s.push_back(c == k ? 0.7 : 0.1);
    MetricsReport p = compute_metrics(y, y, s, 4);
    CHECK(p.accuracy == 1.0);
    CHECK(p.macro_f1 == 1.0);
    CHECK(p.macro_ovr_auc == 1.0);
  }
  SUBCASE("errors") {
    std::vector<int> none;
    CHECK_THROWS_AS(compute_metrics(none, none, {}, 4), std::invalid_argument);
    std::vector<int> bad{5};
    CHECK_THROWS_AS(compute_metrics(bad, bad, std::vector<double>(4, 0.25), 4), std::out_of_range);
    CHECK_THROWS_AS(compute_metrics(truth, pred, scores, 4), std::invalid_argument);
  }
}

TEST_CASE("metrics properties") {
  RngStream rng(31, 0);
  for (int c = 0; c < 100; ++c) {
    const std::size_t n = 5 + rng.below(60);
    std::vector<int> y(n), pred(n);
    std::vector<double> s(n * 4);
    for (std::size_t i = 0; i < n; ++i) {
      y[i] = static_cast<int>(rng.below(4));
      pred[i] = static_cast<int>(rng.below(4));
      // Coarse scores so ties occur.
      for (int k = 0; k < 4; ++k) s[i * 4 + k] = static_cast<double>(rng.below(6)) / 5.0;
    }
    MetricsReport r = compute_metrics(y, pred, s, 4);
    std::size_t total = 0, trace = 0;
    for (std::size_t a = 0; a < 4; ++a)
      for (std::size_t b = 0; b < 4; ++b) total += r.confusion[a][b];
    for (std::size_t a = 0; a < 4; ++a) trace += r.confusion[a][a];
    CHECK(total == n);
    CHECK(r.accuracy == static_cast<double>(trace) / static_cast<double>(n));
    for (double v : {r.accuracy, r.macro_f1, r.macro_ovr_auc}) {
      CHECK(v >= 0.0);
      CHECK(v <= 1.0);
    }
    for (int k = 0; k < 4; ++k) {
      std::vector<double> col(n), warped(n);
      for (std::size_t i = 0; i < n; ++i) {
        col[i] = s[i * 4 + k];
        warped[i] = std::exp(3 * col[i]) - 7;
      }
      const double auc = one_vs_rest_auc(col, y, k);
      if (std::isnan(auc)) continue;
      CHECK(std::abs(auc - pairwise_auc(col, y, k)) < 1e-12);
      CHECK(one_vs_rest_auc(warped, y, k) == auc);
    }
  }
}

TEST_CASE("learning rate schedule") {
  LrSchedule s = make_schedule(3e-4, 0.1, 1000);
  CHECK(s.warmup_steps == 100);
  CHECK(lr_at_step(s, 0) == 0.0);
  CHECK(lr_at_step(s, 100) == 3e-4);
  CHECK(std::abs(lr_at_step(s, 100 - 1e-12) - 3e-4) < 1e-15);
  CHECK(std::abs(lr_at_step(s, 100 + 1e-12) - 3e-4) < 1e-15);
  CHECK(std::abs(lr_at_step(s, 550) - 1.5e-4) < 1e-15);
  CHECK(std::abs(lr_at_step(s, 1000)) < 1e-18);
  CHECK(lr_at_step(s, 50) == doctest::Approx(1.5e-4));
  double prev = lr_at_step(s, 100);
  for (int t = 101; t <= 1000; ++t) {
    const double lr = lr_at_step(s, t);
    CHECK(lr <= prev);
    prev = lr;
  }
  CHECK_THROWS_AS(lr_at_step(s, 1001), std::out_of_range);
  CHECK_THROWS_AS(lr_at_step(s, -1), std::out_of_range);
  CHECK_THROWS_AS(make_schedule(0.0, 0.1, 10), std::invalid_argument);
  CHECK_THROWS_AS(make_schedule(1e-3, 1.0, 10), std::invalid_argument);
  LrSchedule none = make_schedule(1e-3, 0.0, 10);
  CHECK(lr_at_step(none, 0) == 1e-3);
}

TEST_CASE("adam") {
  const ad::NdArray one = ad::NdArray::scalar(1.0);
  SUBCASE("first step magnitude") {
    ad::ParamTable p{{"w", ad::NdArray::scalar(2.0)}};
    AdamState st;
    adam_step(p, {{"w", one}}, st, 0.001);
    const double delta = 2.0 - p["w"].item();
    CHECK(delta > 0.000999);
    CHECK(delta < 0.001);
    CHECK(st.step == 1);

    ad::ParamTable q{{"w", ad::NdArray::scalar(2.0)}};
    AdamState st10;
    adam_step(q, {{"w", ad::NdArray::scalar(10.0)}}, st10, 0.001);
    CHECK(std::abs((2.0 - q["w"].item()) - delta) < 1e-6);
  }
  SUBCASE("zero gradients leave parameters alone") {
    ad::ParamTable p{{"w", ad::NdArray::vector({1.5, -2.0})}};
    AdamState st;
    adam_step(p, {{"w", ad::NdArray::vector({0.2, 0.4})}}, st, 0.01);
    const ad::NdArray before = p["w"];
    const double m0 = st.first_moment["w"][0], v0 = st.second_moment["w"][0];
    adam_step(p, {{"w", ad::NdArray::vector({0.0, 0.0})}}, st, 0.01);
    // The moments carry the previous step, so the parameter still moves; a
    // fresh state with zero gradients does not.
    CHECK(st.first_moment["w"][0] == 0.9 * m0);
    CHECK(st.second_moment["w"][0] == 0.999 * v0);
    ad::ParamTable r{{"w", before}};
    AdamState fresh;
    adam_step(r, {{"w", ad::NdArray::vector({0.0, 0.0})}}, fresh, 0.01);
    CHECK(r["w"].same_values(before));
  }
  SUBCASE("errors") {
    ad::ParamTable p{{"w", ad::NdArray::vector({1.0, 2.0})}};
    AdamState st;
    CHECK_THROWS_AS(adam_step(p, {{"w", one}}, st, 0.01), ShapeError);
    CHECK_THROWS_AS(adam_step(p, {}, st, 0.01), std::invalid_argument);
    CHECK_THROWS_AS(adam_step(p, {{"w", ad::NdArray::vector({1.0, 1.0})}, {"x", one}}, st, 0.01),
                    std::invalid_argument);
    CHECK(st.step == 0);
  }
  SUBCASE("clipping") {
    ad::GradientTable g{{"a", ad::NdArray::vector({3.0, 0.0})}, {"b", ad::NdArray::scalar(4.0)}};
    CHECK(clip_by_global_norm(g, 10.0) == 5.0);
    CHECK(g["a"][0] == 3.0);
    CHECK(clip_by_global_norm(g, 1.0) == 5.0);
    CHECK(std::abs(global_norm(g) - 1.0) < 1e-15);
    CHECK(std::abs(g["b"].item() - 0.8) < 1e-15);
  }
}

TEST_CASE("train config") {
  TrainConfig c;
  c.model = models::tiny_config(models::Architecture::kAkt, 30, 6, 10);
  c.seed = 99;
  c.learning_rate = 1e-3;
  TrainConfig back = train_config_from_json(train_config_to_json(c));
  CHECK(train_config_to_json(back) == train_config_to_json(c));
  CHECK_THROWS_AS(train_config_from_json("{}"), DataError);
  std::string extra = train_config_to_json(c);
  extra.insert(1, "\"bogus\": 1,");
  CHECK_THROWS_AS(train_config_from_json(extra), DataError);
  c.warmup_fraction = 1.0;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  c.warmup_fraction = 0.1;
  c.learning_rate = 0.0;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
}

TEST_CASE("training smoke runs") {
  sim::SimDataset d = small_data(6);
  data::DatasetSplit four{"train", {d.sequences.begin(), d.sequences.begin() + 4}};
  data::DatasetSplit val{"val", {d.sequences.begin() + 4, d.sequences.end()}};
  const data::Batch batch = data::make_batches(four, d.bank, 4).at(0);

  for (models::Architecture a : models::all_architectures()) {
    INFO(models::to_string(a));
    TrainConfig c;
    c.model = models::tiny_config(a, d.bank.size(), d.bank.construct_count(), 10);
    c.batch_size = 4;
    c.epochs = 50;
    c.learning_rate = 1e-2;
    c.seed = 3;

    TrainConfig zero = c;
    zero.epochs = 0;
    TrainResult init = train_model(zero, four, val, d.bank, &d.embeddings);
    CHECK(init.log.empty());
    CHECK(init.steps == 0);
    RngStream rng(3, stream_id(StreamPurpose::kInit, 0));
    models::ModelParams fresh = models::init_params(c.model, rng);
    for (const auto& [name, v] : fresh.table) CHECK(init.params.table.at(name).same_values(v));

    TrainResult r = train_model(c, four, val, d.bank, &d.embeddings);
    CHECK(r.steps == 50);
    REQUIRE(r.log.size() == 50);
    const double before = eval_loss(init.params, batch);
    const double after = eval_loss(r.params, batch);
    CHECK(after < before);
    CHECK(r.log.back().train_loss < r.log.front().train_loss);

    c.epochs = 3;
    TrainResult x = train_model(c, four, val, d.bank, &d.embeddings);
    TrainResult y = train_model(c, four, val, d.bank, &d.embeddings);
    CHECK(x.log == y.log);
    for (const auto& [name, v] : x.params.table) CHECK(y.params.table.at(name).same_values(v));
    c.seed = 4;
    TrainResult z = train_model(c, four, val, d.bank, &d.embeddings);
    CHECK(!(z.log == x.log));
  }
}

TEST_CASE("training run directory") {
  sim::SimDataset d = small_data(8);
  testing::TempDir tmp;
  TrainConfig c;
  c.model = models::tiny_config(models::Architecture::kSakt, d.bank.size(), d.bank.construct_count(), 10);
  c.batch_size = 3;
  c.epochs = 2;
  c.seed = 5;
  TrainOptions opt;
  opt.run_dir = tmp.path() / "run";
  opt.keep_epoch_checkpoints = true;
  std::vector<std::size_t> seen;
  opt.on_epoch = [&](const EpochLog& e) { seen.push_back(e.epoch); };
  TrainResult r = train_model(c, d.train, d.val, d.bank, nullptr, opt);
  CHECK(seen == std::vector<std::size_t>{1, 2});

  const auto run = tmp.path() / "run";
  CHECK(train_config_from_json(testing::read_bytes(run / "config.json")).seed == 5);
  CHECK(testing::read_bytes(run / "epoch_log.csv") == epoch_log_csv(r.log));
  CHECK(testing::read_bytes(run / "epoch_log.csv").rfind("epoch,train_loss,val_accuracy,val_f1,val_auc\n", 0) == 0);
  for (const char* stem : {"checkpoints/epoch_001", "checkpoints/epoch_002", "checkpoints/last", "model"}) {
    INFO(stem);
    CHECK(std::filesystem::exists(models::checkpoint_paths(run / stem).blob));
  }
  models::ModelParams back = models::load_checkpoint(run / "model");
  for (const auto& [name, v] : r.params.table) CHECK(back.table.at(name).same_values(v));

  MetricsReport m = evaluate(back, d.val, d.bank);
  CHECK(m.accuracy == r.log.back().val_accuracy);
  CHECK(m.macro_f1 == r.log.back().val_f1);
  CHECK(m.n_predictions == d.val.interaction_count());

  SUBCASE("errors") {
    data::DatasetSplit empty;
    CHECK_THROWS_AS(train_model(c, empty, d.val, d.bank, nullptr), std::invalid_argument);
    CHECK_THROWS_AS(evaluate(back, empty, d.bank), std::invalid_argument);
    TrainConfig l = c;
    l.model = models::tiny_config(models::Architecture::kLlmkt, d.bank.size(), d.bank.construct_count(), 10);
    CHECK_THROWS_AS(train_model(l, d.train, d.val, d.bank, nullptr), DataError);
    TrainConfig wrong = c;
    wrong.model.n_questions += 1;
    CHECK_THROWS_AS(train_model(wrong, d.train, d.val, d.bank, nullptr), std::invalid_argument);
  }
  SUBCASE("divergence aborts") {
    TrainConfig hot = c;
    hot.learning_rate = 1e300;
    hot.clip_norm = 1e300;
    TrainOptions o2;
    o2.run_dir = tmp.path() / "hot";
    try {
      train_model(hot, d.train, d.val, d.bank, nullptr, o2);
      FAIL("expected divergence");
    } catch (const NumericError& e) {
      CHECK(std::string(e.what()).find("training diverged") != std::string::npos);
    }
  }
}

TEST_CASE("llmkt text embeddings carry signal") {
  sim::SimConfig sc;
  sc.n_students = 180;
  sc.n_questions = 60;
  sc.sequence_length = 20;
  sc.embedding_dimension = 32;
  sc.seed = 13;
  sim::SimDataset d = sim::generate_dataset(sc);

  data::EmbeddingTable zeros(d.embeddings.dimension());
  for (const auto& key : d.embeddings.keys()) zeros.add(key, std::vector<double>(d.embeddings.dimension(), 0.0));

  TrainConfig c;
  c.model = models::desk_config(models::Architecture::kLlmkt, d.bank.size(), d.bank.construct_count(), 20);
  c.model.llm_truncation_dim = 32;
  c.epochs = 12;
  c.batch_size = 32;
  c.learning_rate = 1e-3;
  c.seed = 21;
  const TrainResult real = train_model(c, d.train, d.val, d.bank, &d.embeddings);
  const TrainResult blank = train_model(c, d.train, d.val, d.bank, &zeros);
  INFO("real " << real.log.back().val_accuracy << " zeros " << blank.log.back().val_accuracy);
  CHECK(real.log.back().val_accuracy > blank.log.back().val_accuracy);
}
