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
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "ktu/models/forward.hpp"
#include "ktu/sim/simulator.hpp"
#include "ktu/uncertainty/mc_dropout.hpp"

using namespace ktu;
using namespace ktu::mc;

namespace {

// mpmath, 40 digits.
constexpr double kLn4 = 1.386294361119890618834464242916353136151;
constexpr double kEntropy7111 = 0.9404479886553263704442445342741383968551;

std::vector<PredictiveSample> make_samples(std::vector<std::vector<double>> rows) {
  std::vector<PredictiveSample> out;
  for (std::size_t m = 0; m < rows.size(); ++m) out.push_back({m, rows[m]});
  return out;
}

std::vector<double> random_distribution(RngStream& rng) {
  std::vector<double> w(4);
  double s = 0;
  for (double& x : w) s += (x = -std::log1p(-rng.uniform()));
  for (double& x : w) x /= s;
  return w;
}

// Direct transcription: mu_k = (1/M) sum_m p_k^m, sigma_k = sqrt((1/M) sum_m (p_k^m - mu_k)^2).
StdDev brute_force_std(const std::vector<PredictiveSample>& s) {
  StdDev out;
  const double m = static_cast<double>(s.size());
  for (std::size_t k = 0; k < 4; ++k) {
    double mu = 0;
    for (const auto& x : s) mu += x.probs[k];
    mu /= m;
    double var = 0;
    for (const auto& x : s) var += (x.probs[k] - mu) * (x.probs[k] - mu);
    out.class_std.push_back(std::sqrt(var / m));
  }
  out.mean_std = (out.class_std[0] + out.class_std[1] + out.class_std[2] + out.class_std[3]) / 4.0;
  return out;
}

sim::SimDataset tiny_data() {
  sim::SimConfig c;
  c.n_students = 3;
  c.n_questions = 20;
  c.sequence_length = 10;
  c.embedding_dimension = 8;
  return sim::generate_dataset(c);
}

models::ModelParams tiny_params(models::Architecture a, const sim::SimDataset& d) {
  RngStream rng(8, 0);
  auto p = models::init_params(models::tiny_config(a, d.bank.size(), d.bank.construct_count(), 10), rng);
  if (a == models::Architecture::kLlmkt) models::attach_text_features(p, d.embeddings, d.bank);
  return p;
}

}  // namespace

TEST_CASE("entropy closed forms") {
  CHECK(std::abs(entropy(std::vector<double>{0.25, 0.25, 0.25, 0.25}) - kLn4) < 1e-12);
  CHECK(entropy(std::vector<double>{0, 0, 1, 0}) == 0.0);
  CHECK(std::abs(entropy(std::vector<double>{0.7, 0.1, 0.1, 0.1}) - kEntropy7111) < 1e-12);
  auto uniform = make_samples({{0.25, 0.25, 0.25, 0.25}});
  CHECK(std::abs(total_entropy(uniform) - kLn4) < 1e-12);
  // Two one-hot samples average to a two-way split.
  auto split = make_samples({{1, 0, 0, 0}, {0, 1, 0, 0}});
  CHECK(std::abs(total_entropy(split) - std::log(2.0)) < 1e-15);
}

TEST_CASE("entropy matches the arbitrary-precision oracle") {
  std::ifstream in(std::string(KTU_TEST_DATA_DIR) + "/entropy_oracle.txt");
  REQUIRE(in);
  std::string line;
  int cases = 0;
  double worst = 0;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream is(line);
    std::size_t m;
    is >> m;
    std::vector<std::vector<double>> rows(m, std::vector<double>(4));
    std::string tok;
    for (auto& r : rows)
      for (double& x : r) {
        is >> tok;
        x = std::strtod(tok.c_str(), nullptr);
      }
    is >> tok;
    const double expected = std::strtod(tok.c_str(), nullptr);
    const double got = total_entropy(make_samples(rows));
    worst = std::max(worst, std::abs(got - expected));
    ++cases;
  }
  CHECK(cases == 1000);
  INFO("worst deviation " << worst);
  CHECK(worst < 1e-12);
}

TEST_CASE("prediction_stddev hand cases") {
  StdDev a = prediction_stddev(make_samples({{1, 0, 0, 0}, {0, 1, 0, 0}}));
  CHECK(a.class_std == std::vector<double>{0.5, 0.5, 0.0, 0.0});
  CHECK(a.mean_std == 0.25);

  // 0.6 and 0.4 are not binary fractions. The expected values are the formula
  // evaluated exactly (mpmath) on the stored doubles, rounded once.
  StdDev b = prediction_stddev(make_samples({{0.6, 0.2, 0.1, 0.1}, {0.4, 0.2, 0.2, 0.2}}));
  CHECK(b.class_std[0] == 0x1.9999999999998p-4);
  CHECK(b.class_std[1] == 0.0);
  CHECK(b.class_std[2] == 0.05);
  CHECK(b.class_std[3] == 0.05);
  CHECK(b.mean_std == 0x1.9999999999999p-5);
  CHECK(std::abs(b.mean_std - 0.05) < 1e-17);
}

TEST_CASE("prediction_stddev matches a two-loop reference") {
  RngStream rng(21, 0);
  double worst = 0;
  for (int c = 0; c < 1000; ++c) {
    const std::size_t m = 1 + rng.below(40);
    std::vector<std::vector<double>> rows;
    for (std::size_t i = 0; i < m; ++i) rows.push_back(random_distribution(rng));
    auto s = make_samples(rows);
    StdDev got = prediction_stddev(s);
    StdDev ref = brute_force_std(s);
    for (std::size_t k = 0; k < 4; ++k) {
      worst = std::max(worst, std::abs(got.class_std[k] - ref.class_std[k]));
      CHECK(got.class_std[k] <= 0.5);
    }
    worst = std::max(worst, std::abs(got.mean_std - ref.mean_std));
  }
  CHECK(worst < 1e-12);
}

TEST_CASE("summary properties") {
  RngStream rng(5, 0);
  for (int c = 0; c < 300; ++c) {
    std::vector<std::vector<double>> rows;
    const std::size_t m = 1 + rng.below(12);
    for (std::size_t i = 0; i < m; ++i) rows.push_back(random_distribution(rng));
    auto s = make_samples(rows);
    PredictiveSummary sum = summarize(s);
    CHECK(sum.samples == m);
    CHECK(sum.total_entropy >= 0.0);
    CHECK(sum.total_entropy <= kLn4 + 1e-15);
    double mean_h = 0;
    for (const auto& r : rows) mean_h += entropy(r);
    CHECK(sum.total_entropy >= mean_h / static_cast<double>(m) - 1e-14);
    double total = 0;
    for (double p : sum.mean_probs) total += p;
    CHECK(std::abs(total - 1.0) < 1e-12);

    auto shuffled = s;
    shuffle_in_place(shuffled, rng);
    PredictiveSummary again = summarize(shuffled);
    CHECK(again.total_entropy == sum.total_entropy);
    CHECK(again.mean_std == sum.mean_std);
    CHECK(again.mean_probs == sum.mean_probs);
  }

  SUBCASE("identical samples aggregate to themselves") {
    std::vector<double> p{0.1, 0.2, 0.3, 0.4};
    auto s = make_samples(std::vector<std::vector<double>>(7, p));
    PredictiveSummary sum = summarize(s);
    CHECK(sum.mean_probs == p);
    CHECK(sum.mean_std == 0.0);
    CHECK(sum.total_entropy == entropy(p));
    for (double v : sum.class_std) CHECK(v == 0.0);
  }
  SUBCASE("ties go to the lowest index") {
    CHECK(summarize(make_samples({{0.5, 0.5, 0, 0}})).predicted_class == 0);
    CHECK(summarize(make_samples({{0, 0.3, 0.3, 0.4}, {0, 0.5, 0.5, 0}})).predicted_class == 1);
  }
  SUBCASE("errors") {
    std::vector<PredictiveSample> none;
    CHECK_THROWS_AS(summarize(none), std::invalid_argument);
    CHECK_THROWS_AS(total_entropy(none), std::invalid_argument);
    CHECK_THROWS_AS(prediction_stddev(none), std::invalid_argument);
    auto ragged = make_samples({{0.5, 0.5}, {0.2, 0.3, 0.5}});
    CHECK_THROWS_AS(summarize(ragged), std::invalid_argument);
    McConfig zero{0, 1};
    CHECK_THROWS_AS(zero.validate(), std::invalid_argument);
  }
  SUBCASE("argmax is unchanged by a logit shift") {
    for (int c = 0; c < 100; ++c) {
      std::vector<double> logits(4);
      for (double& x : logits) x = rng.normal(0, 3);
      ad::NdArray a = ad::softmax(ad::NdArray::vector(logits), 0);
      for (double& x : logits) x += 17.25;
      ad::NdArray b = ad::softmax(ad::NdArray::vector(logits), 0);
      CHECK(argmax(a.values()) == argmax(b.values()));
    }
  }
}

TEST_CASE("mc_predict") {
  sim::SimDataset d = tiny_data();
  data::Batch batch = data::make_batches(d.train, d.bank, 8).at(0);
  const std::size_t cells = batch.rows * batch.steps;

  for (models::Architecture a : models::all_architectures()) {
    INFO(models::to_string(a));
    models::ModelParams p = tiny_params(a, d);
    McConfig mc{6, 123};
    auto first = mc_predict(p, batch, mc);
    auto second = mc_predict(p, batch, mc);
    REQUIRE(first.size() == cells);
    for (std::size_t c = 0; c < cells; ++c) {
      REQUIRE(first[c].size() == 6);
      for (std::size_t m = 0; m < 6; ++m) {
        CHECK(first[c][m].index == m);
        CHECK(first[c][m].probs == second[c][m].probs);
      }
    }
    bool varied = false;
    for (std::size_t c = 0; c < cells; ++c) varied |= first[c][0].probs != first[c][1].probs;
    CHECK(varied);

    SUBCASE("M = 1 is one dropout-on forward with stream (base_seed, 0)") {
      auto one = mc_predict(p, batch, McConfig{1, 123});
      RngStream rng(123, 0);
      ad::NdArray probs = ad::softmax(models::predict_logits(p, batch, true, rng), 1);
      for (std::size_t c = 0; c < cells; ++c)
        for (std::size_t k = 0; k < 4; ++k) CHECK(one[c][0].probs[k] == probs.at(c, k));
    }
    SUBCASE("dropout rate 0 collapses the samples") {
      models::ModelParams off = p;
      off.config.dropout_rate = 0.0;
      auto s = mc_predict(off, batch, McConfig{5, 9});
      RngStream unused(0, 0);
      ad::NdArray single = ad::softmax(models::predict_logits(off, batch, false, unused), 1);
      for (std::size_t c = 0; c < cells; ++c) {
        for (std::size_t m = 1; m < 5; ++m) CHECK(s[c][m].probs == s[c][0].probs);
        PredictiveSummary sum = summarize(s[c]);
        CHECK(sum.mean_std == 0.0);
        std::vector<double> row(single.data() + c * 4, single.data() + c * 4 + 4);
        CHECK(sum.total_entropy == entropy(row));
      }
    }
  }
}
