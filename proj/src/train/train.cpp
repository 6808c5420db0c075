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

#include "ktu/train/train.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include "json.hpp"
#include "ktu/autodiff/ops.hpp"
#include "ktu/data/batching.hpp"
#include "ktu/error.hpp"
#include "ktu/format.hpp"
#include "ktu/models/forward.hpp"

namespace ktu::train {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

void TrainConfig::validate() const {
  model.validate();
  if (!(learning_rate > 0) || !std::isfinite(learning_rate))
    throw std::invalid_argument("TrainConfig: learning_rate must be positive");
  if (batch_size == 0) throw std::invalid_argument("TrainConfig: batch_size must be at least 1");
  if (!(warmup_fraction >= 0 && warmup_fraction < 1))
    throw std::invalid_argument("TrainConfig: warmup_fraction must lie in [0, 1)");
  if (!(clip_norm > 0)) throw std::invalid_argument("TrainConfig: clip_norm must be positive");
  if (!(adam.beta1 >= 0 && adam.beta1 < 1) || !(adam.beta2 >= 0 && adam.beta2 < 1) || !(adam.epsilon > 0))
    throw std::invalid_argument("TrainConfig: invalid Adam constants");
}

std::string train_config_to_json(const TrainConfig& c) {
  ordered_json j;
  j["model"] = ordered_json::parse(models::model_config_to_json(c.model));
  j["learning_rate"] = c.learning_rate;
  j["batch_size"] = c.batch_size;
  j["epochs"] = c.epochs;
  j["warmup_fraction"] = c.warmup_fraction;
  j["clip_norm"] = c.clip_norm;
  j["adam_beta1"] = c.adam.beta1;
  j["adam_beta2"] = c.adam.beta2;
  j["adam_epsilon"] = c.adam.epsilon;
  j["seed"] = c.seed;
  return j.dump(2);
}

TrainConfig train_config_from_json(const std::string& text) {
  TrainConfig c;
  try {
    const ordered_json j = ordered_json::parse(text);
    static const char* known[] = {"model", "learning_rate", "batch_size", "epochs", "warmup_fraction",
                                  "clip_norm", "adam_beta1", "adam_beta2", "adam_epsilon", "seed"};
    for (const auto& [key, value] : j.items()) {
      bool ok = false;
      for (const char* k : known) ok |= key == k;
      if (!ok) throw DataError("train config: unknown field " + key);
    }
    c.model = models::model_config_from_json(j.at("model").dump());
    c.learning_rate = j.at("learning_rate").get<double>();
    c.batch_size = j.at("batch_size").get<std::size_t>();
    c.epochs = j.at("epochs").get<std::size_t>();
    c.warmup_fraction = j.at("warmup_fraction").get<double>();
    c.clip_norm = j.at("clip_norm").get<double>();
    c.adam.beta1 = j.at("adam_beta1").get<double>();
    c.adam.beta2 = j.at("adam_beta2").get<double>();
    c.adam.epsilon = j.at("adam_epsilon").get<double>();
    c.seed = j.at("seed").get<std::uint64_t>();
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("train config: ") + e.what());
  }
  c.validate();
  return c;
}

std::string epoch_log_csv(const std::vector<EpochLog>& log) {
  std::string out = "epoch,train_loss,val_accuracy,val_f1,val_auc\n";
  for (const auto& e : log)
    out += csv_line({std::to_string(e.epoch), format_double(e.train_loss), format_double(e.val_accuracy),
                     format_double(e.val_f1), format_double(e.val_auc)});
  return out;
}

namespace {

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  out << text;
  if (!out) throw DataError("write failed: " + path.string());
}

std::string epoch_stem(std::size_t epoch) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "epoch_%03zu", epoch);
  return buf;
}

}  // namespace

MetricsReport evaluate(const models::ModelParams& params, const data::DatasetSplit& split,
                       const data::QuestionBank& bank, std::size_t batch_size) {
  std::vector<int> truth, predicted;
  std::vector<double> scores;
  RngStream unused(0, 0);
  for (const data::Batch& b : data::make_batches(split, bank, batch_size)) {
    const ad::NdArray probs = ad::softmax(models::predict_logits(params, b, false, unused), 1);
    for (std::size_t r = 0; r < b.rows; ++r) {
      for (std::size_t t = 0; t < b.lengths[r]; ++t) {
        const std::size_t c = b.at(r, t);
        int best = 0;
        for (int k = 0; k < data::kNumOptions; ++k) {
          const double p = probs.at(c, static_cast<std::size_t>(k));
          scores.push_back(p);
          if (p > probs.at(c, static_cast<std::size_t>(best))) best = k;
        }
        truth.push_back(b.target[c]);
        predicted.push_back(best);
      }
    }
  }
  return compute_metrics(truth, predicted, scores, data::kNumOptions);
}

TrainResult train_model(const TrainConfig& config, const data::DatasetSplit& train_split,
                        const data::DatasetSplit& val_split, const data::QuestionBank& bank,
                        const data::EmbeddingTable* embeddings, const TrainOptions& options) {
  config.validate();
  if (train_split.sequences.empty()) throw std::invalid_argument("train_model: empty training split");
  if (config.model.n_questions != bank.size())
    throw std::invalid_argument("train_model: model expects " + std::to_string(config.model.n_questions) +
                                " questions, bank has " + std::to_string(bank.size()));

  RngStream init_rng(config.seed, stream_id(StreamPurpose::kInit, 0));
  TrainResult result;
  result.params = models::init_params(config.model, init_rng);
  if (config.model.architecture == models::Architecture::kLlmkt) {
    if (!embeddings) throw DataError("train_model: llmkt needs question embeddings");
    models::attach_text_features(result.params, *embeddings, bank);
  }

  fs::path ckpt_dir;
  if (options.run_dir) {
    ckpt_dir = *options.run_dir / "checkpoints";
    fs::create_directories(ckpt_dir);
    write_file(*options.run_dir / "config.json", train_config_to_json(config));
    write_file(*options.run_dir / "epoch_log.csv", epoch_log_csv({}));
  }

  const std::size_t n = train_split.sequences.size();
  const std::size_t steps_per_epoch = (n + config.batch_size - 1) / config.batch_size;
  const LrSchedule schedule = make_schedule(config.learning_rate, config.warmup_fraction,
                                            steps_per_epoch * config.epochs);
  AdamState adam;
  std::string last_good = "initialization";

  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    RngStream shuffle_rng(config.seed, stream_id(StreamPurpose::kShuffle, epoch));
    shuffle_in_place(order, shuffle_rng);

    double loss_sum = 0;
    std::size_t target_sum = 0;
    for (std::size_t start = 0; start < n; start += config.batch_size) {
      std::vector<const data::StudentSequence*> members;
      for (std::size_t i = start; i < std::min(n, start + config.batch_size); ++i)
        members.push_back(&train_split.sequences[order[i]]);
      const data::Batch batch = data::make_batch(members, bank);

      RngStream dropout_rng(config.seed, stream_id(StreamPurpose::kTrainDropout, result.steps));
      ad::GradientTable grads;
      double loss = 0;
      try {
        ad::Tape tape;
        models::ForwardOptions fo;
        fo.dropout_on = true;
        fo.rng = &dropout_rng;
        const models::ForwardOutput out = models::forward(tape, result.params, batch, fo);
        const ad::Var l = models::batch_loss(out, batch);
        loss = l.value().item();
        grads = tape.backward(l);
        clip_by_global_norm(grads, config.clip_norm);
        adam_step(result.params.table, grads, adam,
                  lr_at_step(schedule, static_cast<double>(result.steps + 1)), config.adam);
      } catch (const NumericError& e) {
        throw NumericError("training diverged at epoch " + std::to_string(epoch) + ", step " +
                           std::to_string(result.steps + 1) + " (" + e.what() + "); last good state: " + last_good);
      }
      ++result.steps;
      loss_sum += loss * static_cast<double>(batch.target_count());
      target_sum += batch.target_count();
    }

    EpochLog entry;
    entry.epoch = epoch;
    entry.train_loss = loss_sum / static_cast<double>(target_sum);
    if (!val_split.sequences.empty()) {
      const MetricsReport m = evaluate(result.params, val_split, bank, config.batch_size);
      entry.val_accuracy = m.accuracy;
      entry.val_f1 = m.macro_f1;
      entry.val_auc = m.macro_ovr_auc;
    }
    result.log.push_back(entry);

    if (options.run_dir) {
      models::save_checkpoint(ckpt_dir / "last", result.params);
      if (options.keep_epoch_checkpoints) models::save_checkpoint(ckpt_dir / epoch_stem(epoch), result.params);
      write_file(*options.run_dir / "epoch_log.csv", epoch_log_csv(result.log));
      last_good = (ckpt_dir / "last").string() + " (epoch " + std::to_string(epoch) + ")";
    } else {
      last_good = "epoch " + std::to_string(epoch);
    }
    if (options.on_epoch) options.on_epoch(entry);
  }

  if (options.run_dir) models::save_checkpoint(*options.run_dir / "model", result.params);
  return result;
}

}  // namespace ktu::train
