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
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "ktu/data/dataset.hpp"
#include "ktu/data/embeddings.hpp"
#include "ktu/models/config.hpp"
#include "ktu/models/params.hpp"
#include "ktu/train/metrics.hpp"
#include "ktu/train/optim.hpp"

namespace ktu::train {

struct TrainConfig {
  models::ModelConfig model;
  double learning_rate = 3e-4;
  std::size_t batch_size = 64;
  std::size_t epochs = 100;
  double warmup_fraction = 0.1;
  double clip_norm = 5.0;
  AdamConfig adam;
  std::uint64_t seed = 0;

  void validate() const;
};

std::string train_config_to_json(const TrainConfig& config);
TrainConfig train_config_from_json(const std::string& text);

struct EpochLog {
  std::size_t epoch = 0;  // 1-based
  double train_loss = 0.0;
  double val_accuracy = 0.0;
  double val_f1 = 0.0;
  double val_auc = 0.0;
  bool operator==(const EpochLog&) const = default;
};

struct TrainOptions {
  // When set: config.json, epoch_log.csv, checkpoints/last after every epoch
  // (and checkpoints/epoch_NNN with keep_epoch_checkpoints), model at the end.
  std::optional<std::filesystem::path> run_dir;
  bool keep_epoch_checkpoints = false;
  std::function<void(const EpochLog&)> on_epoch;
};

struct TrainResult {
  models::ModelParams params;
  std::vector<EpochLog> log;
  std::size_t steps = 0;
};

// Needs `embeddings` for llmkt. With val empty the validation columns are 0.
TrainResult train_model(const TrainConfig& config, const data::DatasetSplit& train_split,
                        const data::DatasetSplit& val_split, const data::QuestionBank& bank,
                        const data::EmbeddingTable* embeddings, const TrainOptions& options = {});

// Deterministic (dropout off) predictions over every non-padding position.
MetricsReport evaluate(const models::ModelParams& params, const data::DatasetSplit& split,
                       const data::QuestionBank& bank, std::size_t batch_size = 64);

std::string epoch_log_csv(const std::vector<EpochLog>& log);

}  // namespace ktu::train
