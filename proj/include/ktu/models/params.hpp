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
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "ktu/autodiff/ndarray.hpp"
#include "ktu/autodiff/rng.hpp"
#include "ktu/autodiff/tape.hpp"
#include "ktu/data/dataset.hpp"
#include "ktu/data/embeddings.hpp"
#include "ktu/models/config.hpp"

namespace ktu::models {

using ad::NdArray;
using ad::Shape;

enum class InitKind {
  kMatrix,     // uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)), fan_in = rows
  kBias,       // zeros
  kEmbedding,  // N(0, 0.02)
  kGain,       // ones
};

struct ParamSpec {
  std::string name;
  Shape shape;
  InitKind init;
};

// Every parameter the architecture's forward pass reads, in a fixed order.
std::vector<ParamSpec> parameter_specs(const ModelConfig& config);

struct ModelParams {
  ModelConfig config;
  ad::ParamTable table;
  // llmkt only: (n_questions, fields * truncation) text vectors in bank order.
  // Derived from an EmbeddingTable, never trained or checkpointed.
  NdArray text_features;

  std::size_t parameter_count() const;
};

ModelParams init_params(const ModelConfig& config, RngStream& rng);

// Names of the query and key projections of an attention block. Identical
// when the block shares them (akt with kq_same).
std::pair<std::string, std::string> query_key_names(const ModelConfig& config, const std::string& block);

NdArray text_feature_matrix(const ModelConfig& config, const data::EmbeddingTable& table,
                            const data::QuestionBank& bank);
void attach_text_features(ModelParams& params, const data::EmbeddingTable& table,
                          const data::QuestionBank& bank);

// Checkpoints are a JSON manifest next to a blob of little-endian float64
// values, one parameter after another in manifest order.
struct CheckpointPaths {
  std::filesystem::path manifest;
  std::filesystem::path blob;
};
CheckpointPaths checkpoint_paths(const std::filesystem::path& stem);

inline constexpr int kCheckpointFormatVersion = 1;

void save_checkpoint(const std::filesystem::path& stem, const ModelParams& params);
ModelParams load_checkpoint(const std::filesystem::path& stem);

}  // namespace ktu::models
