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
#include <string>
#include <vector>

namespace ktu::models {

enum class Architecture { kDkt, kSakt, kAkt, kLlmkt };

std::string to_string(Architecture arch);
// Accepts "dkt", "sakt", "akt", "llmkt"; anything else is std::invalid_argument.
Architecture parse_architecture(const std::string& tag);
const std::vector<Architecture>& all_architectures();

// Text fields llmkt concatenates per question.
inline constexpr const char* kQuestionTextField = "question";
inline constexpr const char* kConstructTextField = "construct";

struct ModelConfig {
  Architecture architecture = Architecture::kDkt;
  std::size_t embedding_dim = 128;
  std::size_t hidden_dim = 128;  // LSTM width (dkt)
  std::size_t num_layers = 1;
  std::size_t num_heads = 4;
  std::size_t ffn_dim = 2048;
  std::size_t output_hidden = 512;  // first width of the akt output MLP; the second is half
  double dropout_rate = 0.2;
  bool kq_same = true;  // akt only

  std::size_t llm_truncation_dim = 1024;
  std::vector<std::string> text_fields{kQuestionTextField, kConstructTextField};

  std::size_t n_questions = 0;
  std::size_t n_constructs = 0;
  std::size_t max_length = 100;  // positional table size (sakt)

  std::size_t head_dim() const { return embedding_dim / num_heads; }
  void validate() const;
};

// Full-size settings: width 128, one layer, dropout 0.2 (0.5 for sakt), 4 heads.
ModelConfig full_config(Architecture arch, std::size_t n_questions, std::size_t n_constructs);

// Reduced feed-forward width and text truncation so a full synthetic run fits
// on one core.
ModelConfig desk_config(Architecture arch, std::size_t n_questions, std::size_t n_constructs,
                        std::size_t max_length);

// Very small model for finite-difference checks.
ModelConfig tiny_config(Architecture arch, std::size_t n_questions, std::size_t n_constructs,
                        std::size_t max_length);

std::string model_config_to_json(const ModelConfig& config);
ModelConfig model_config_from_json(const std::string& text);

}  // namespace ktu::models
