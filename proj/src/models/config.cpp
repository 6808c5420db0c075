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

#include "ktu/models/config.hpp"

#include <stdexcept>

#include "json.hpp"
#include "ktu/error.hpp"

namespace ktu::models {

std::string to_string(Architecture arch) {
  switch (arch) {
    case Architecture::kDkt: return "dkt";
    case Architecture::kSakt: return "sakt";
    case Architecture::kAkt: return "akt";
    case Architecture::kLlmkt: return "llmkt";
  }
  throw std::invalid_argument("unknown architecture tag " + std::to_string(static_cast<int>(arch)));
}

Architecture parse_architecture(const std::string& tag) {
  for (Architecture a : all_architectures())
    if (to_string(a) == tag) return a;
  throw std::invalid_argument("unknown architecture '" + tag + "' (expected dkt, sakt, akt or llmkt)");
}

const std::vector<Architecture>& all_architectures() {
  static const std::vector<Architecture> all{Architecture::kDkt, Architecture::kSakt, Architecture::kAkt,
                                             Architecture::kLlmkt};
  return all;
}

void ModelConfig::validate() const {
  (void)to_string(architecture);
  if (embedding_dim == 0 || hidden_dim == 0 || num_layers == 0 || num_heads == 0 || ffn_dim == 0 ||
      output_hidden < 2) {
    throw std::invalid_argument("ModelConfig: dimensions must be positive");
  }
  if (embedding_dim % num_heads != 0) {
    throw std::invalid_argument("ModelConfig: num_heads " + std::to_string(num_heads) +
                                " does not divide embedding_dim " + std::to_string(embedding_dim));
  }
  if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) {
    throw std::invalid_argument("ModelConfig: dropout_rate must lie in [0, 1)");
  }
  if (n_questions == 0) throw std::invalid_argument("ModelConfig: n_questions must be positive");
  if (max_length == 0) throw std::invalid_argument("ModelConfig: max_length must be positive");
  if (architecture == Architecture::kLlmkt) {
    if (llm_truncation_dim == 0) throw std::invalid_argument("ModelConfig: llm_truncation_dim must be positive");
    if (text_fields.empty()) throw std::invalid_argument("ModelConfig: llmkt needs at least one text field");
    for (const auto& f : text_fields) {
      if (f != kQuestionTextField && f != kConstructTextField) {
        throw std::invalid_argument("ModelConfig: unknown text field '" + f + "'");
      }
    }
  }
}

ModelConfig full_config(Architecture arch, std::size_t n_questions, std::size_t n_constructs) {
  ModelConfig c;
  c.architecture = arch;
  c.n_questions = n_questions;
  c.n_constructs = n_constructs;
  c.dropout_rate = arch == Architecture::kSakt ? 0.5 : 0.2;
  return c;
}

ModelConfig desk_config(Architecture arch, std::size_t n_questions, std::size_t n_constructs,
                        std::size_t max_length) {
  ModelConfig c = full_config(arch, n_questions, n_constructs);
  c.ffn_dim = 256;
  c.output_hidden = 256;
  c.llm_truncation_dim = 512;
  c.max_length = max_length;
  return c;
}

ModelConfig tiny_config(Architecture arch, std::size_t n_questions, std::size_t n_constructs,
                        std::size_t max_length) {
  ModelConfig c = full_config(arch, n_questions, n_constructs);
  c.embedding_dim = 8;
  c.hidden_dim = 6;
  c.num_heads = 2;
  c.ffn_dim = 12;
  c.output_hidden = 8;
  c.llm_truncation_dim = 5;
  c.max_length = max_length;
  return c;
}

std::string model_config_to_json(const ModelConfig& c) {
  nlohmann::ordered_json j;
  j["architecture"] = to_string(c.architecture);
  j["embedding_dim"] = c.embedding_dim;
  j["hidden_dim"] = c.hidden_dim;
  j["num_layers"] = c.num_layers;
  j["num_heads"] = c.num_heads;
  j["ffn_dim"] = c.ffn_dim;
  j["output_hidden"] = c.output_hidden;
  j["dropout_rate"] = c.dropout_rate;
  j["kq_same"] = c.kq_same;
  j["llm_truncation_dim"] = c.llm_truncation_dim;
  j["text_fields"] = c.text_fields;
  j["n_questions"] = c.n_questions;
  j["n_constructs"] = c.n_constructs;
  j["max_length"] = c.max_length;
  return j.dump(2);
}

ModelConfig model_config_from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw DataError(std::string("ModelConfig: malformed JSON (") + e.what() + ")");
  }
  if (!j.is_object()) throw DataError("ModelConfig: expected a JSON object");
  ModelConfig c;
  for (const auto& [key, value] : j.items()) {
    try {
      if (key == "architecture") c.architecture = parse_architecture(value.get<std::string>());
      else if (key == "embedding_dim") c.embedding_dim = value.get<std::size_t>();
      else if (key == "hidden_dim") c.hidden_dim = value.get<std::size_t>();
      else if (key == "num_layers") c.num_layers = value.get<std::size_t>();
      else if (key == "num_heads") c.num_heads = value.get<std::size_t>();
      else if (key == "ffn_dim") c.ffn_dim = value.get<std::size_t>();
      else if (key == "output_hidden") c.output_hidden = value.get<std::size_t>();
      else if (key == "dropout_rate") c.dropout_rate = value.get<double>();
      else if (key == "kq_same") c.kq_same = value.get<bool>();
      else if (key == "llm_truncation_dim") c.llm_truncation_dim = value.get<std::size_t>();
      else if (key == "text_fields") c.text_fields = value.get<std::vector<std::string>>();
      else if (key == "n_questions") c.n_questions = value.get<std::size_t>();
      else if (key == "n_constructs") c.n_constructs = value.get<std::size_t>();
      else if (key == "max_length") c.max_length = value.get<std::size_t>();
      else throw DataError("ModelConfig: unknown field '" + key + "'");
    } catch (const nlohmann::json::exception&) {
      throw DataError("ModelConfig: field '" + key + "' has the wrong type");
    } catch (const std::invalid_argument& e) {
      throw DataError(std::string("ModelConfig: ") + e.what());
    }
  }
  try {
    c.validate();
  } catch (const std::invalid_argument& e) {
    throw DataError(e.what());
  }
  return c;
}

}  // namespace ktu::models
