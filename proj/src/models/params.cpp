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

#include "ktu/models/params.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>

#include "json.hpp"
#include "ktu/error.hpp"

namespace ktu::models {

namespace {

constexpr std::size_t kOptionRows = data::kNumOptions + 1;  // last row marks the start token
constexpr double kEmbeddingInitStd = 0.02;

struct SpecList {
  std::vector<ParamSpec> specs;
  void add(std::string name, Shape shape, InitKind init) {
    specs.push_back({std::move(name), std::move(shape), init});
  }
  void linear(const std::string& name, std::size_t in, std::size_t out) {
    add(name, {in, out}, InitKind::kMatrix);
    add(name + "_bias", {out}, InitKind::kBias);
  }
};

void attention_block_specs(SpecList& s, const ModelConfig& c, const std::string& block, bool decay) {
  const std::size_t d = c.embedding_dim;
  auto [query, key] = query_key_names(c, block);
  s.linear(query, d, d);
  if (key != query) s.linear(key, d, d);
  s.linear(block + ".value", d, d);
  s.linear(block + ".output", d, d);
  s.add(block + ".norm1_gain", {d}, InitKind::kGain);
  s.add(block + ".norm1_bias", {d}, InitKind::kBias);
  s.linear(block + ".ffn_in", d, c.ffn_dim);
  s.linear(block + ".ffn_out", c.ffn_dim, d);
  s.add(block + ".norm2_gain", {d}, InitKind::kGain);
  s.add(block + ".norm2_bias", {d}, InitKind::kBias);
  if (decay) s.add(block + ".decay", {1, c.num_heads}, InitKind::kBias);
}

std::string layer(const std::string& base, std::size_t l) { return base + std::to_string(l); }

std::uint64_t to_little(std::uint64_t v) {
  if constexpr (std::endian::native == std::endian::little) {
    return v;
  } else {
    std::uint64_t r = 0;
    for (int i = 0; i < 8; ++i) r |= ((v >> (8 * i)) & 0xffu) << (8 * (7 - i));
    return r;
  }
}

}  // namespace

std::pair<std::string, std::string> query_key_names(const ModelConfig& config, const std::string& block) {
  if (config.architecture == Architecture::kAkt && config.kq_same) {
    return {block + ".query_key", block + ".query_key"};
  }
  return {block + ".query", block + ".key"};
}

std::vector<ParamSpec> parameter_specs(const ModelConfig& c) {
  c.validate();
  SpecList s;
  const std::size_t d = c.embedding_dim;
  const std::size_t q = c.n_questions;
  switch (c.architecture) {
    case Architecture::kDkt: {
      s.add("dkt.question_embedding", {q + 1, d}, InitKind::kEmbedding);
      s.add("dkt.option_embedding", {kOptionRows, d}, InitKind::kEmbedding);
      s.add("dkt.target_embedding", {q, d}, InitKind::kEmbedding);
      for (std::size_t l = 0; l < c.num_layers; ++l) {
        const std::string p = layer("dkt.lstm", l);
        const std::size_t in = l == 0 ? d : c.hidden_dim;
        s.add(p + ".input", {in, 4 * c.hidden_dim}, InitKind::kMatrix);
        s.add(p + ".hidden", {c.hidden_dim, 4 * c.hidden_dim}, InitKind::kMatrix);
        s.add(p + ".bias", {4 * c.hidden_dim}, InitKind::kBias);
      }
      s.linear("dkt.head", c.hidden_dim + d, data::kNumOptions);
      break;
    }
    case Architecture::kSakt: {
      s.add("sakt.question_embedding", {q, d}, InitKind::kEmbedding);
      s.add("sakt.history_question", {q + 1, d}, InitKind::kEmbedding);
      s.add("sakt.option_embedding", {kOptionRows, d}, InitKind::kEmbedding);
      s.add("sakt.position_embedding", {c.max_length, d}, InitKind::kEmbedding);
      for (std::size_t l = 0; l < c.num_layers; ++l) attention_block_specs(s, c, layer("sakt.block", l), false);
      s.linear("sakt.head", d, data::kNumOptions);
      break;
    }
    case Architecture::kAkt: {
      s.add("akt.question_embedding", {q, d}, InitKind::kEmbedding);
      s.add("akt.history_question", {q + 1, d}, InitKind::kEmbedding);
      s.add("akt.option_embedding", {kOptionRows, d}, InitKind::kEmbedding);
      s.add("akt.start_key", {1, d}, InitKind::kEmbedding);
      for (std::size_t l = 0; l < c.num_layers; ++l) {
        attention_block_specs(s, c, layer("akt.question_encoder", l), true);
        attention_block_specs(s, c, layer("akt.knowledge_encoder", l), true);
        attention_block_specs(s, c, layer("akt.retriever", l), true);
      }
      s.linear("akt.out1", 2 * d, c.output_hidden);
      s.linear("akt.out2", c.output_hidden, c.output_hidden / 2);
      s.linear("akt.out3", c.output_hidden / 2, data::kNumOptions);
      break;
    }
    case Architecture::kLlmkt: {
      s.linear("llmkt.text_projection", c.text_fields.size() * c.llm_truncation_dim, d);
      s.add("llmkt.start_text", {1, d}, InitKind::kEmbedding);
      s.add("llmkt.option_embedding", {kOptionRows, d}, InitKind::kEmbedding);
      for (std::size_t l = 0; l < c.num_layers; ++l) {
        attention_block_specs(s, c, layer("llmkt.question_encoder", l), false);
        attention_block_specs(s, c, layer("llmkt.response_encoder", l), false);
        attention_block_specs(s, c, layer("llmkt.cross", l), false);
      }
      s.linear("llmkt.head", d, data::kNumOptions);
      break;
    }
  }
  return s.specs;
}

std::size_t ModelParams::parameter_count() const {
  std::size_t n = 0;
  for (const auto& [name, value] : table) n += value.size();
  return n;
}

ModelParams init_params(const ModelConfig& config, RngStream& rng) {
  ModelParams p;
  p.config = config;
  for (const ParamSpec& spec : parameter_specs(config)) {
    std::vector<double> v(ad::shape_size(spec.shape));
    switch (spec.init) {
      case InitKind::kMatrix: {
        const double bound = 1.0 / std::sqrt(static_cast<double>(spec.shape[0]));
        for (double& x : v) x = rng.uniform(-bound, bound);
        break;
      }
      case InitKind::kBias: break;
      case InitKind::kEmbedding:
        for (double& x : v) x = rng.normal(0.0, kEmbeddingInitStd);
        break;
      case InitKind::kGain:
        std::fill(v.begin(), v.end(), 1.0);
        break;
    }
    p.table.emplace(spec.name, NdArray(spec.shape, std::move(v)));
  }
  return p;
}

NdArray text_feature_matrix(const ModelConfig& config, const data::EmbeddingTable& table,
                            const data::QuestionBank& bank) {
  const std::size_t trunc = config.llm_truncation_dim;
  if (table.dimension() < trunc) {
    throw DataError("embedding dimension " + std::to_string(table.dimension()) +
                    " is smaller than the truncation width " + std::to_string(trunc));
  }
  const auto& records = bank.records();
  const std::size_t width = config.text_fields.size() * trunc;
  std::vector<double> out(records.size() * width);
  for (std::size_t i = 0; i < records.size(); ++i) {
    for (std::size_t f = 0; f < config.text_fields.size(); ++f) {
      const std::string key = config.text_fields[f] == kConstructTextField
                                  ? data::construct_text_key(records[i].construct_id)
                                  : records[i].text_key;
      auto row = table.row(key);
      std::copy(row.begin(), row.begin() + static_cast<std::ptrdiff_t>(trunc), out.begin() + static_cast<std::ptrdiff_t>(i * width + f * trunc));
    }
  }
  return NdArray({records.size(), width}, std::move(out));
}

void attach_text_features(ModelParams& params, const data::EmbeddingTable& table,
                          const data::QuestionBank& bank) {
  if (bank.size() != params.config.n_questions) {
    throw DataError("question bank has " + std::to_string(bank.size()) + " questions, model expects " +
                    std::to_string(params.config.n_questions));
  }
  params.text_features = text_feature_matrix(params.config, table, bank);
}

CheckpointPaths checkpoint_paths(const std::filesystem::path& stem) {
  std::filesystem::path manifest = stem;
  manifest += ".json";
  std::filesystem::path blob = stem;
  blob += ".bin";
  return {manifest, blob};
}

void save_checkpoint(const std::filesystem::path& stem, const ModelParams& params) {
  const CheckpointPaths paths = checkpoint_paths(stem);
  nlohmann::ordered_json j;
  j["format_version"] = kCheckpointFormatVersion;
  j["architecture"] = to_string(params.config.architecture);
  j["config"] = nlohmann::ordered_json::parse(model_config_to_json(params.config));
  j["dtype"] = "float64";
  j["byte_order"] = "little";
  j["blob"] = paths.blob.filename().string();
  j["parameters"] = nlohmann::ordered_json::array();

  std::string bytes;
  for (const ParamSpec& spec : parameter_specs(params.config)) {
    auto it = params.table.find(spec.name);
    if (it == params.table.end()) throw DataError("checkpoint: parameter " + spec.name + " missing");
    if (it->second.shape() != spec.shape) {
      throw ShapeError("checkpoint: parameter " + spec.name + " has shape " + ad::shape_string(it->second.shape()) +
                       ", expected " + ad::shape_string(spec.shape));
    }
    j["parameters"].push_back({{"name", spec.name}, {"shape", spec.shape}});
    for (double v : it->second.values()) {
      const std::uint64_t raw = to_little(std::bit_cast<std::uint64_t>(v));
      char buf[8];
      std::memcpy(buf, &raw, 8);
      bytes.append(buf, 8);
    }
  }
  {
    std::ofstream out(paths.blob, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write " + paths.blob.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  }
  std::ofstream out(paths.manifest, std::ios::trunc);
  if (!out) throw DataError("cannot write " + paths.manifest.string());
  out << j.dump(2) << '\n';
}

ModelParams load_checkpoint(const std::filesystem::path& stem) {
  const CheckpointPaths paths = checkpoint_paths(stem);
  std::ifstream in(paths.manifest);
  if (!in) throw DataError("cannot open " + paths.manifest.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw DataError(paths.manifest.string() + ": malformed JSON (" + e.what() + ")");
  }
  ModelParams p;
  std::vector<ParamSpec> specs;
  try {
    if (j.at("format_version").get<int>() != kCheckpointFormatVersion) {
      throw DataError(paths.manifest.string() + ": unsupported format_version");
    }
    p.config = model_config_from_json(j.at("config").dump());
    if (j.at("architecture").get<std::string>() != to_string(p.config.architecture)) {
      throw DataError(paths.manifest.string() + ": architecture does not match config");
    }
    specs = parameter_specs(p.config);
    const auto& listed = j.at("parameters");
    if (listed.size() != specs.size()) {
      throw DataError(paths.manifest.string() + ": expected " + std::to_string(specs.size()) + " parameters, found " +
                      std::to_string(listed.size()));
    }
    for (std::size_t i = 0; i < specs.size(); ++i) {
      if (listed[i].at("name").get<std::string>() != specs[i].name ||
          listed[i].at("shape").get<Shape>() != specs[i].shape) {
        throw DataError(paths.manifest.string() + ": parameter " + std::to_string(i) + " is not " + specs[i].name +
                        " " + ad::shape_string(specs[i].shape));
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError(paths.manifest.string() + ": " + e.what());
  }

  std::ifstream blob(paths.blob, std::ios::binary);
  if (!blob) throw DataError("cannot open " + paths.blob.string());
  const std::string bytes((std::istreambuf_iterator<char>(blob)), std::istreambuf_iterator<char>());
  std::size_t expected = 0;
  for (const auto& s : specs) expected += ad::shape_size(s.shape) * 8;
  if (bytes.size() != expected) {
    throw DataError(paths.blob.string() + ": expected " + std::to_string(expected) + " bytes, found " +
                    std::to_string(bytes.size()));
  }
  std::size_t offset = 0;
  for (const auto& s : specs) {
    std::vector<double> v(ad::shape_size(s.shape));
    for (double& x : v) {
      std::uint64_t raw;
      std::memcpy(&raw, bytes.data() + offset, 8);
      x = std::bit_cast<double>(to_little(raw));
      offset += 8;
    }
    try {
      p.table.emplace(s.name, NdArray(s.shape, std::move(v)));
    } catch (const std::exception& e) {
      throw DataError(paths.blob.string() + ": parameter " + s.name + ": " + e.what());
    }
  }
  return p;
}

}  // namespace ktu::models
