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

#include "ktu/cli/cli.hpp"

#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "ktu/data/batching.hpp"
#include "ktu/error.hpp"
#include "ktu/format.hpp"
#include "ktu/models/forward.hpp"
#include "ktu/models/params.hpp"
#include "ktu/sim/simulator.hpp"
#include "ktu/train/train.hpp"

namespace ktu::cli {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw DataError("cannot read " + p.string());
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

void write_file(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + p.string());
  out << text;
  if (!out) throw DataError("write failed: " + p.string());
}

data::DatasetSplit load_split(const fs::path& path, const std::string& name, const data::QuestionBank& bank,
                              std::size_t length) {
  data::DatasetSplit s;
  s.name = name;
  s.sequences = data::load_interactions(path, bank, length);
  return s;
}

}  // namespace

const data::DatasetSplit& DataDir::split(const std::string& name) const {
  if (name == "train") return train;
  if (name == "val") return val;
  throw std::invalid_argument("unknown split '" + name + "' (expected train or val)");
}

DataDir load_data_dir(const fs::path& dir, std::optional<std::size_t> sequence_length, bool with_embeddings) {
  using F = sim::DatasetFiles;
  DataDir d;
  if (sequence_length) {
    d.sequence_length = *sequence_length;
  } else if (fs::exists(dir / F::kConfig)) {
    d.sequence_length = sim::sim_config_from_json(read_file(dir / F::kConfig)).sequence_length;
  } else {
    d.sequence_length = data::kDefaultSequenceLength;
  }
  d.bank = data::load_questions(dir / F::kQuestions);
  d.train = load_split(dir / F::kTrain, "train", d.bank, d.sequence_length);
  d.val = load_split(dir / F::kVal, "val", d.bank, d.sequence_length);
  if (with_embeddings && fs::exists(dir / F::kEmbeddingIndex))
    d.embeddings = data::load_embeddings(dir / F::kEmbeddingIndex, dir / F::kEmbeddingBlob);
  return d;
}

ad::GradCheckReport model_gradcheck(models::Architecture arch, std::uint64_t seed) {
  sim::SimConfig c;
  c.n_students = 2;
  c.n_questions = 20;
  c.sequence_length = 10;
  c.embedding_dimension = 8;
  c.seed = seed;
  const sim::SimDataset data = sim::generate_dataset(c);
  const data::Batch batch = data::make_batch({&data.sequences[0], &data.sequences[1]}, data.bank);
  RngStream rng(seed, stream_id(StreamPurpose::kInit, 0));
  models::ModelParams base =
      models::init_params(models::tiny_config(arch, data.bank.size(), data.bank.construct_count(), batch.steps), rng);
  if (arch == models::Architecture::kLlmkt) models::attach_text_features(base, data.embeddings, data.bank);
  ad::ScalarObjective loss = [&](ad::Tape& tape, const ad::ParamTable& table) {
    models::ModelParams p = base;
    p.table = table;
    return models::batch_loss(models::forward(tape, p, batch, {}), batch);
  };
  return ad::gradient_check(loss, base.table, 1e-5, 40);
}

AnalysisBundle build_analysis(std::vector<analysis::PredictionRecord> records, const data::DatasetSplit& split,
                              const std::map<std::int64_t, double>& difficulty) {
  using namespace analysis;
  AnalysisBundle b;
  b.records = std::move(records);
  b.entropy_by_model = entropy_by_model_correctness(b.records);
  b.entropy_by_student = uncertainty_by_student_correctness(b.records, Measure::kEntropy);
  b.std_by_student = uncertainty_by_student_correctness(b.records, Measure::kStd);
  b.entropy_by_position = uncertainty_by_position(b.records, Measure::kEntropy);
  b.std_by_position = uncertainty_by_position(b.records, Measure::kStd);
  b.difficulty_by_position = difficulty_by_position(split, difficulty);
  b.correlation = entropy_difficulty_correlation(b.records, difficulty);

  std::vector<int> truth, predicted;
  std::vector<double> scores;
  for (const auto& r : b.records) {
    truth.push_back(r.chosen_option);
    predicted.push_back(mc::argmax(r.mean_probs));
    scores.insert(scores.end(), r.mean_probs.begin(), r.mean_probs.end());
  }
  b.mc_mean_metrics = train::compute_metrics(truth, predicted, scores, data::kNumOptions);
  return b;
}

void write_analysis(const fs::path& dir, const AnalysisBundle& b, const std::string& metrics_json) {
  fs::create_directories(dir);
  write_file(dir / "predictions.csv", analysis::predictions_csv(b.records));
  write_file(dir / "entropy_by_model_correctness.csv", b.entropy_by_model.to_csv());
  write_file(dir / "entropy_by_student_correctness.csv", b.entropy_by_student.to_csv());
  write_file(dir / "std_by_student_correctness.csv", b.std_by_student.to_csv());
  write_file(dir / "entropy_by_position.csv", b.entropy_by_position.to_csv());
  write_file(dir / "std_by_position.csv", b.std_by_position.to_csv());
  write_file(dir / "difficulty_by_position.csv", b.difficulty_by_position.to_csv());
  write_file(dir / "entropy_difficulty_correlation.csv", b.correlation.table.to_csv());
  write_file(dir / "metrics.json", metrics_json);
}

namespace {

struct Options {
  // simulate
  std::string sim_config;
  std::optional<std::size_t> students, questions, length, embedding_dim;
  // shared
  std::optional<std::uint64_t> seed;
  std::string out_dir;
  std::string data_dir;
  std::string arch;
  std::string checkpoint;
  std::string split = "val";
  std::optional<std::size_t> sequence_length;
  // train
  std::string preset = "desk";
  std::string train_config;
  std::optional<std::size_t> epochs, batch_size;
  std::optional<double> lr;
  bool keep_epochs = false;
  bool quiet = false;
  // analyze
  std::size_t mc_samples = mc::kDefaultSamples;
  std::string prediction = "mc_mean";
};

int run_simulate(const Options& o, std::ostream& out) {
  sim::SimConfig c;
  if (!o.sim_config.empty()) c = sim::sim_config_from_json(read_file(o.sim_config));
  if (o.seed) c.seed = *o.seed;
  if (o.students) c.n_students = *o.students;
  if (o.questions) c.n_questions = *o.questions;
  if (o.length) c.sequence_length = *o.length;
  if (o.embedding_dim) c.embedding_dimension = *o.embedding_dim;
  c.validate();
  const sim::SimDataset d = sim::generate_dataset(c);
  sim::write_dataset(o.out_dir, d);
  out << "simulated " << d.sequences.size() << " students (" << d.train.sequences.size() << " train, "
      << d.val.sequences.size() << " val), " << d.bank.size() << " questions -> " << o.out_dir << "\n";
  return kExitOk;
}

train::TrainConfig resolve_train_config(const Options& o, const DataDir& d) {
  train::TrainConfig c;
  if (!o.train_config.empty()) {
    c = train::train_config_from_json(read_file(o.train_config));
  } else {
    const auto arch = models::parse_architecture(o.arch);
    const std::size_t nq = d.bank.size(), nc = d.bank.construct_count();
    if (o.preset == "desk") {
      c.model = models::desk_config(arch, nq, nc, d.sequence_length);
    } else if (o.preset == "full") {
      c.model = models::full_config(arch, nq, nc);
    } else if (o.preset == "tiny") {
      c.model = models::tiny_config(arch, nq, nc, d.sequence_length);
    } else {
      throw std::invalid_argument("unknown preset '" + o.preset + "' (expected desk, full or tiny)");
    }
  }
  if (o.seed) c.seed = *o.seed;
  if (o.epochs) c.epochs = *o.epochs;
  if (o.batch_size) c.batch_size = *o.batch_size;
  if (o.lr) c.learning_rate = *o.lr;
  c.validate();
  return c;
}

int run_train(const Options& o, std::ostream& out) {
  const DataDir d = load_data_dir(o.data_dir, o.sequence_length);
  const train::TrainConfig c = resolve_train_config(o, d);
  train::TrainOptions opt;
  opt.run_dir = fs::path(o.out_dir);
  opt.keep_epoch_checkpoints = o.keep_epochs;
  if (!o.quiet) {
    opt.on_epoch = [&](const train::EpochLog& e) {
      out << "epoch " << e.epoch << " loss " << format_double(e.train_loss) << " val_acc "
          << format_double(e.val_accuracy) << " val_f1 " << format_double(e.val_f1) << " val_auc "
          << format_double(e.val_auc) << "\n"
          << std::flush;
    };
  }
  const train::TrainResult r =
      train::train_model(c, d.train, d.val, d.bank, d.embeddings ? &*d.embeddings : nullptr, opt);
  out << "trained " << models::to_string(c.model.architecture) << " (" << r.params.parameter_count()
      << " parameters, " << r.steps << " steps) -> " << (fs::path(o.out_dir) / "model").string() << "\n";
  return kExitOk;
}

models::ModelParams load_model(const Options& o, const DataDir& d) {
  models::ModelParams p = models::load_checkpoint(o.checkpoint);
  if (p.config.architecture == models::Architecture::kLlmkt) {
    if (!d.embeddings) throw DataError("llmkt checkpoint needs embeddings in " + o.data_dir);
    models::attach_text_features(p, *d.embeddings, d.bank);
  }
  return p;
}

int run_evaluate(const Options& o, std::ostream& out) {
  const DataDir d = load_data_dir(o.data_dir, o.sequence_length);
  const models::ModelParams p = load_model(o, d);
  const std::string json = train::metrics_to_json(train::evaluate(p, d.split(o.split), d.bank)) + "\n";
  if (!o.out_dir.empty()) {
    fs::create_directories(o.out_dir);
    write_file(fs::path(o.out_dir) / "metrics.json", json);
  }
  out << json;
  return kExitOk;
}

int run_analyze(const Options& o, std::ostream& out) {
  const DataDir d = load_data_dir(o.data_dir, o.sequence_length);
  const models::ModelParams p = load_model(o, d);
  const data::DatasetSplit& split = d.split(o.split);
  mc::McConfig mc{o.mc_samples, o.seed.value_or(0)};
  const auto mode = analysis::parse_prediction_mode(o.prediction);
  AnalysisBundle b = build_analysis(analysis::collect_predictions(p, split, d.bank, mc, mode), split,
                                    data::question_difficulty(d.train, d.bank));
  const train::MetricsReport det = train::evaluate(p, split, d.bank);

  ordered_json j;
  j["architecture"] = models::to_string(p.config.architecture);
  j["split"] = o.split;
  j["mc_samples"] = mc.samples;
  j["mc_seed"] = mc.base_seed;
  j["prediction_mode"] = analysis::to_string(mode);
  j["records"] = b.records.size();
  j["deterministic"] = ordered_json::parse(train::metrics_to_json(det));
  j["mc_mean"] = ordered_json::parse(train::metrics_to_json(b.mc_mean_metrics));
  j["entropy_difficulty_pearson"] = b.correlation.pearson;
  j["entropy_difficulty_spearman"] = b.correlation.spearman;
  write_analysis(o.out_dir, b, j.dump(2) + "\n");
  out << "analyzed " << b.records.size() << " predictions (M=" << mc.samples << ") -> " << o.out_dir << "\n";
  return kExitOk;
}

int run_gradcheck(const Options& o, std::ostream& out) {
  std::vector<models::Architecture> archs;
  if (o.arch == "all") {
    archs = models::all_architectures();
  } else {
    archs.push_back(models::parse_architecture(o.arch));
  }
  bool ok = true;
  for (auto a : archs) {
    const ad::GradCheckReport r = model_gradcheck(a, o.seed.value_or(5));
    const bool pass = r.max_relative_error < 1e-4;
    ok &= pass;
    out << models::to_string(a) << " max_relative_error " << format_double(r.max_relative_error) << " at "
        << r.worst_parameter << "[" << r.worst_index << "] over " << r.coordinates_checked << " coordinates "
        << (pass ? "ok" : "FAILED") << "\n";
  }
  return ok ? kExitOk : kExitData;
}

}  // namespace

int cli_main(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Knowledge tracing with Monte Carlo dropout uncertainty", "kt_cli"};
  app.require_subcommand(1);
  Options o;

  auto* sim = app.add_subcommand("simulate", "Generate a synthetic dataset directory");
  sim->add_option("--config", o.sim_config, "Simulator config JSON")->check(CLI::ExistingFile);
  sim->add_option("--seed", o.seed, "Simulator seed");
  sim->add_option("--students", o.students);
  sim->add_option("--questions", o.questions);
  sim->add_option("--length", o.length, "Responses per student (multiple of 5)");
  sim->add_option("--embedding-dim", o.embedding_dim);
  sim->add_option("--out-dir", o.out_dir, "Dataset directory")->required();

  auto* tr = app.add_subcommand("train", "Train one model on a dataset directory");
  tr->add_option("--data", o.data_dir, "Dataset directory")->required()->check(CLI::ExistingDirectory);
  tr->add_option("--arch", o.arch, "dkt, sakt, akt or llmkt");
  tr->add_option("--preset", o.preset, "Model size: desk (default), full or tiny");
  tr->add_option("--config", o.train_config, "Training config JSON (replaces --arch/--preset)")
      ->check(CLI::ExistingFile);
  tr->add_option("--epochs", o.epochs);
  tr->add_option("--batch-size", o.batch_size);
  tr->add_option("--lr", o.lr, "Peak learning rate");
  tr->add_option("--seed", o.seed, "Training seed");
  tr->add_option("--sequence-length", o.sequence_length);
  tr->add_flag("--keep-epoch-checkpoints", o.keep_epochs, "Keep one checkpoint per epoch");
  tr->add_flag("--quiet", o.quiet, "No per-epoch lines");
  tr->add_option("--out-dir", o.out_dir, "Run directory")->required();

  auto* ev = app.add_subcommand("evaluate", "Deterministic metrics of a checkpoint");
  ev->add_option("--checkpoint", o.checkpoint, "Checkpoint path without extension")->required();
  ev->add_option("--data", o.data_dir, "Dataset directory")->required()->check(CLI::ExistingDirectory);
  ev->add_option("--split", o.split, "train or val");
  ev->add_option("--sequence-length", o.sequence_length);
  ev->add_option("--out-dir", o.out_dir, "Also write metrics.json here");

  auto* an = app.add_subcommand("analyze", "Uncertainty reports for a checkpoint");
  an->add_option("--checkpoint", o.checkpoint, "Checkpoint path without extension")->required();
  an->add_option("--data", o.data_dir, "Dataset directory")->required()->check(CLI::ExistingDirectory);
  an->add_option("--split", o.split, "train or val");
  an->add_option("--mc-samples", o.mc_samples, "Dropout samples per prediction")->check(CLI::PositiveNumber);
  an->add_option("--seed", o.seed, "Base seed of the dropout samples");
  an->add_option("--prediction", o.prediction, "mc_mean (default) or deterministic");
  an->add_option("--sequence-length", o.sequence_length);
  an->add_option("--out-dir", o.out_dir, "Report directory")->required();

  auto* gc = app.add_subcommand("gradcheck", "Finite-difference gradient check");
  gc->add_option("--arch", o.arch, "Architecture or 'all'")->required();
  gc->add_option("--seed", o.seed);

  std::vector<const char*> argv{"kt_cli"};
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*sim) return run_simulate(o, out);
    if (*tr) {
      if (o.arch.empty() && o.train_config.empty()) throw std::invalid_argument("train needs --arch or --config");
      return run_train(o, out);
    }
    if (*ev) return run_evaluate(o, out);
    if (*an) return run_analyze(o, out);
    if (*gc) return run_gradcheck(o, out);
  } catch (const DataError& e) {
    err << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const NumericError& e) {
    err << "numeric error: " << e.what() << "\n";
    return kExitData;
  } catch (const std::invalid_argument& e) {
    err << "usage error: " << e.what() << "\n" << app.help();
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitData;
  }
  return kExitUsage;
}

int cli_main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return cli_main(args, std::cout, std::cerr);
}

}  // namespace ktu::cli
