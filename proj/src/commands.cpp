// Copyright 2026 The uniseq Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "uniseq/commands.hpp"

#include <algorithm>
#include <fstream>
#include <iostream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

#include <CLI11.hpp>

#include "uniseq/checkpoint.hpp"
#include "uniseq/corpus.hpp"
#include "uniseq/metrics.hpp"
#include "uniseq/task_builder.hpp"

namespace uniseq {
namespace {

using nlohmann::json;

// Decoding -------------------------------------------------------------------

enum class DecodeMode { kAuto, kBeam, kTrie, kAllCandidate };

DecodeMode ParseDecodeMode(const std::string& name) {
  if (name == "auto") return DecodeMode::kAuto;
  if (name == "beam") return DecodeMode::kBeam;
  if (name == "trie") return DecodeMode::kTrie;
  if (name == "all-candidate") return DecodeMode::kAllCandidate;
  throw UsageError("unknown decode mode '" + name +
                   "' (valid: auto, beam, trie, all-candidate)");
}

/// Closed-set decoding state shared by every record of one run.
struct Decoding {
  DecodeMode mode = DecodeMode::kBeam;
  DecodeConfig config;
  std::vector<std::string> labels;
  std::optional<LabelTrie> trie;
};

Decoding MakeDecoding(DecodeMode mode, const DecodeConfig& config,
                      std::vector<std::string> labels, const UnifiedVocab& vocab) {
  Decoding d;
  d.config = config;
  d.config.Validate();
  if (mode == DecodeMode::kAuto) {
    mode = labels.empty() ? DecodeMode::kBeam : DecodeMode::kTrie;
  }
  d.mode = mode;
  if (mode == DecodeMode::kTrie || mode == DecodeMode::kAllCandidate) {
    if (labels.empty()) {
      throw UsageError("constrained decoding requires a label set (--labels)");
    }
    std::sort(labels.begin(), labels.end());
    labels.erase(std::unique(labels.begin(), labels.end()), labels.end());
    d.trie = LabelTrie::FromLabels(labels, vocab);
    d.labels = std::move(labels);
  }
  return d;
}

std::string DecodeSample(const ModelParams<float>& params, const UnifiedVocab& vocab,
                         const Sample& sample, const Decoding& d) {
  const ModelScorer<float> scorer(params, SourceFromSample<float>(sample, params.config));
  switch (d.mode) {
    case DecodeMode::kTrie:
      return FormatTokens(vocab, TrieBeamSearch(scorer, *d.trie, d.config).tokens);
    case DecodeMode::kAllCandidate: {
      const CandidateResult r =
          AllCandidateSearch(scorer, d.labels, vocab, d.config.length_penalty);
      return d.labels[r.best];
    }
    default:
      return FormatTokens(vocab, BeamSearch(scorer, d.config).tokens);
  }
}

std::vector<std::string> ParseLabels(const std::string& spec) {
  std::vector<std::string> out;
  if (spec.empty()) return out;
  if (spec.front() == '@') {
    std::ifstream in(spec.substr(1));
    if (!in) throw CorpusError("cannot read label file " + spec.substr(1));
    std::string line;
    while (std::getline(in, line)) {
      if (!line.empty()) out.push_back(line);
    }
    return out;
  }
  std::stringstream ss(spec);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

// Data -----------------------------------------------------------------------

TaskKind RequireTask(const std::string& name) {
  const auto kind = ParseTaskName(name);
  if (!kind) {
    throw UsageError("unknown task '" + name + "' (valid: " + ValidTaskNames() + ")");
  }
  return *kind;
}

std::vector<CorpusRecord> ReadTaskRecords(const std::string& path,
                                          const std::string& task) {
  if (path.empty()) throw UsageError("a corpus path is required");
  std::vector<CorpusRecord> records = ReadCorpus(path);
  if (!task.empty()) {
    std::erase_if(records, [&task](const CorpusRecord& r) { return r.task != task; });
  }
  if (records.empty()) throw CorpusError("empty corpus");
  return records;
}

SampleBuildOptions BuildOptions(const RunConfig& run, const ModelConfig& model) {
  SampleBuildOptions o;
  o.image = ImageOptionsFor(model);
  o.mask_rate = run.mask_rate;
  o.keep_patches = run.keep_patches;
  return o;
}

std::vector<Sample> BuildSamples(std::span<const CorpusRecord> records,
                                 const UnifiedVocab& vocab,
                                 const SampleBuildOptions& options,
                                 std::mt19937_64& rng) {
  std::vector<Sample> out;
  out.reserve(records.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    try {
      out.push_back(BuildSample(records[i], vocab, options, rng));
    } catch (const CorpusError& e) {
      throw CorpusError("record " + std::to_string(i) + ": " + e.what(),
                        static_cast<long>(i));
    }
  }
  return out;
}

void CheckVocabMatches(const ModelConfig& config, const UnifiedVocab& vocab) {
  if (config.vocab_total != vocab.total()) {
    throw ModelError("checkpoint vocabulary size " + std::to_string(config.vocab_total) +
                     " differs from the vocabulary file's " +
                     std::to_string(vocab.total()));
  }
}

/// Appends step records as JSON lines.
class StepLog {
 public:
  StepLog(const std::string& path, bool omit_timing) : omit_timing_(omit_timing) {
    if (path.empty()) return;
    file_.open(path, std::ios::binary | std::ios::trunc);
    if (!file_) throw CorpusError("cannot write log " + path);
  }

  void Write(const TrainRecord& r) {
    if (!file_.is_open()) return;
    nlohmann::ordered_json j;
    j["step"] = r.step;
    j["lr"] = r.lr;
    j["loss"] = r.loss;
    j["seconds"] = omit_timing_ ? 0.0 : r.seconds;
    file_ << j.dump() << '\n';
    file_.flush();
  }

 private:
  std::ofstream file_;
  bool omit_timing_;
};

std::string SelectionMetric(TaskKind kind) {
  switch (kind) {
    case TaskKind::kCaption:
      return "cider";
    case TaskKind::kSummarization:
      return "rouge_l";
    case TaskKind::kClassification:
    case TaskKind::kVqa:
    case TaskKind::kNli:
    case TaskKind::kMlm:
      return "accuracy";
    default:
      return "";
  }
}

bool ClosedSetTask(TaskKind kind) {
  return kind == TaskKind::kClassification || kind == TaskKind::kVqa ||
         kind == TaskKind::kNli;
}

TrainOptions MakeTrainOptions(const RunConfig& run, const ModelConfig& model) {
  TrainOptions t;
  t.dropout = run.dropout.value_or(model.dropout);
  // Evaluation rescales branches by the stored rate, so training must use it.
  t.stochastic_depth = model.stochastic_depth;
  t.seed = *run.seed;
  return t;
}

OptimizerConfig MakeOptimizerConfig(const RunConfig& run) {
  OptimizerConfig c = run.optimizer;
  c.total_steps = run.total_steps;
  c.Validate();
  return c;
}

void MaybeSnapshot(const RunConfig& run, const TrainRecord& r,
                   const ModelParams<float>& params) {
  if (run.checkpoint_every > 0 && r.step % run.checkpoint_every == 0) {
    SaveCheckpoint(run.checkpoint + ".step" + std::to_string(r.step), params);
  }
}

// Commands -------------------------------------------------------------------

struct Overrides {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<long> steps;
  std::optional<int> batch_size;
  std::optional<double> lr;
  std::optional<double> label_smoothing;
  std::optional<double> dropout;
  std::optional<long> checkpoint_every;
  std::optional<int> beam;
  std::optional<int> max_length;
  std::optional<double> length_penalty;
  std::string corpus, vocab, checkpoint, init, log, validation, report, task;
  bool omit_timing = false;

  void Attach(CLI::App* app, bool training) {
    app->add_option("--config", config, "JSON run configuration");
    app->add_option("--seed", seed, "random seed");
    app->add_option("--vocab", vocab, "vocabulary file");
    app->add_option("--task", task, "task name");
    if (training) {
      app->add_option("--corpus", corpus, "training corpus (JSONL)");
      app->add_option("--out", checkpoint, "output checkpoint");
      app->add_option("--log", log, "step log (JSONL)");
      app->add_option("--steps", steps, "total optimizer steps");
      app->add_option("--batch-size", batch_size, "samples per step");
      app->add_option("--lr", lr, "peak learning rate");
      app->add_option("--label-smoothing", label_smoothing, "label smoothing rate");
      app->add_option("--dropout", dropout, "training dropout rate");
      app->add_option("--checkpoint-every", checkpoint_every,
                      "write <out>.stepN every N steps");
      app->add_flag("--omit-timing", omit_timing,
                    "write seconds=0 in the step log so logs are reproducible");
    }
    app->add_option("--beam", beam, "beam size");
    app->add_option("--max-length", max_length, "maximum generated tokens");
    app->add_option("--length-penalty", length_penalty, "length penalty exponent");
  }

  RunConfig Resolve() const {
    RunConfig run = config.empty() ? RunConfig{} : LoadRunConfig(config);
    if (seed) run.seed = seed;
    if (steps) run.total_steps = *steps;
    if (batch_size) run.batch_size = *batch_size;
    if (lr) run.optimizer.peak_lr = *lr;
    if (label_smoothing) run.optimizer.label_smoothing = *label_smoothing;
    if (dropout) run.dropout = dropout;
    if (checkpoint_every) run.checkpoint_every = *checkpoint_every;
    if (beam) run.decode.beam_size = *beam;
    if (max_length) run.decode.max_length = *max_length;
    if (length_penalty) run.decode.length_penalty = *length_penalty;
    auto set = [](std::string& field, const std::string& value) {
      if (!value.empty()) field = value;
    };
    set(run.corpus, corpus);
    set(run.vocab, vocab);
    set(run.checkpoint, checkpoint);
    set(run.init, init);
    set(run.log, log);
    set(run.validation, validation);
    set(run.report, report);
    set(run.task, task);
    return run;
  }
};

int CmdGenSynthetic(const std::string& out_path, int n, std::uint64_t seed,
                    int image_size, const std::string& tasks, std::ostream& out) {
  SyntheticOptions options;
  options.image_size = image_size;
  if (!tasks.empty()) {
    options.tasks.clear();
    for (const auto& name : ParseLabels(tasks)) options.tasks.push_back(RequireTask(name));
  }
  const auto records = GenerateSyntheticCorpus(n, seed, options);
  WriteCorpus(out_path, records);
  out << "wrote " << records.size() << " records to " << out_path << "\n";
  return kExitOk;
}

int CmdTrainVocab(const std::vector<std::string>& corpora, const std::string& out_path,
                  int text_size, int location_bins, int visual_size, std::ostream& out) {
  std::vector<std::string> text;
  for (const auto& path : corpora) {
    const auto part = VocabTrainingText(path);
    text.insert(text.end(), part.begin(), part.end());
  }
  const auto merges = TrainBpe(text, text_size);
  const UnifiedVocab vocab(text_size, location_bins, visual_size, merges);
  vocab.Save(out_path);
  out << "learned " << merges.size() << " merges; " << vocab.total()
      << " ids written to " << out_path << "\n";
  return kExitOk;
}

int CmdPretrain(const RunConfig& run, bool omit_timing, std::ostream& out) {
  run.Validate();
  if (run.checkpoint.empty()) throw UsageError("--out is required");
  const UnifiedVocab vocab = UnifiedVocab::Load(run.vocab);
  ModelConfig config = ModelConfigFromJson(run.model);
  config.vocab_total = vocab.total();
  if (run.dropout) config.dropout = *run.dropout;
  if (run.stochastic_depth) config.stochastic_depth = *run.stochastic_depth;
  config.Validate();

  const auto records = ReadTaskRecords(run.corpus, run.task);
  std::mt19937_64 data_rng(*run.seed ^ 0x5eedda7aULL);
  const auto samples = BuildSamples(records, vocab, BuildOptions(run, config), data_rng);

  // Category -> task kind -> samples; task kinds form the balancing strata.
  std::array<std::map<int, std::vector<Sample>>, kCategoryCount> grouped;
  for (const auto& s : samples) {
    grouped[static_cast<int>(CategoryOf(s.task))][static_cast<int>(s.task)].push_back(s);
  }
  std::array<SampleStream, kCategoryCount> streams;
  for (int c = 0; c < kCategoryCount; ++c) {
    std::vector<std::vector<Sample>> strata;
    for (auto& [kind, group] : grouped[c]) strata.push_back(std::move(group));
    streams[c] = SampleStream(std::move(strata));
  }
  TaskMixConfig mix;
  mix.ratio = run.mix_ratio;
  mix.balance = run.balance;

  ModelParams<float> params = InitModel<float>(config, *run.seed);
  OptimizerState<float> state = MakeOptimizer(params, MakeOptimizerConfig(run));
  StepLog log(run.log, omit_timing);
  const auto records_out = TrainEpoch<float>(
      params, state, run.total_steps,
      [&] { return MixBatch(streams, mix, run.batch_size); },
      MakeTrainOptions(run, config), [&](const TrainRecord& r) {
        log.Write(r);
        MaybeSnapshot(run, r, params);
      });
  SaveCheckpoint(run.checkpoint, params);
  out << "pretrained " << records_out.size() << " steps";
  if (!records_out.empty()) out << "; final loss " << records_out.back().loss;
  out << "\n";
  return kExitOk;
}

double ValidationScore(const ModelParams<float>& params, const UnifiedVocab& vocab,
                       TaskKind kind, std::span<const Sample> samples,
                       std::span<const std::string> references, const Decoding& d) {
  std::vector<std::string> predictions;
  for (const auto& s : samples) predictions.push_back(DecodeSample(params, vocab, s, d));
  return EvaluateTask(TaskName(kind), predictions, references)
      .values.at(SelectionMetric(kind));
}

int CmdFinetune(const RunConfig& run, bool omit_timing, std::ostream& out) {
  run.Validate();
  if (run.init.empty()) throw UsageError("finetune requires --init");
  if (run.checkpoint.empty()) throw UsageError("--out is required");
  const UnifiedVocab vocab = UnifiedVocab::Load(run.vocab);
  ModelParams<float> params = LoadCheckpoint(run.init);
  const ModelConfig config = params.config;
  CheckVocabMatches(config, vocab);

  const auto records = ReadTaskRecords(run.corpus, run.task);
  std::set<std::string> tasks;
  for (const auto& r : records) tasks.insert(r.task);
  // Validation needs a single task to pick the selection metric.
  const TaskKind kind = RequireTask(*tasks.begin());
  const bool single_task = tasks.size() == 1;

  std::mt19937_64 data_rng(*run.seed ^ 0x5eedda7aULL);
  const SampleBuildOptions build = BuildOptions(run, config);
  const auto samples = BuildSamples(records, vocab, build, data_rng);

  // Validation set, selection metric and (for closed-set tasks) the label set.
  std::vector<Sample> valid;
  std::vector<std::string> valid_refs;
  std::optional<Decoding> decoding;
  if (!run.validation.empty() && single_task && !SelectionMetric(kind).empty()) {
    const auto vrecords = ReadTaskRecords(run.validation, std::string(TaskName(kind)));
    std::mt19937_64 valid_rng(0);
    valid = BuildSamples(vrecords, vocab, build, valid_rng);
    for (const auto& r : vrecords) valid_refs.push_back(r.Reference());
    std::vector<std::string> labels;
    if (ClosedSetTask(kind)) {
      for (const auto& r : records) labels.push_back(r.Reference());
    }
    decoding = MakeDecoding(DecodeMode::kAuto, run.decode, labels, vocab);
  }

  OptimizerState<float> state = MakeOptimizer(params, MakeOptimizerConfig(run));
  const TrainOptions train = MakeTrainOptions(run, config);
  StepLog log(run.log, omit_timing);
  std::mt19937_64 rng(train.seed);
  std::mt19937_64 order_rng(train.seed + 1);
  std::vector<std::size_t> order(samples.size());
  std::iota(order.begin(), order.end(), 0);
  const auto batch = static_cast<std::size_t>(run.batch_size);
  const long steps_per_epoch =
      static_cast<long>((samples.size() + batch - 1) / batch);

  ModelParams<float> best = params;
  double best_score = -1.0;
  std::size_t cursor = samples.size();
  long epoch = 0;
  auto validate = [&] {
    if (!decoding) return;
    const double score =
        ValidationScore(params, vocab, kind, valid, valid_refs, *decoding);
    out << "epoch " << epoch << " validation " << SelectionMetric(kind) << " "
        << score << "\n";
    if (score > best_score) {
      best_score = score;
      best = params;
    }
  };
  for (long step = 1; step <= run.total_steps; ++step) {
    std::vector<Sample> batch_samples;
    while (batch_samples.size() < batch) {
      if (cursor == samples.size()) {
        std::shuffle(order.begin(), order.end(), order_rng);
        cursor = 0;
      }
      batch_samples.push_back(samples[order[cursor++]]);
    }
    const TrainRecord r = TrainStep(params, state, batch_samples, train, rng);
    log.Write(r);
    MaybeSnapshot(run, r, params);
    if (step % steps_per_epoch == 0 || step == run.total_steps) {
      ++epoch;
      validate();
    }
  }
  SaveCheckpoint(run.checkpoint, decoding && run.total_steps > 0 ? best : params);
  out << "finetuned " << run.total_steps << " steps";
  if (decoding && run.total_steps > 0) {
    out << "; best validation " << SelectionMetric(kind) << " " << best_score;
  }
  out << "\n";
  return kExitOk;
}

int CmdGenerate(const RunConfig& run, const std::string& input, DecodeMode mode,
                const std::string& labels, std::ostream& out) {
  if (run.checkpoint.empty()) throw UsageError("--checkpoint is required");
  if (input.empty()) throw UsageError("--input is required");
  const UnifiedVocab vocab = UnifiedVocab::Load(run.vocab);
  const ModelParams<float> params = LoadCheckpoint(run.checkpoint);
  CheckVocabMatches(params.config, vocab);
  const Decoding d = MakeDecoding(mode, run.decode, ParseLabels(labels), vocab);

  std::ifstream in(input);
  if (!in) throw CorpusError("cannot read input record " + input);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw CorpusError(std::string("malformed input record: ") + e.what());
  }
  CorpusRecord record = CorpusRecordFromJson(j);
  if (!run.task.empty()) {
    RequireTask(run.task);
    record.task = run.task;
  }
  RequireTask(record.task);
  std::mt19937_64 rng(run.seed.value_or(0));
  const Sample sample =
      BuildSample(record, vocab, BuildOptions(run, params.config), rng);
  out << DecodeSample(params, vocab, sample, d) << "\n";
  return kExitOk;
}

int CmdEval(const RunConfig& run, DecodeMode mode, const std::string& labels,
            const std::string& predictions_path, std::ostream& out) {
  if (run.task.empty()) throw UsageError("--task is required");
  const TaskKind kind = RequireTask(run.task);
  if (SelectionMetric(kind).empty()) {
    throw UsageError("task '" + run.task + "' has no evaluation metric");
  }
  const auto records = ReadTaskRecords(run.corpus, run.task);
  std::vector<std::string> references;
  for (const auto& r : records) references.push_back(r.Reference());

  std::vector<std::string> predictions;
  if (!predictions_path.empty()) {
    std::ifstream in(predictions_path);
    if (!in) throw CorpusError("cannot read predictions " + predictions_path);
    for (std::string line; std::getline(in, line);) predictions.push_back(line);
    if (predictions.size() != references.size()) {
      throw CorpusError("prediction count " + std::to_string(predictions.size()) +
                        " differs from record count " +
                        std::to_string(references.size()));
    }
  } else {
    if (run.checkpoint.empty()) throw UsageError("--checkpoint is required");
    const UnifiedVocab vocab = UnifiedVocab::Load(run.vocab);
    const ModelParams<float> params = LoadCheckpoint(run.checkpoint);
    CheckVocabMatches(params.config, vocab);
    const Decoding d = MakeDecoding(mode, run.decode, ParseLabels(labels), vocab);
    std::mt19937_64 rng(run.seed.value_or(0));
    const auto samples =
        BuildSamples(records, vocab, BuildOptions(run, params.config), rng);
    for (const auto& s : samples) predictions.push_back(DecodeSample(params, vocab, s, d));
  }
  const std::string report = EvaluateTask(run.task, predictions, references).ToJson().dump(2);
  if (!run.report.empty()) {
    std::ofstream file(run.report, std::ios::binary);
    if (!file) throw CorpusError("cannot write report " + run.report);
    file << report << "\n";
  }
  out << report << "\n";
  return kExitOk;
}

}  // namespace

RunConfig RunConfig::FromJson(const json& j) {
  if (!j.is_object()) throw UsageError("run configuration must be a JSON object");
  static const std::set<std::string> kKnown = {
      "model",      "seed",         "total_steps", "batch_size",       "mix_ratio",
      "balance",    "optimizer",    "dropout",     "stochastic_depth", "mask_rate",
      "keep_patches", "checkpoint_every", "decode", "corpus",          "vocab",
      "checkpoint", "init",         "log",         "validation",       "report",
      "task"};
  for (const auto& [key, value] : j.items()) {
    if (!kKnown.contains(key)) throw UsageError("unknown configuration key '" + key + "'");
  }
  RunConfig r;
  try {
    if (j.contains("model")) r.model = j.at("model");
    if (j.contains("seed")) r.seed = j.at("seed").get<std::uint64_t>();
    r.total_steps = j.value("total_steps", r.total_steps);
    r.batch_size = j.value("batch_size", r.batch_size);
    if (j.contains("mix_ratio")) r.mix_ratio = j.at("mix_ratio").get<std::array<int, 4>>();
    r.balance = j.value("balance", r.balance);
    if (j.contains("optimizer")) {
      const auto& o = j.at("optimizer");
      OptimizerConfig& c = r.optimizer;
      c.beta1 = o.value("beta1", c.beta1);
      c.beta2 = o.value("beta2", c.beta2);
      c.epsilon = o.value("epsilon", c.epsilon);
      c.weight_decay = o.value("weight_decay", c.weight_decay);
      c.peak_lr = o.value("peak_lr", c.peak_lr);
      c.warmup_ratio = o.value("warmup_ratio", c.warmup_ratio);
      c.label_smoothing = o.value("label_smoothing", c.label_smoothing);
      c.max_grad_norm = o.value("max_grad_norm", c.max_grad_norm);
    }
    if (j.contains("dropout")) r.dropout = j.at("dropout").get<double>();
    if (j.contains("stochastic_depth")) {
      r.stochastic_depth = j.at("stochastic_depth").get<double>();
    }
    r.mask_rate = j.value("mask_rate", r.mask_rate);
    r.keep_patches = j.value("keep_patches", r.keep_patches);
    r.checkpoint_every = j.value("checkpoint_every", r.checkpoint_every);
    if (j.contains("decode")) {
      const auto& d = j.at("decode");
      r.decode.beam_size = d.value("beam_size", r.decode.beam_size);
      r.decode.max_length = d.value("max_length", r.decode.max_length);
      r.decode.length_penalty = d.value("length_penalty", r.decode.length_penalty);
    }
    for (auto [key, field] :
         {std::pair{"corpus", &r.corpus}, std::pair{"vocab", &r.vocab},
          std::pair{"checkpoint", &r.checkpoint}, std::pair{"init", &r.init},
          std::pair{"log", &r.log}, std::pair{"validation", &r.validation},
          std::pair{"report", &r.report}, std::pair{"task", &r.task}}) {
      if (j.contains(key)) *field = j.at(key).get<std::string>();
    }
  } catch (const json::exception& e) {
    throw UsageError(std::string("bad configuration value: ") + e.what());
  }
  return r;
}

void RunConfig::Validate() const {
  if (!seed) throw UsageError("a seed is required (--seed or \"seed\")");
  if (total_steps < 0) throw UsageError("total_steps must be nonnegative");
  if (batch_size < 1) throw UsageError("batch_size must be positive");
  if (vocab.empty()) throw UsageError("a vocabulary path is required");
  if (mask_rate < 0.0 || mask_rate > 1.0) throw UsageError("mask_rate must lie in [0,1]");
  decode.Validate();
}

RunConfig LoadRunConfig(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot read configuration " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw UsageError("malformed configuration " + path + ": " + e.what());
  }
  return RunConfig::FromJson(j);
}

std::string FormatTokens(const UnifiedVocab& vocab, std::span<const TokenId> ids) {
  if (!ids.empty() && ids.back() == kEosId) ids = ids.first(ids.size() - 1);
  std::string out;
  std::vector<TokenId> run;
  auto flush = [&] {
    out += DecodeText(vocab, run);
    run.clear();
  };
  for (TokenId id : ids) {
    if (vocab.is_text(id)) {
      run.push_back(id);
    } else if (vocab.is_location(id)) {
      flush();
      out += "<loc_" + std::to_string(id - vocab.location_offset()) + ">";
    } else if (vocab.is_visual(id)) {
      flush();
      out += "<img_" + std::to_string(id - vocab.visual_offset()) + ">";
    } else {
      throw VocabError("token id " + std::to_string(id) + " outside the vocabulary");
    }
  }
  flush();
  return out;
}

std::vector<std::string> VocabTrainingText(const std::string& corpus_path) {
  std::vector<std::string> out = {
      std::string(kMimInstruction), std::string(kDetectionInstruction),
      std::string(kCaptionInstruction), MlmInstruction(""),
      SummaryInstruction(""), NliInstruction("", "")};
  for (const auto& r : ReadCorpus(corpus_path)) {
    for (const auto* field : {&r.text, &r.question, &r.answer, &r.label, &r.summary,
                              &r.premise, &r.hypothesis, &r.nli_label}) {
      if (*field) out.push_back(**field);
    }
    if (r.objects) {
      for (const auto& o : *r.objects) out.push_back(o.label);
    }
  }
  return out;
}

int RunCli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Unified multimodal sequence-to-sequence training and decoding"};
  app.require_subcommand(1);

  auto* gen = app.add_subcommand("gen-synthetic", "write a synthetic shapes corpus");
  std::string gen_out, gen_tasks;
  int gen_n = 100, gen_size = 64;
  std::uint64_t gen_seed = 0;
  gen->add_option("--out", gen_out, "output corpus (JSONL)")->required();
  gen->add_option("--n", gen_n, "number of records")->check(CLI::NonNegativeNumber);
  gen->add_option("--seed", gen_seed, "random seed")->required();
  gen->add_option("--image-size", gen_size, "image side in pixels");
  gen->add_option("--tasks", gen_tasks, "comma-separated task kinds (default: all)");

  auto* vocab_cmd = app.add_subcommand("train-vocab", "learn BPE merges from corpora");
  std::vector<std::string> vocab_corpora;
  std::string vocab_out;
  int text_size = 512, location_bins = 100, visual_size = 256;
  vocab_cmd->add_option("--corpus", vocab_corpora, "corpus files")->required();
  vocab_cmd->add_option("--out", vocab_out, "vocabulary file")->required();
  vocab_cmd->add_option("--text-size", text_size, "text id range size");
  vocab_cmd->add_option("--location-bins", location_bins, "location id range size");
  vocab_cmd->add_option("--visual-size", visual_size, "visual id range size");

  Overrides pre_flags, fine_flags, gen_flags, eval_flags;
  auto* pretrain = app.add_subcommand("pretrain", "train from scratch on mixed batches");
  pre_flags.Attach(pretrain, true);
  auto* finetune = app.add_subcommand("finetune", "continue training on one task");
  fine_flags.Attach(finetune, true);
  finetune->add_option("--init", fine_flags.init, "initial checkpoint");
  finetune->add_option("--validation", fine_flags.validation,
                       "validation corpus for checkpoint selection");

  std::string decode_mode = "auto", labels, input, predictions;
  auto* generate = app.add_subcommand("generate", "decode one input record");
  gen_flags.Attach(generate, false);
  generate->add_option("--checkpoint", gen_flags.checkpoint, "model checkpoint");
  generate->add_option("--input", input, "JSON record to decode");
  for (auto* cmd : {generate, app.add_subcommand("eval", "decode and score a corpus")}) {
    cmd->add_option("--decode", decode_mode, "auto, beam, trie or all-candidate");
    cmd->add_option("--labels", labels, "closed label set: a,b,c or @file");
  }
  auto* eval = app.get_subcommand("eval");
  eval_flags.Attach(eval, false);
  eval->add_option("--checkpoint", eval_flags.checkpoint, "model checkpoint");
  eval->add_option("--corpus", eval_flags.corpus, "evaluation corpus (JSONL)");
  eval->add_option("--out", eval_flags.report, "report file (JSON)");
  eval->add_option("--predictions", predictions,
                   "score these predictions (one per line) instead of decoding");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      out << app.help();
      return kExitOk;
    }
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  }

  try {
    if (gen->parsed()) return CmdGenSynthetic(gen_out, gen_n, gen_seed, gen_size, gen_tasks, out);
    if (vocab_cmd->parsed()) {
      return CmdTrainVocab(vocab_corpora, vocab_out, text_size, location_bins, visual_size,
                           out);
    }
    if (pretrain->parsed()) return CmdPretrain(pre_flags.Resolve(), pre_flags.omit_timing, out);
    if (finetune->parsed()) {
      return CmdFinetune(fine_flags.Resolve(), fine_flags.omit_timing, out);
    }
    if (generate->parsed()) {
      return CmdGenerate(gen_flags.Resolve(), input, ParseDecodeMode(decode_mode), labels,
                         out);
    }
    if (eval->parsed()) {
      return CmdEval(eval_flags.Resolve(), ParseDecodeMode(decode_mode), labels, predictions,
                     out);
    }
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const NumericError& e) {
    err << "numeric failure: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitData;
  }
  return kExitUsage;
}

}  // namespace uniseq
