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

#ifndef UNISEQ_COMMANDS_HPP_
#define UNISEQ_COMMANDS_HPP_

#include <array>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "uniseq/model_config.hpp"
#include "uniseq/search.hpp"
#include "uniseq/trainer.hpp"
#include "uniseq/vocab.hpp"

namespace uniseq {

/// Exit codes of the command-line tool.
enum ExitCode : int {
  kExitOk = 0,
  kExitUsage = 1,
  kExitData = 2,
  kExitNumeric = 3,
};

/// Bad flags or flag combinations (exit code 1).
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Everything a training or decoding command needs. Loaded from a JSON file;
/// command-line flags override individual keys.
struct RunConfig {
  nlohmann::json model = nlohmann::json::object();  // preset and/or fields
  std::optional<std::uint64_t> seed;
  long total_steps = 100;
  int batch_size = 12;
  std::array<int, 4> mix_ratio{8, 2, 1, 1};
  bool balance = true;
  OptimizerConfig optimizer;
  // Pretraining stores these in the model config; finetuning may override
  // dropout only, since evaluation rescales by the stored depth rate.
  std::optional<double> dropout;
  std::optional<double> stochastic_depth;
  double mask_rate = 0.15;
  int keep_patches = 196;
  long checkpoint_every = 0;
  DecodeConfig decode;
  std::string corpus, vocab, checkpoint, init, log, validation, report, task;

  static RunConfig FromJson(const nlohmann::json& j);
  /// Requires a seed; total_steps also drives the optimizer schedule.
  void Validate() const;
};

RunConfig LoadRunConfig(const std::string& path);

/// Detokenizes generated ids: text runs become bytes, location and visual
/// ids become <loc_K> and <img_K>; the trailing eos is dropped.
std::string FormatTokens(const UnifiedVocab& vocab, std::span<const TokenId> ids);

/// Strings fed to BPE training for a corpus: every text field plus the
/// instruction templates.
std::vector<std::string> VocabTrainingText(const std::string& corpus_path);

/// Entry point of the `uniseq` tool; returns the process exit code.
int RunCli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace uniseq

#endif  // UNISEQ_COMMANDS_HPP_
