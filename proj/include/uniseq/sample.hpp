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

#ifndef UNISEQ_SAMPLE_HPP_
#define UNISEQ_SAMPLE_HPP_

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "uniseq/image.hpp"
#include "uniseq/vocab.hpp"

namespace uniseq {

enum class TaskKind {
  kMim,
  kMlm,
  kDetection,
  kCaption,
  kVqa,
  kClassification,
  kSummarization,
  kNli,
};

inline constexpr TaskKind kAllTaskKinds[] = {
    TaskKind::kMim,     TaskKind::kMlm,           TaskKind::kDetection,
    TaskKind::kCaption, TaskKind::kVqa,           TaskKind::kClassification,
    TaskKind::kSummarization, TaskKind::kNli};

std::string_view TaskName(TaskKind kind);
std::optional<TaskKind> ParseTaskName(std::string_view name);
/// Comma-separated list of every task name.
std::string ValidTaskNames();

/// One training or evaluation instance.
struct Sample {
  TaskKind task = TaskKind::kCaption;
  std::string instruction;
  // bos + instruction tokens + eos
  std::vector<TokenId> source_text_ids;
  std::vector<ImagePatch> source_patches;
  // Ends with eos.
  std::vector<TokenId> target_ids;
};

}  // namespace uniseq

#endif  // UNISEQ_SAMPLE_HPP_
