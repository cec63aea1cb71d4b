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

#ifndef UNISEQ_CORPUS_HPP_
#define UNISEQ_CORPUS_HPP_

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "uniseq/image.hpp"
#include "uniseq/sample.hpp"
#include "uniseq/vocab.hpp"

namespace uniseq {

/// Malformed corpus content; `record_index` is -1 when not tied to a line.
class CorpusError : public std::runtime_error {
 public:
  CorpusError(const std::string& what, long record_index = -1)
      : std::runtime_error(what), record_index_(record_index) {}
  long record_index() const { return record_index_; }

 private:
  long record_index_;
};

struct DetectionObject {
  BoundingBox box;
  std::string label;

  friend bool operator==(const DetectionObject&, const DetectionObject&) =
      default;
};

/// One JSONL line. Images are base64-encoded PNG.
struct CorpusRecord {
  std::string task;
  std::optional<std::string> text;
  std::optional<std::string> image;
  std::optional<std::string> question;
  std::optional<std::string> answer;
  std::optional<std::string> label;
  std::optional<std::vector<DetectionObject>> objects;
  std::optional<std::string> summary;
  std::optional<std::string> premise;
  std::optional<std::string> hypothesis;
  std::optional<std::string> nli_label;

  /// Checks the fields the declared task needs and that images decode.
  void Validate() const;
  ImageRaster DecodeImage() const;
  /// The reference output the task is trained to produce.
  std::string Reference() const;

  friend bool operator==(const CorpusRecord&, const CorpusRecord&) = default;
};

nlohmann::json ToJson(const CorpusRecord& record);
CorpusRecord CorpusRecordFromJson(const nlohmann::json& j);

/// Reads and validates every line; errors carry the 0-based line index.
std::vector<CorpusRecord> ReadCorpus(const std::filesystem::path& path);
void WriteCorpus(const std::filesystem::path& path,
                 const std::vector<CorpusRecord>& records);

// Synthetic shapes corpus -------------------------------------------------

struct SyntheticOptions {
  int image_size = 64;
  std::vector<TaskKind> tasks{std::begin(kAllTaskKinds),
                              std::end(kAllTaskKinds)};
};

/// Colored shapes on black backgrounds; every text field is derived from
/// the drawn pixels. Task kinds cycle through `options.tasks`.
std::vector<CorpusRecord> GenerateSyntheticCorpus(
    int n_records, std::uint64_t seed, const SyntheticOptions& options = {});

/// Shape and color vocabularies used by the generator.
const std::vector<std::string>& SyntheticShapes();
const std::vector<std::string>& SyntheticColors();

}  // namespace uniseq

#endif  // UNISEQ_CORPUS_HPP_
