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


#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "../support/toy_models.hpp"
#include "uniseq/checkpoint.hpp"
#include "uniseq/corpus.hpp"

namespace uniseq {
namespace {

std::filesystem::path TempPath(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("uniseq_test_" + name);
}

TEST_CASE("checkpoint bytes round trip exactly") {
  const auto params = InitModel<float>(testing::ToyConfig(8, 2, 2, 1), 4);
  const std::string bytes = SerializeCheckpoint(params);
  CHECK(bytes.substr(0, 8) == "USQCKPT1");
  const auto back = DeserializeCheckpoint(bytes);
  CHECK(back.config == params.config);
  CHECK(SerializeCheckpoint(back) == bytes);

  const auto path = TempPath("ckpt.bin");
  SaveCheckpoint(path, params);
  std::ifstream in(path, std::ios::binary);
  std::stringstream file;
  file << in.rdbuf();
  CHECK(file.str() == bytes);
  CHECK(SerializeCheckpoint(LoadCheckpoint(path)) == bytes);
  std::filesystem::remove(path);
}

TEST_CASE("corrupt checkpoints are rejected") {
  const std::string bytes = SerializeCheckpoint(InitModel<float>(testing::ToyConfig(4, 1, 1, 1), 1));
  CHECK_THROWS_AS(DeserializeCheckpoint("NOTACKPT"), CheckpointError);
  CHECK_THROWS_AS(DeserializeCheckpoint(bytes.substr(0, bytes.size() - 4)), CheckpointError);
  std::string bad_magic = bytes;
  bad_magic[0] = 'X';
  CHECK_THROWS_AS(DeserializeCheckpoint(bad_magic), CheckpointError);
  CHECK_THROWS_AS(LoadCheckpoint(TempPath("missing.bin")), CheckpointError);
}

TEST_CASE("corpus records round trip through json lines") {
  const auto records = GenerateSyntheticCorpus(16, 3);
  const auto path = TempPath("corpus.jsonl");
  WriteCorpus(path, records);
  CHECK(ReadCorpus(path) == records);
  std::filesystem::remove(path);
  for (const auto& r : records) CHECK(CorpusRecordFromJson(ToJson(r)) == r);
}

TEST_CASE("synthetic corpus is deterministic and covers every task") {
  const auto a = GenerateSyntheticCorpus(16, 9);
  CHECK(a == GenerateSyntheticCorpus(16, 9));
  CHECK_FALSE(a == GenerateSyntheticCorpus(16, 10));
  for (TaskKind kind : kAllTaskKinds) {
    CHECK(std::any_of(a.begin(), a.end(), [&](const CorpusRecord& r) {
      return r.task == TaskName(kind);
    }));
  }
}

TEST_CASE("synthetic detection boxes match the drawn pixels") {
  SyntheticOptions opts;
  opts.tasks = {TaskKind::kDetection};
  for (const auto& r : GenerateSyntheticCorpus(12, 21, opts)) {
    const ImageRaster img = r.DecodeImage();
    int x0 = img.width, y0 = img.height, x1 = -1, y1 = -1;
    for (int y = 0; y < img.height; ++y) {
      for (int x = 0; x < img.width; ++x) {
        if (img.at(y, x, 0) || img.at(y, x, 1) || img.at(y, x, 2)) {
          x0 = std::min(x0, x);
          y0 = std::min(y0, y);
          x1 = std::max(x1, x + 1);
          y1 = std::max(y1, y + 1);
        }
      }
    }
    REQUIRE(r.objects.has_value());
    const BoundingBox& b = r.objects->front().box;
    CHECK(std::abs(b.x1 * img.width - x0) <= 1.0);
    CHECK(std::abs(b.y1 * img.height - y0) <= 1.0);
    CHECK(std::abs(b.x2 * img.width - x1) <= 1.0);
    CHECK(std::abs(b.y2 * img.height - y1) <= 1.0);
  }
}

TEST_CASE("record validation names the missing field") {
  CorpusRecord r;
  r.task = "summarization";
  r.text = "x";
  CHECK_THROWS_WITH_AS(r.Validate(), doctest::Contains("summary"), CorpusError);
  r.task = "painting";
  CHECK_THROWS_AS(r.Validate(), CorpusError);
}

}  // namespace
}  // namespace uniseq
