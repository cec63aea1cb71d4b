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
#include <random>
#include <set>
#include <string>
#include <vector>

#include "../oracle_values.hpp"
#include "uniseq/task_builder.hpp"

namespace uniseq {
namespace {

std::vector<TokenId> Join(std::vector<TokenId> a, const std::vector<TokenId>& b) {
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

CorpusRecord ImageRecord(const std::string& task) {
  CorpusRecord r;
  r.task = task;
  r.image = Base64Encode(EncodePng(ImageRaster(32, 32, 3, 90)));
  return r;
}

TEST_CASE("instruction strings") {
  CHECK(kMimInstruction == "What is the image in the middle part?");
  CHECK(kDetectionInstruction == "What are the objects in the image?");
  CHECK(kCaptionInstruction == "What does the image describe?");
  CHECK(NliInstruction("t1", "t2") == "Can text1 't1' imply text2 't2'?");
  CHECK(SummaryInstruction("x y") == "What is the summary of text 'x y'?");
  CHECK(MlmInstruction("a <mask>") == "What is the complete text of 'a <mask>'?");
}

TEST_CASE("mlm masks a fixed share of tokens") {
  const UnifiedVocab v(kFirstMergeId, 10, 10);
  const std::string text = "abcdefghijklmnopqrst";  // 20 byte tokens
  std::mt19937_64 rng(4);
  const Sample s = MakeMlmSample(text, v, 0.15, rng);
  CHECK(std::count(s.source_text_ids.begin(), s.source_text_ids.end(), kMaskId) ==
        oracle::kMlmMasksOfTwenty);
  CHECK(s.target_ids == Join(EncodeText(v, text), {kEosId}));
  CHECK(s.source_text_ids.front() == kBosId);
  CHECK(s.source_text_ids.back() == kEosId);

  std::mt19937_64 again(4);
  CHECK(MakeMlmSample(text, v, 0.15, again).source_text_ids == s.source_text_ids);

  const Sample none = MakeMlmSample(text, v, 0.0, rng);
  CHECK(none.instruction == MlmInstruction(text));
  CHECK(none.target_ids == Join(EncodeText(v, text), {kEosId}));
  CHECK_THROWS_AS(MakeMlmSample("", v, 0.15, rng), CorpusError);
}

TEST_CASE("mim targets the central 128 block") {
  const UnifiedVocab v = UnifiedVocab::StandardPreset();
  const Sample s = MakeMimSample(ImageRaster(300, 200, 3, 0), v);
  REQUIRE(s.target_ids.size() == 257);
  CHECK(std::all_of(s.target_ids.begin(), s.target_ids.end() - 1,
                    [&](TokenId t) { return t == v.visual_token(0); }));
  CHECK(s.target_ids.back() == kEosId);
  CHECK(s.instruction == kMimInstruction);
  const long masked = std::count_if(s.source_patches.begin(), s.source_patches.end(),
                                    [](const ImagePatch& p) { return p.masked; });
  CHECK(s.source_patches.size() == 1024);
  CHECK(masked == 256);
  CHECK(s.source_patches[8 * 32 + 8].masked);
  CHECK_FALSE(s.source_patches[7 * 32 + 8].masked);
}

TEST_CASE("detection targets") {
  const UnifiedVocab v = UnifiedVocab::StandardPreset();
  const ImageRaster img(64, 64, 3, 10);
  const SourceImageOptions opts{64, 8, 3};
  const std::vector<DetectionObject> chest{{{0, 0, 1, 1}, "chest"}};
  const Sample s = MakeDetectionSample(img, chest, v, opts);
  std::vector<TokenId> want{v.location_token(0), v.location_token(0),
                            v.location_token(999), v.location_token(999)};
  want = Join(want, EncodeText(v, "chest"));
  want.push_back(kEosId);
  CHECK(s.target_ids == want);
  CHECK(s.instruction == kDetectionInstruction);

  CHECK(MakeDetectionSample(img, {}, v, opts).target_ids == std::vector<TokenId>{kEosId});

  const std::vector<DetectionObject> two{{{0, 0, 1, 1}, "chest"},
                                         {{0.1, 0.2, 0.3, 0.4}, "kidney"}};
  const Sample both = MakeDetectionSample(img, two, v, opts);
  const std::vector<DetectionObject> second{two[1]};
  const Sample only = MakeDetectionSample(img, second, v, opts);
  CHECK(both.target_ids ==
        Join(std::vector<TokenId>(want.begin(), want.end() - 1), only.target_ids));

  const std::vector<DetectionObject> bad{{{0.5, 0, 0.2, 1}, "x"}};
  CHECK_THROWS(MakeDetectionSample(img, bad, v, opts));
}

TEST_CASE("prompted samples") {
  const UnifiedVocab v(kFirstMergeId, 10, 10);
  const SourceImageOptions opts{32, 8, 3};
  CorpusRecord cap = ImageRecord("caption");
  cap.text = "a red circle";
  const Sample c = MakePromptedSample(TaskKind::kCaption, cap, v, opts);
  CHECK(c.instruction == "What does the image describe?");
  CHECK(c.source_patches.size() == 16);
  CHECK(c.target_ids == Join(EncodeText(v, "a red circle"), {kEosId}));

  CorpusRecord vqa = ImageRecord("vqa");
  vqa.question = "What modality is shown?";
  vqa.answer = "ct";
  CHECK(MakePromptedSample(TaskKind::kVqa, vqa, v, opts).instruction ==
        "What modality is shown?");

  CorpusRecord nli;
  nli.task = "nli";
  nli.premise = "t1";
  nli.hypothesis = "t2";
  nli.nli_label = "yes";
  const Sample n = MakePromptedSample(TaskKind::kNli, nli, v, opts);
  CHECK(n.instruction == "Can text1 't1' imply text2 't2'?");
  CHECK(n.source_patches.empty());

  CorpusRecord missing = ImageRecord("vqa");
  missing.question = "q?";
  CHECK_THROWS_WITH_AS(MakePromptedSample(TaskKind::kVqa, missing, v, opts),
                       doctest::Contains("answer"), CorpusError);
}

TEST_CASE("patch subsampling") {
  std::vector<ImagePatch> patches(1024);
  for (int i = 0; i < 1024; ++i) patches[i].row = i;
  std::mt19937_64 rng(8);
  const auto kept = SubsamplePatches(patches, 196, rng);
  CHECK(kept.size() == 196);
  CHECK(std::is_sorted(kept.begin(), kept.end(), [](const auto& a, const auto& b) {
    return a.row < b.row;
  }));
  std::mt19937_64 rng2(8);
  CHECK(SubsamplePatches(patches, 196, rng2) == kept);

  std::vector<ImagePatch> few(patches.begin(), patches.begin() + 100);
  CHECK(SubsamplePatches(few, 196, rng) == few);
}

std::array<SampleStream, kCategoryCount> Streams() {
  std::array<SampleStream, kCategoryCount> out;
  const TaskKind kinds[] = {TaskKind::kCaption, TaskKind::kMlm, TaskKind::kMim,
                            TaskKind::kDetection};
  for (int c = 0; c < kCategoryCount; ++c) {
    std::vector<Sample> one(3);
    for (auto& s : one) s.task = kinds[c];
    out[c] = SampleStream({one});
  }
  return out;
}

std::array<int, kCategoryCount> Counts(const std::vector<Sample>& batch) {
  std::array<int, kCategoryCount> n{};
  for (const auto& s : batch) ++n[static_cast<int>(CategoryOf(s.task))];
  return n;
}

TEST_CASE("batch mixing") {
  auto streams = Streams();
  TaskMixConfig mix;
  CHECK(Counts(MixBatch(streams, mix, 12)) == std::array<int, 4>{8, 2, 1, 1});
  CHECK(Counts(MixBatch(streams, mix, 24)) == std::array<int, 4>{16, 4, 2, 2});
  CHECK_THROWS_AS(MixBatch(streams, mix, 10), CorpusError);

  TaskMixConfig only;
  only.ratio = {1, 0, 0, 0};
  std::array<SampleStream, kCategoryCount> partial;
  partial[0] = std::move(streams[0]);
  CHECK(Counts(MixBatch(partial, only, 5)) == std::array<int, 4>{5, 0, 0, 0});
  CHECK_THROWS_AS(MixBatch(partial, mix, 12), CorpusError);
}

TEST_CASE("balanced streams alternate strata") {
  std::vector<Sample> a(5), b(1);
  for (auto& s : a) s.task = TaskKind::kCaption;
  b[0].task = TaskKind::kVqa;
  SampleStream stream({a, b});
  std::multiset<TaskKind> seen;
  for (int i = 0; i < 4; ++i) seen.insert(stream.Next(true).task);
  CHECK(seen.count(TaskKind::kVqa) == 2);
}

TEST_CASE("task categories") {
  CHECK(CategoryOf(TaskKind::kMim) == TaskCategory::kVisionOnly);
  CHECK(CategoryOf(TaskKind::kDetection) == TaskCategory::kDetection);
  CHECK(CategoryOf(TaskKind::kNli) == TaskCategory::kTextOnly);
  CHECK(CategoryOf(TaskKind::kVqa) == TaskCategory::kMultimodal);
  CHECK(ParseTaskName("classification") == TaskKind::kClassification);
  CHECK_FALSE(ParseTaskName("segmentation").has_value());
}

}  // namespace
}  // namespace uniseq
