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

#ifndef UNISEQ_TASK_BUILDER_HPP_
#define UNISEQ_TASK_BUILDER_HPP_

#include <array>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "uniseq/corpus.hpp"
#include "uniseq/image.hpp"
#include "uniseq/model_config.hpp"
#include "uniseq/sample.hpp"
#include "uniseq/vocab.hpp"

namespace uniseq {

inline constexpr std::string_view kMimInstruction =
    "What is the image in the middle part?";
inline constexpr std::string_view kDetectionInstruction =
    "What are the objects in the image?";
// Shared by captioning and image classification.
inline constexpr std::string_view kCaptionInstruction =
    "What does the image describe?";

std::string MlmInstruction(std::string_view text);
std::string SummaryInstruction(std::string_view text);
std::string NliInstruction(std::string_view text1, std::string_view text2);

/// How images become encoder patches for everything except MIM.
struct SourceImageOptions {
  int image_size = 256;
  int patch_size = 8;
  int channels = 3;
};

SourceImageOptions ImageOptionsFor(const ModelConfig& config);

/// Resized, channel-converted raster-order patches.
std::vector<ImagePatch> ImageToPatches(const ImageRaster& image,
                                       const SourceImageOptions& options);

/// Replaces exactly round(mask_rate * n) distinct token positions of the
/// embedded text with the mask token; the target is the original text.
Sample MakeMlmSample(std::string_view text, const UnifiedVocab& vocab,
                     double mask_rate, std::mt19937_64& rng);

/// Source: 256x256 canvas patch grid with the block covering the central
/// 128x128 window masked. Target: that window's visual codes, then eos.
Sample MakeMimSample(const ImageRaster& image, const UnifiedVocab& vocab,
                     int patch_size = 8, int channels = 3,
                     const VisualCodebook* codebook = nullptr);

/// Target: per object, 4 location ids then the label text; then eos.
Sample MakeDetectionSample(const ImageRaster& image,
                           std::span<const DetectionObject> objects,
                           const UnifiedVocab& vocab,
                           const SourceImageOptions& options);

/// Caption, classification, vqa, summarization and nli samples.
Sample MakePromptedSample(TaskKind kind, const CorpusRecord& record,
                          const UnifiedVocab& vocab,
                          const SourceImageOptions& options);

/// Keeps a uniform random subset of `keep` patches in their original order
/// when there are more than `keep`.
std::vector<ImagePatch> SubsamplePatches(std::vector<ImagePatch> patches,
                                         int keep, std::mt19937_64& rng);

struct SampleBuildOptions {
  SourceImageOptions image;
  double mask_rate = 0.15;
  int keep_patches = 196;  // 0 keeps all
  int max_source_length = kMaxSourceLength;
};

/// Dispatches on the record's task, subsamples patches and truncates the
/// source text so the encoder input fits `max_source_length`.
Sample BuildSample(const CorpusRecord& record, const UnifiedVocab& vocab,
                   const SampleBuildOptions& options, std::mt19937_64& rng);

// Batch mixing --------------------------------------------------------------

enum class TaskCategory { kMultimodal = 0, kTextOnly, kVisionOnly, kDetection };
inline constexpr int kCategoryCount = 4;

TaskCategory CategoryOf(TaskKind kind);

struct TaskMixConfig {
  // multimodal : text-only : vision-only : detection
  std::array<int, kCategoryCount> ratio{8, 2, 1, 1};
  // Round-robin over strata (source modalities) within a category.
  bool balance = true;

  void Validate() const;
};

/// Endless cyclic stream over one category's samples, split into strata.
class SampleStream {
 public:
  SampleStream() = default;
  explicit SampleStream(std::vector<std::vector<Sample>> strata);

  bool empty() const { return total_ == 0; }
  std::size_t size() const { return total_; }
  const Sample& Next(bool balanced);

 private:
  std::vector<std::vector<Sample>> strata_;
  std::vector<std::size_t> cursors_;
  std::size_t next_stratum_ = 0;
  std::size_t flat_cursor_ = 0;
  std::size_t total_ = 0;
};

/// Exactly batch_size * ratio[c] / sum(ratio) samples from each category c,
/// grouped in category order.
std::vector<Sample> MixBatch(std::array<SampleStream, kCategoryCount>& streams,
                             const TaskMixConfig& mix, int batch_size);

}  // namespace uniseq

#endif  // UNISEQ_TASK_BUILDER_HPP_
