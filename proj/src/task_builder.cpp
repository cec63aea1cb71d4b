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

#include "uniseq/task_builder.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace uniseq {
namespace {

constexpr std::string_view kTaskNames[] = {
    "mim", "mlm", "detection", "caption", "vqa", "classification",
    "summarization", "nli"};

std::vector<TokenId> WrapSource(std::vector<TokenId> body) {
  body.insert(body.begin(), kBosId);
  body.push_back(kEosId);
  return body;
}

Sample TextSample(TaskKind kind, std::string instruction,
                  const UnifiedVocab& vocab, std::string_view target) {
  Sample s;
  s.task = kind;
  s.source_text_ids = WrapSource(EncodeText(vocab, instruction));
  s.instruction = std::move(instruction);
  s.target_ids = EncodeText(vocab, target);
  s.target_ids.push_back(kEosId);
  return s;
}

const std::string& Field(const std::optional<std::string>& field,
                         const char* name) {
  if (!field) {
    throw CorpusError(std::string("record is missing field '") + name + "'");
  }
  return *field;
}

ImageRaster ToChannels(const ImageRaster& image, int channels) {
  if (channels == image.channels) return image;
  if (channels == 3) return ToRgb(image);
  ImageRaster gray(image.height, image.width, 1);
  for (std::size_t i = 0; i < gray.pixels.size(); ++i) {
    const int sum = image.pixels[3 * i] + image.pixels[3 * i + 1] +
                    image.pixels[3 * i + 2];
    gray.pixels[i] = static_cast<std::uint8_t>((sum + 1) / 3);
  }
  return gray;
}

}  // namespace

std::string_view TaskName(TaskKind kind) {
  return kTaskNames[static_cast<int>(kind)];
}

std::optional<TaskKind> ParseTaskName(std::string_view name) {
  for (TaskKind kind : kAllTaskKinds) {
    if (TaskName(kind) == name) return kind;
  }
  return std::nullopt;
}

std::string ValidTaskNames() {
  std::string out;
  for (TaskKind kind : kAllTaskKinds) {
    if (!out.empty()) out += ", ";
    out += TaskName(kind);
  }
  return out;
}

std::string MlmInstruction(std::string_view text) {
  return "What is the complete text of '" + std::string(text) + "'?";
}

std::string SummaryInstruction(std::string_view text) {
  return "What is the summary of text '" + std::string(text) + "'?";
}

std::string NliInstruction(std::string_view text1, std::string_view text2) {
  return "Can text1 '" + std::string(text1) + "' imply text2 '" +
         std::string(text2) + "'?";
}

SourceImageOptions ImageOptionsFor(const ModelConfig& config) {
  return {config.image_size, config.patch_size, config.image_channels};
}

std::vector<ImagePatch> ImageToPatches(const ImageRaster& image,
                                       const SourceImageOptions& options) {
  const ImageRaster sized = ResizeBilinear(
      ToChannels(image, options.channels), options.image_size, options.image_size);
  return ExtractPatches(sized, options.patch_size);
}

Sample MakeMlmSample(std::string_view text, const UnifiedVocab& vocab,
                     double mask_rate, std::mt19937_64& rng) {
  if (text.empty()) throw CorpusError("mlm text must be nonempty");
  if (mask_rate < 0.0 || mask_rate > 1.0) {
    throw CorpusError("mask rate must lie in [0,1]");
  }
  const std::vector<TokenId> ids = EncodeText(vocab, text);
  const std::size_t n = ids.size();
  const auto n_masked =
      static_cast<std::size_t>(std::round(mask_rate * static_cast<double>(n)));

  // Partial Fisher-Yates: the first n_masked entries are the chosen slots.
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  for (std::size_t i = 0; i < n_masked; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, n - 1);
    std::swap(order[i], order[pick(rng)]);
  }
  std::vector<bool> masked(n, false);
  for (std::size_t i = 0; i < n_masked; ++i) masked[order[i]] = true;

  const std::string prefix = MlmInstruction("");
  const std::string opening = prefix.substr(0, prefix.size() - 2);  // "...'"
  const std::string closing = "'?";

  Sample s;
  s.task = TaskKind::kMlm;
  std::vector<TokenId> body = EncodeText(vocab, opening);
  std::string shown;
  for (std::size_t i = 0; i < n; ++i) {
    if (masked[i]) {
      body.push_back(kMaskId);
      shown += "<mask>";
    } else {
      body.push_back(ids[i]);
      shown += vocab.spelling(ids[i]);
    }
  }
  const auto tail = EncodeText(vocab, closing);
  body.insert(body.end(), tail.begin(), tail.end());
  s.source_text_ids = WrapSource(std::move(body));
  s.instruction = MlmInstruction(shown);
  s.target_ids = ids;
  s.target_ids.push_back(kEosId);
  return s;
}

Sample MakeMimSample(const ImageRaster& image, const UnifiedVocab& vocab,
                     int patch_size, int channels,
                     const VisualCodebook* codebook) {
  const PreprocessedImage pre = PreprocessImage(ToChannels(ToRgb(image), channels));
  if (kCanvasSize % patch_size != 0 || kCenterSize % patch_size != 0) {
    throw ImageError("patch size must divide the canvas and center sizes");
  }
  Sample s;
  s.task = TaskKind::kMim;
  s.instruction = std::string(kMimInstruction);
  s.source_text_ids = WrapSource(EncodeText(vocab, kMimInstruction));
  s.source_patches = ExtractPatches(pre.canvas, patch_size);
  const int first = (kCanvasSize - kCenterSize) / 2 / patch_size;
  const int last = first + kCenterSize / patch_size;
  for (auto& patch : s.source_patches) {
    if (patch.row >= first && patch.row < last && patch.col >= first &&
        patch.col < last) {
      patch.masked = true;
      patch.pixels.clear();
    }
  }
  s.target_ids = QuantizeImagePatches(pre.center, vocab, 8, codebook);
  s.target_ids.push_back(kEosId);
  return s;
}

Sample MakeDetectionSample(const ImageRaster& image,
                           std::span<const DetectionObject> objects,
                           const UnifiedVocab& vocab,
                           const SourceImageOptions& options) {
  Sample s;
  s.task = TaskKind::kDetection;
  s.instruction = std::string(kDetectionInstruction);
  s.source_text_ids = WrapSource(EncodeText(vocab, kDetectionInstruction));
  for (const auto& object : objects) {
    const auto locs = QuantizeBox(object.box, vocab);
    s.target_ids.insert(s.target_ids.end(), locs.begin(), locs.end());
    const auto label = EncodeText(vocab, object.label);
    s.target_ids.insert(s.target_ids.end(), label.begin(), label.end());
  }
  s.target_ids.push_back(kEosId);
  s.source_patches = ImageToPatches(image, options);
  return s;
}

Sample MakePromptedSample(TaskKind kind, const CorpusRecord& record,
                          const UnifiedVocab& vocab,
                          const SourceImageOptions& options) {
  Sample s;
  switch (kind) {
    case TaskKind::kCaption:
      s = TextSample(kind, std::string(kCaptionInstruction), vocab,
                     Field(record.text, "text"));
      break;
    case TaskKind::kClassification:
      s = TextSample(kind, std::string(kCaptionInstruction), vocab,
                     Field(record.label, "label"));
      break;
    case TaskKind::kVqa:
      s = TextSample(kind, Field(record.question, "question"), vocab,
                     Field(record.answer, "answer"));
      break;
    case TaskKind::kSummarization:
      return TextSample(kind, SummaryInstruction(Field(record.text, "text")),
                        vocab, Field(record.summary, "summary"));
    case TaskKind::kNli:
      return TextSample(kind,
                        NliInstruction(Field(record.premise, "premise"),
                                       Field(record.hypothesis, "hypothesis")),
                        vocab, Field(record.nli_label, "nli_label"));
    default:
      throw CorpusError("task '" + std::string(TaskName(kind)) +
                        "' is not an instruction-prompted task");
  }
  Field(record.image, "image");
  s.source_patches = ImageToPatches(record.DecodeImage(), options);
  return s;
}

std::vector<ImagePatch> SubsamplePatches(std::vector<ImagePatch> patches,
                                         int keep, std::mt19937_64& rng) {
  if (keep < 1) throw CorpusError("must keep at least one patch");
  const std::size_t n = patches.size();
  const auto k = static_cast<std::size_t>(keep);
  if (n <= k) return patches;
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  for (std::size_t i = 0; i < k; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, n - 1);
    std::swap(order[i], order[pick(rng)]);
  }
  order.resize(k);
  std::sort(order.begin(), order.end());
  std::vector<ImagePatch> out;
  out.reserve(k);
  for (std::size_t i : order) out.push_back(std::move(patches[i]));
  return out;
}

Sample BuildSample(const CorpusRecord& record, const UnifiedVocab& vocab,
                   const SampleBuildOptions& options, std::mt19937_64& rng) {
  const auto kind = ParseTaskName(record.task);
  if (!kind) {
    throw CorpusError("unknown task '" + record.task + "' (valid: " +
                      ValidTaskNames() + ")");
  }
  Sample s;
  switch (*kind) {
    case TaskKind::kMlm:
      s = MakeMlmSample(Field(record.text, "text"), vocab, options.mask_rate,
                        rng);
      break;
    case TaskKind::kMim:
      Field(record.image, "image");
      s = MakeMimSample(record.DecodeImage(), vocab, options.image.patch_size,
                        options.image.channels);
      break;
    case TaskKind::kDetection:
      Field(record.image, "image");
      if (!record.objects) {
        throw CorpusError("record is missing field 'objects'");
      }
      s = MakeDetectionSample(record.DecodeImage(), *record.objects, vocab,
                              options.image);
      break;
    default:
      s = MakePromptedSample(*kind, record, vocab, options.image);
      break;
  }
  if (options.keep_patches > 0) {
    s.source_patches =
        SubsamplePatches(std::move(s.source_patches), options.keep_patches, rng);
  }
  const int patches = static_cast<int>(s.source_patches.size());
  const int room = options.max_source_length - patches;
  if (room < 2) throw CorpusError("image patches leave no room for text");
  if (static_cast<int>(s.source_text_ids.size()) > room) {
    s.source_text_ids.resize(room);
    s.source_text_ids.back() = kEosId;
  }
  return s;
}

TaskCategory CategoryOf(TaskKind kind) {
  switch (kind) {
    case TaskKind::kMim:
      return TaskCategory::kVisionOnly;
    case TaskKind::kDetection:
      return TaskCategory::kDetection;
    case TaskKind::kMlm:
    case TaskKind::kSummarization:
    case TaskKind::kNli:
      return TaskCategory::kTextOnly;
    default:
      return TaskCategory::kMultimodal;
  }
}

void TaskMixConfig::Validate() const {
  int sum = 0;
  for (int r : ratio) {
    if (r < 0) throw CorpusError("mix ratio components must be nonnegative");
    sum += r;
  }
  if (sum == 0) throw CorpusError("mix ratio must not be all zero");
}

SampleStream::SampleStream(std::vector<std::vector<Sample>> strata) {
  for (auto& s : strata) {
    if (s.empty()) continue;
    total_ += s.size();
    strata_.push_back(std::move(s));
  }
  cursors_.assign(strata_.size(), 0);
}

const Sample& SampleStream::Next(bool balanced) {
  if (total_ == 0) throw CorpusError("sample stream is empty");
  if (balanced) {
    const std::size_t k = next_stratum_;
    next_stratum_ = (next_stratum_ + 1) % strata_.size();
    const Sample& s = strata_[k][cursors_[k]];
    cursors_[k] = (cursors_[k] + 1) % strata_[k].size();
    return s;
  }
  std::size_t offset = flat_cursor_;
  flat_cursor_ = (flat_cursor_ + 1) % total_;
  for (const auto& stratum : strata_) {
    if (offset < stratum.size()) return stratum[offset];
    offset -= stratum.size();
  }
  return strata_.front().front();  // unreachable
}

std::vector<Sample> MixBatch(std::array<SampleStream, kCategoryCount>& streams,
                             const TaskMixConfig& mix, int batch_size) {
  mix.Validate();
  const int sum = std::accumulate(mix.ratio.begin(), mix.ratio.end(), 0);
  if (batch_size <= 0 || batch_size % sum != 0) {
    throw CorpusError("batch size " + std::to_string(batch_size) +
                      " is not a positive multiple of the mix ratio sum " +
                      std::to_string(sum));
  }
  static constexpr const char* kNames[] = {"multimodal", "text-only",
                                           "vision-only", "detection"};
  std::vector<Sample> batch;
  batch.reserve(batch_size);
  for (int c = 0; c < kCategoryCount; ++c) {
    const int count = batch_size / sum * mix.ratio[c];
    if (count > 0 && streams[c].empty()) {
      throw CorpusError(std::string("empty ") + kNames[c] +
                        " stream required by the mix ratio");
    }
    for (int i = 0; i < count; ++i) batch.push_back(streams[c].Next(mix.balance));
  }
  return batch;
}

}  // namespace uniseq
