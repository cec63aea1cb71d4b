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

#include "uniseq/vocab.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

namespace uniseq {
namespace {

constexpr std::string_view kVocabMagic = "uniseq-vocab";
constexpr int kVocabVersion = 1;

// Splits text into pre-token chunks: a chunk boundary sits before every
// space that follows a non-space byte, so " word" stays one chunk.
std::vector<std::string_view> SplitChunks(std::string_view text) {
  std::vector<std::string_view> chunks;
  std::size_t start = 0;
  for (std::size_t i = 1; i < text.size(); ++i) {
    if (text[i] == ' ' && text[i - 1] != ' ') {
      chunks.push_back(text.substr(start, i - start));
      start = i;
    }
  }
  if (start < text.size()) chunks.push_back(text.substr(start));
  return chunks;
}

std::vector<TokenId> ByteIds(std::string_view chunk) {
  std::vector<TokenId> ids;
  ids.reserve(chunk.size());
  for (unsigned char c : chunk) ids.push_back(kSpecialCount + c);
  return ids;
}

// Replaces every non-overlapping occurrence of (left, right), scanning
// left to right.
void ApplyMerge(std::vector<TokenId>& ids, const MergePair& pair,
                TokenId merged) {
  std::size_t out = 0;
  for (std::size_t i = 0; i < ids.size();) {
    if (i + 1 < ids.size() && ids[i] == pair.first &&
        ids[i + 1] == pair.second) {
      ids[out++] = merged;
      i += 2;
    } else {
      ids[out++] = ids[i++];
    }
  }
  ids.resize(out);
}

}  // namespace

UnifiedVocab::UnifiedVocab(int text_size, int location_bins, int visual_size,
                           std::vector<MergePair> merges)
    : text_size_(text_size),
      location_bins_(location_bins),
      visual_size_(visual_size),
      merges_(std::move(merges)) {
  if (location_bins_ < 1 || visual_size_ < 1) {
    throw VocabError("location and visual ranges must be nonempty");
  }
  if (text_size_ < kFirstMergeId + static_cast<int>(merges_.size())) {
    throw VocabError("text range too small for byte alphabet and merges");
  }
  spellings_.resize(kFirstMergeId + merges_.size());
  for (int b = 0; b < kByteAlphabet; ++b) {
    spellings_[kSpecialCount + b] = std::string(1, static_cast<char>(b));
  }
  for (std::size_t r = 0; r < merges_.size(); ++r) {
    const auto& [left, right] = merges_[r];
    const TokenId id = kFirstMergeId + static_cast<TokenId>(r);
    if (left < kSpecialCount || right < kSpecialCount || left >= id ||
        right >= id) {
      throw VocabError("merge " + std::to_string(r) +
                       " references a token that does not exist yet");
    }
    spellings_[id] = spellings_[left] + spellings_[right];
    ranks_.emplace(merges_[r], static_cast<int>(r));
  }
}

UnifiedVocab UnifiedVocab::StandardPreset() {
  return UnifiedVocab(50265, 1000, 8192);
}

TokenId UnifiedVocab::location_token(int bin) const {
  if (bin < 0 || bin >= location_bins_) {
    throw VocabError("location bin out of range: " + std::to_string(bin));
  }
  return location_offset() + bin;
}

TokenId UnifiedVocab::visual_token(int code) const {
  if (code < 0 || code >= visual_size_) {
    throw VocabError("visual code out of range: " + std::to_string(code));
  }
  return visual_offset() + code;
}

const std::string& UnifiedVocab::spelling(TokenId id) const {
  static const std::string kEmpty;
  if (!is_text(id)) throw VocabError("non-text token " + std::to_string(id));
  if (id >= static_cast<TokenId>(spellings_.size())) return kEmpty;
  return spellings_[id];
}

int UnifiedVocab::merge_rank(TokenId left, TokenId right) const {
  auto it = ranks_.find({left, right});
  return it == ranks_.end() ? -1 : it->second;
}

void UnifiedVocab::Save(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw VocabError("cannot write vocab file " + path.string());
  out << kVocabMagic << ' ' << kVocabVersion << ' ' << text_size_ << ' '
      << location_bins_ << ' ' << visual_size_ << '\n';
  for (const auto& [left, right] : merges_) {
    out << left << ' ' << right << '\n';
  }
  if (!out) throw VocabError("failed writing vocab file " + path.string());
}

UnifiedVocab UnifiedVocab::Load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw VocabError("cannot read vocab file " + path.string());
  std::string header;
  std::getline(in, header);
  std::istringstream hs(header);
  std::string magic;
  int version = 0, text = 0, loc = 0, vis = 0;
  if (!(hs >> magic >> version >> text >> loc >> vis) || magic != kVocabMagic) {
    throw VocabError("malformed vocab header in " + path.string());
  }
  if (version != kVocabVersion) {
    throw VocabError("unsupported vocab version " + std::to_string(version));
  }
  std::vector<MergePair> merges;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    MergePair pair;
    if (!(ls >> pair.first >> pair.second)) {
      throw VocabError("malformed merge line: " + line);
    }
    merges.push_back(pair);
  }
  return UnifiedVocab(text, loc, vis, std::move(merges));
}

std::vector<MergePair> TrainBpe(std::span<const std::string> corpus,
                                int target_text_size) {
  if (target_text_size < kFirstMergeId) {
    throw VocabError("target text size below byte alphabet plus specials");
  }
  const int wanted = target_text_size - kFirstMergeId;
  if (wanted == 0) return {};
  if (corpus.empty()) throw VocabError("insufficient statistics");

  std::map<std::string, long> chunk_counts;
  for (const auto& text : corpus) {
    for (auto chunk : SplitChunks(text)) ++chunk_counts[std::string(chunk)];
  }
  std::vector<std::vector<TokenId>> words;
  std::vector<long> freqs;
  for (const auto& [chunk, count] : chunk_counts) {
    words.push_back(ByteIds(chunk));
    freqs.push_back(count);
  }

  std::vector<MergePair> merges;
  while (static_cast<int>(merges.size()) < wanted) {
    std::map<MergePair, long> pair_counts;
    for (std::size_t w = 0; w < words.size(); ++w) {
      const auto& ids = words[w];
      for (std::size_t i = 0; i + 1 < ids.size(); ++i) {
        pair_counts[{ids[i], ids[i + 1]}] += freqs[w];
      }
    }
    if (pair_counts.empty()) break;
    // std::map iterates in ascending pair order, so the first maximum wins
    // ties deterministically.
    auto best = pair_counts.begin();
    for (auto it = pair_counts.begin(); it != pair_counts.end(); ++it) {
      if (it->second > best->second) best = it;
    }
    const TokenId merged =
        kFirstMergeId + static_cast<TokenId>(merges.size());
    merges.push_back(best->first);
    for (auto& ids : words) ApplyMerge(ids, best->first, merged);
  }
  if (merges.empty()) throw VocabError("insufficient statistics");
  return merges;
}

std::vector<TokenId> EncodeText(const UnifiedVocab& vocab,
                                std::string_view text) {
  std::vector<TokenId> out;
  for (auto chunk : SplitChunks(text)) {
    std::vector<TokenId> ids = ByteIds(chunk);
    while (ids.size() > 1) {
      int best_rank = std::numeric_limits<int>::max();
      for (std::size_t i = 0; i + 1 < ids.size(); ++i) {
        const int rank = vocab.merge_rank(ids[i], ids[i + 1]);
        if (rank >= 0 && rank < best_rank) best_rank = rank;
      }
      if (best_rank == std::numeric_limits<int>::max()) break;
      ApplyMerge(ids, vocab.merges()[best_rank],
                 kFirstMergeId + static_cast<TokenId>(best_rank));
    }
    out.insert(out.end(), ids.begin(), ids.end());
  }
  return out;
}

std::string DecodeText(const UnifiedVocab& vocab,
                       std::span<const TokenId> ids) {
  std::string out;
  for (TokenId id : ids) {
    if (!vocab.is_text(id)) {
      throw VocabError("non-text token " + std::to_string(id));
    }
    out += vocab.spelling(id);
  }
  return out;
}

void BoundingBox::Validate() const {
  auto in_unit = [](double v) { return v >= 0.0 && v <= 1.0; };
  if (!in_unit(x1) || !in_unit(y1) || !in_unit(x2) || !in_unit(y2)) {
    throw VocabError("box coordinate outside [0,1]");
  }
  if (x1 > x2 || y1 > y2) throw VocabError("box corners out of order");
}

int QuantizeCoordinate(double c, int bins) {
  if (!(c >= 0.0 && c <= 1.0)) {
    throw VocabError("coordinate outside [0,1]");
  }
  // std::round rounds half away from zero.
  return static_cast<int>(std::round(c * (bins - 1)));
}

std::array<TokenId, 4> QuantizeBox(const BoundingBox& box,
                                   const UnifiedVocab& vocab) {
  box.Validate();
  const int bins = vocab.location_bins();
  return {vocab.location_token(QuantizeCoordinate(box.x1, bins)),
          vocab.location_token(QuantizeCoordinate(box.y1, bins)),
          vocab.location_token(QuantizeCoordinate(box.x2, bins)),
          vocab.location_token(QuantizeCoordinate(box.y2, bins))};
}

BoundingBox DequantizeBox(std::span<const TokenId> ids,
                          const UnifiedVocab& vocab) {
  if (ids.size() != 4) throw VocabError("a box needs exactly 4 location ids");
  std::array<double, 4> coords{};
  const int bins = vocab.location_bins();
  for (std::size_t i = 0; i < 4; ++i) {
    if (!vocab.is_location(ids[i])) {
      throw VocabError("non-location token " + std::to_string(ids[i]));
    }
    const int bin = ids[i] - vocab.location_offset();
    coords[i] = bins > 1 ? static_cast<double>(bin) / (bins - 1) : 0.0;
  }
  return {coords[0], coords[1], coords[2], coords[3]};
}

}  // namespace uniseq
