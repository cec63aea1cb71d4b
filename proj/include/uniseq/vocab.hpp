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

#ifndef UNISEQ_VOCAB_HPP_
#define UNISEQ_VOCAB_HPP_

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace uniseq {

using TokenId = std::int32_t;

/// Error raised by tokenization routines (bad ranges, malformed files).
class VocabError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Special ids occupy the first slots of the text range.
inline constexpr TokenId kPadId = 0;
inline constexpr TokenId kBosId = 1;
inline constexpr TokenId kEosId = 2;
inline constexpr TokenId kMaskId = 3;
inline constexpr int kSpecialCount = 4;
inline constexpr int kByteAlphabet = 256;
/// First id produced by a BPE merge.
inline constexpr int kFirstMergeId = kSpecialCount + kByteAlphabet;

using MergePair = std::pair<TokenId, TokenId>;

/// Partitioned id space shared by text, location and visual tokens.
///
/// Layout: text ids in [0, text_size), location ids in
/// [text_size, text_size + location_bins), visual ids after that.
/// Text ids are the four specials, the 256 byte tokens, then one id per
/// merge; ids past the last merge are reserved and never emitted.
class UnifiedVocab {
 public:
  UnifiedVocab(int text_size, int location_bins, int visual_size,
               std::vector<MergePair> merges = {});

  /// 50265 text + 1000 location + 8192 visual ids.
  static UnifiedVocab StandardPreset();

  int text_size() const { return text_size_; }
  int location_bins() const { return location_bins_; }
  int visual_size() const { return visual_size_; }
  int total() const { return text_size_ + location_bins_ + visual_size_; }
  const std::vector<MergePair>& merges() const { return merges_; }

  TokenId location_offset() const { return text_size_; }
  TokenId visual_offset() const { return text_size_ + location_bins_; }

  bool is_text(TokenId id) const { return id >= 0 && id < text_size_; }
  bool is_location(TokenId id) const {
    return id >= location_offset() && id < visual_offset();
  }
  bool is_visual(TokenId id) const {
    return id >= visual_offset() && id < total();
  }

  TokenId location_token(int bin) const;
  TokenId visual_token(int code) const;

  /// Byte sequence spelled by a text id; specials spell nothing.
  const std::string& spelling(TokenId id) const;
  /// Rank of the merge producing (left, right), or -1.
  int merge_rank(TokenId left, TokenId right) const;

  void Save(const std::filesystem::path& path) const;
  static UnifiedVocab Load(const std::filesystem::path& path);

 private:
  int text_size_;
  int location_bins_;
  int visual_size_;
  std::vector<MergePair> merges_;
  std::vector<std::string> spellings_;
  std::map<MergePair, int> ranks_;
};

/// Learns byte-level BPE merges until the text range reaches
/// `target_text_size` ids or no adjacent pair remains. Pair ties go to the
/// numerically smallest (left, right).
std::vector<MergePair> TrainBpe(std::span<const std::string> corpus,
                                int target_text_size);

std::vector<TokenId> EncodeText(const UnifiedVocab& vocab,
                                std::string_view text);
std::string DecodeText(const UnifiedVocab& vocab,
                       std::span<const TokenId> ids);

/// Normalized box corners; 0 <= x1 <= x2 <= 1 and likewise for y.
struct BoundingBox {
  double x1 = 0;
  double y1 = 0;
  double x2 = 0;
  double y2 = 0;

  void Validate() const;
  friend bool operator==(const BoundingBox&, const BoundingBox&) = default;
};

/// Coordinate bin with half-away-from-zero rounding of c * (bins - 1).
int QuantizeCoordinate(double c, int bins);
std::array<TokenId, 4> QuantizeBox(const BoundingBox& box,
                                   const UnifiedVocab& vocab);
BoundingBox DequantizeBox(std::span<const TokenId> ids,
                          const UnifiedVocab& vocab);

}  // namespace uniseq

#endif  // UNISEQ_VOCAB_HPP_
