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

#ifndef UNISEQ_SEARCH_HPP_
#define UNISEQ_SEARCH_HPP_

#include <map>
#include <span>
#include <string>
#include <vector>

#include "uniseq/model.hpp"
#include "uniseq/vocab.hpp"

namespace uniseq {

/// Anything that maps a decoder prefix (starting with bos) to next-token
/// logits over a fixed vocabulary.
class NextTokenScorer {
 public:
  virtual ~NextTokenScorer() = default;
  virtual int vocab_size() const = 0;
  virtual std::vector<double> NextLogits(std::span<const TokenId> prefix) const = 0;
};

/// Evaluation-mode forward options: branches scaled by the model's
/// stochastic-depth rate, no dropout.
inline ForwardOptions EvalOptions(const ModelConfig& config) {
  return ForwardOptions{false, 0.0, config.stochastic_depth, nullptr};
}

/// Decodes with a trained model against one encoded source.
template <typename Scalar>
class ModelScorer final : public NextTokenScorer {
 public:
  ModelScorer(const ModelParams<Scalar>& params, const SourceInput<Scalar>& source)
      : params_(params),
        memory_(EncoderForward(params, source, EvalOptions(params.config))) {}

  int vocab_size() const override { return params_.config.vocab_total; }
  std::vector<double> NextLogits(std::span<const TokenId> prefix) const override {
    const ColumnVector<Scalar> logits =
        DecoderNextLogits(params_, memory_, prefix, EvalOptions(params_.config));
    return {logits.data(), logits.data() + logits.size()};
  }

 private:
  const ModelParams<Scalar>& params_;
  Matrix<Scalar> memory_;
};

struct DecodeConfig {
  int beam_size = 3;
  int max_length = 30;  // generated tokens, eos included
  double length_penalty = 1.0;

  void Validate() const;
};

struct DecodeResult {
  std::vector<TokenId> tokens;  // without bos; ends with eos unless truncated
  double log_prob = 0.0;
  double score = 0.0;  // log_prob / length^penalty
  bool truncated = false;
};

/// Prefix tree over closed-set label token sequences.
class LabelTrie {
 public:
  struct Node {
    std::map<TokenId, int> children;
    bool terminal = false;
  };

  LabelTrie();
  /// Tokenizes every label; duplicates collapse.
  static LabelTrie FromLabels(std::span<const std::string> labels,
                              const UnifiedVocab& vocab);
  /// Raw token sequences (without eos).
  static LabelTrie FromSequences(std::span<const std::vector<TokenId>> sequences);

  void Insert(std::span<const TokenId> sequence);
  const Node& root() const { return nodes_.front(); }
  const Node& node(int index) const { return nodes_.at(index); }
  std::size_t node_count() const { return nodes_.size(); }
  std::size_t label_count() const { return labels_; }

  /// Tokens allowed after `sequence` (children, plus eos at a terminal).
  /// Empty when `sequence` leaves the trie.
  std::vector<TokenId> Allowed(std::span<const TokenId> sequence) const;
  /// True when `sequence` (optionally ending with eos) spells a label.
  bool Contains(std::span<const TokenId> sequence) const;

 private:
  int Walk(std::span<const TokenId> sequence) const;

  std::vector<Node> nodes_;
  std::size_t labels_ = 0;
};

/// Length-normalized beam search; ties break toward lower token ids.
DecodeResult BeamSearch(const NextTokenScorer& scorer, const DecodeConfig& config);

/// Beam search with every token outside the trie masked to -inf before the
/// log-softmax, so probabilities renormalize over legal continuations.
DecodeResult TrieBeamSearch(const NextTokenScorer& scorer, const LabelTrie& trie,
                            const DecodeConfig& config);

enum class CandidateNormalization {
  kTrie,       // log-softmax over legal continuations, as in TrieBeamSearch
  kFullVocab,  // plain log-softmax over the whole vocabulary
};

struct CandidateResult {
  std::size_t best = 0;
  std::vector<double> scores;  // per candidate, length-normalized
};

/// Force-decodes every candidate (token sequences without eos) and returns
/// the argmax; ties go to the lexicographically smaller sequence.
CandidateResult AllCandidateSearch(
    const NextTokenScorer& scorer, std::span<const std::vector<TokenId>> candidates,
    double length_penalty = 1.0,
    CandidateNormalization normalization = CandidateNormalization::kTrie);

/// Text-level wrapper: ties go to the lexicographically smaller string.
CandidateResult AllCandidateSearch(const NextTokenScorer& scorer,
                                   std::span<const std::string> candidates,
                                   const UnifiedVocab& vocab,
                                   double length_penalty = 1.0,
                                   CandidateNormalization normalization =
                                       CandidateNormalization::kTrie);

/// log-softmax restricted to `allowed` (all ids when null); others -inf.
std::vector<double> MaskedLogSoftmax(std::span<const double> logits,
                                     const std::vector<TokenId>* allowed);

}  // namespace uniseq

#endif  // UNISEQ_SEARCH_HPP_
