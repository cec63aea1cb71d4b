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

#include "uniseq/search.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace uniseq {
namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

struct Hypothesis {
  std::vector<TokenId> tokens;
  double log_prob = 0.0;
};

// Higher sum first; equal sums fall back to the smaller token sequence.
bool Better(const Hypothesis& a, const Hypothesis& b) {
  if (a.log_prob != b.log_prob) return a.log_prob > b.log_prob;
  return a.tokens < b.tokens;
}

double Normalized(double log_prob, std::size_t length, double penalty) {
  return log_prob / std::pow(static_cast<double>(length), penalty);
}

std::vector<TokenId> WithBos(const std::vector<TokenId>& tokens) {
  std::vector<TokenId> prefix{kBosId};
  prefix.insert(prefix.end(), tokens.begin(), tokens.end());
  return prefix;
}

DecodeResult Finish(const Hypothesis& h, double penalty, bool truncated) {
  DecodeResult r;
  r.tokens = h.tokens;
  r.log_prob = h.log_prob;
  r.score = Normalized(h.log_prob, std::max<std::size_t>(h.tokens.size(), 1), penalty);
  r.truncated = truncated;
  return r;
}

DecodeResult Search(const NextTokenScorer& scorer, const LabelTrie* trie,
                    const DecodeConfig& config) {
  config.Validate();
  const auto beam = static_cast<std::size_t>(config.beam_size);
  std::vector<Hypothesis> live{Hypothesis{}};
  std::vector<Hypothesis> finished;

  for (int step = 0; step < config.max_length && !live.empty() &&
                     finished.size() < beam;
       ++step) {
    std::vector<Hypothesis> candidates;
    for (const Hypothesis& h : live) {
      const std::vector<double> logits = scorer.NextLogits(WithBos(h.tokens));
      if (static_cast<int>(logits.size()) != scorer.vocab_size()) {
        throw std::logic_error("scorer returned a logit vector of the wrong size");
      }
      std::vector<TokenId> allowed;
      if (trie) {
        allowed = trie->Allowed(h.tokens);
        if (allowed.empty()) throw std::logic_error("constrained beam left the trie");
      }
      const std::vector<double> lp = MaskedLogSoftmax(logits, trie ? &allowed : nullptr);
      // Only the best `beam` continuations of one hypothesis can survive.
      std::vector<TokenId> ids(lp.size());
      std::iota(ids.begin(), ids.end(), 0);
      const std::size_t keep = std::min(beam, ids.size());
      std::partial_sort(ids.begin(), ids.begin() + static_cast<long>(keep), ids.end(),
                        [&lp](TokenId a, TokenId b) {
                          return lp[a] != lp[b] ? lp[a] > lp[b] : a < b;
                        });
      for (std::size_t k = 0; k < keep; ++k) {
        const double value = lp[ids[k]];
        if (value == kNegInf) break;
        Hypothesis next = h;
        next.tokens.push_back(ids[k]);
        next.log_prob += value;
        candidates.push_back(std::move(next));
      }
    }
    std::sort(candidates.begin(), candidates.end(), Better);
    if (candidates.size() > beam) candidates.resize(beam);
    live.clear();
    for (auto& c : candidates) {
      if (c.tokens.back() == kEosId) {
        finished.push_back(std::move(c));
      } else {
        live.push_back(std::move(c));
      }
    }
  }

  auto by_score = [&config](const Hypothesis& a, const Hypothesis& b) {
    const double sa = Normalized(a.log_prob, a.tokens.size(), config.length_penalty);
    const double sb = Normalized(b.log_prob, b.tokens.size(), config.length_penalty);
    if (sa != sb) return sa > sb;
    return a.tokens < b.tokens;
  };
  if (!finished.empty()) {
    return Finish(*std::min_element(finished.begin(), finished.end(), by_score),
                  config.length_penalty, false);
  }
  if (live.empty()) throw std::logic_error("beam search produced no hypothesis");
  return Finish(*std::min_element(live.begin(), live.end(), by_score),
                config.length_penalty, true);
}

}  // namespace

void DecodeConfig::Validate() const {
  if (beam_size < 1) throw std::invalid_argument("beam size must be at least 1");
  if (max_length < 1) throw std::invalid_argument("max length must be at least 1");
  if (!std::isfinite(length_penalty)) {
    throw std::invalid_argument("length penalty must be finite");
  }
}

std::vector<double> MaskedLogSoftmax(std::span<const double> logits,
                                     const std::vector<TokenId>* allowed) {
  std::vector<double> out(logits.size(), kNegInf);
  double peak = kNegInf;
  auto visit = [&](auto&& fn) {
    if (allowed) {
      for (TokenId id : *allowed) fn(static_cast<std::size_t>(id));
    } else {
      for (std::size_t i = 0; i < logits.size(); ++i) fn(i);
    }
  };
  visit([&](std::size_t i) {
    if (i >= logits.size()) throw std::out_of_range("allowed token outside vocabulary");
    peak = std::max(peak, logits[i]);
  });
  if (peak == kNegInf) return out;
  double sum = 0.0;
  visit([&](std::size_t i) { sum += std::exp(logits[i] - peak); });
  const double lse = peak + std::log(sum);
  visit([&](std::size_t i) { out[i] = logits[i] - lse; });
  return out;
}

LabelTrie::LabelTrie() : nodes_(1) {}

LabelTrie LabelTrie::FromLabels(std::span<const std::string> labels,
                                const UnifiedVocab& vocab) {
  if (labels.empty()) throw std::invalid_argument("label set is empty");
  LabelTrie trie;
  for (const auto& label : labels) {
    if (label.empty()) throw std::invalid_argument("empty label string");
    trie.Insert(EncodeText(vocab, label));
  }
  return trie;
}

LabelTrie LabelTrie::FromSequences(std::span<const std::vector<TokenId>> sequences) {
  if (sequences.empty()) throw std::invalid_argument("label set is empty");
  LabelTrie trie;
  for (const auto& s : sequences) trie.Insert(s);
  return trie;
}

void LabelTrie::Insert(std::span<const TokenId> sequence) {
  if (sequence.empty()) throw std::invalid_argument("empty label sequence");
  int at = 0;
  for (TokenId id : sequence) {
    if (id == kEosId) throw std::invalid_argument("label sequence contains eos");
    const auto it = nodes_[at].children.find(id);
    if (it != nodes_[at].children.end()) {
      at = it->second;
      continue;
    }
    const int next = static_cast<int>(nodes_.size());
    nodes_[at].children.emplace(id, next);
    nodes_.emplace_back();
    at = next;
  }
  if (!nodes_[at].terminal) ++labels_;
  nodes_[at].terminal = true;
}

int LabelTrie::Walk(std::span<const TokenId> sequence) const {
  int at = 0;
  for (TokenId id : sequence) {
    const auto it = nodes_[at].children.find(id);
    if (it == nodes_[at].children.end()) return -1;
    at = it->second;
  }
  return at;
}

std::vector<TokenId> LabelTrie::Allowed(std::span<const TokenId> sequence) const {
  const int at = Walk(sequence);
  if (at < 0) return {};
  std::vector<TokenId> out;
  if (nodes_[at].terminal) out.push_back(kEosId);
  for (const auto& [id, child] : nodes_[at].children) out.push_back(id);
  std::sort(out.begin(), out.end());
  return out;
}

bool LabelTrie::Contains(std::span<const TokenId> sequence) const {
  if (!sequence.empty() && sequence.back() == kEosId) {
    sequence = sequence.first(sequence.size() - 1);
  }
  const int at = Walk(sequence);
  return at >= 0 && nodes_[at].terminal;
}

DecodeResult BeamSearch(const NextTokenScorer& scorer, const DecodeConfig& config) {
  return Search(scorer, nullptr, config);
}

DecodeResult TrieBeamSearch(const NextTokenScorer& scorer, const LabelTrie& trie,
                            const DecodeConfig& config) {
  if (trie.label_count() == 0) throw std::invalid_argument("label trie is empty");
  return Search(scorer, &trie, config);
}

CandidateResult AllCandidateSearch(const NextTokenScorer& scorer,
                                   std::span<const std::vector<TokenId>> candidates,
                                   double length_penalty,
                                   CandidateNormalization normalization) {
  if (candidates.empty()) throw std::invalid_argument("candidate set is empty");
  const LabelTrie trie = LabelTrie::FromSequences(candidates);
  std::map<std::vector<TokenId>, std::vector<double>> cache;
  CandidateResult result;
  for (const auto& candidate : candidates) {
    std::vector<TokenId> full = candidate;
    full.push_back(kEosId);
    std::vector<TokenId> prefix;
    double sum = 0.0;
    for (TokenId id : full) {
      auto it = cache.find(prefix);
      if (it == cache.end()) {
        const std::vector<double> logits = scorer.NextLogits(WithBos(prefix));
        std::vector<TokenId> allowed;
        if (normalization == CandidateNormalization::kTrie) {
          allowed = trie.Allowed(prefix);
        }
        it = cache
                 .emplace(prefix,
                          MaskedLogSoftmax(logits,
                                           normalization == CandidateNormalization::kTrie
                                               ? &allowed
                                               : nullptr))
                 .first;
      }
      sum += it->second.at(static_cast<std::size_t>(id));
      prefix.push_back(id);
    }
    result.scores.push_back(Normalized(sum, full.size(), length_penalty));
  }
  for (std::size_t i = 1; i < candidates.size(); ++i) {
    const double a = result.scores[i], b = result.scores[result.best];
    if (a > b || (a == b && candidates[i] < candidates[result.best])) result.best = i;
  }
  return result;
}

CandidateResult AllCandidateSearch(const NextTokenScorer& scorer,
                                   std::span<const std::string> candidates,
                                   const UnifiedVocab& vocab, double length_penalty,
                                   CandidateNormalization normalization) {
  std::vector<std::vector<TokenId>> sequences;
  for (const auto& text : candidates) {
    if (text.empty()) throw std::invalid_argument("empty candidate string");
    sequences.push_back(EncodeText(vocab, text));
  }
  CandidateResult result =
      AllCandidateSearch(scorer, sequences, length_penalty, normalization);
  result.best = 0;
  for (std::size_t i = 1; i < candidates.size(); ++i) {
    const double a = result.scores[i], b = result.scores[result.best];
    if (a > b || (a == b && candidates[i] < candidates[result.best])) result.best = i;
  }
  return result;
}

}  // namespace uniseq
