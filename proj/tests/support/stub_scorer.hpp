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

#ifndef UNISEQ_TESTS_STUB_SCORER_HPP_
#define UNISEQ_TESTS_STUB_SCORER_HPP_

#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <span>
#include <vector>

#include "uniseq/search.hpp"

namespace uniseq::testing {

/// Deterministic pseudo-model: logits are seeded normals keyed on a hash of
/// the whole prefix, so the same prefix always scores the same way.
class StubScorer final : public NextTokenScorer {
 public:
  StubScorer(int vocab, std::uint64_t seed, double spread = 2.0)
      : vocab_(vocab), seed_(seed), spread_(spread) {}

  int vocab_size() const override { return vocab_; }

  std::vector<double> NextLogits(std::span<const TokenId> prefix) const override {
    std::uint64_t h = seed_ ^ 0x9e3779b97f4a7c15ULL;
    for (TokenId id : prefix) {
      h ^= static_cast<std::uint64_t>(id) + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
    }
    std::mt19937_64 rng(h);
    std::normal_distribution<double> normal(0.0, spread_);
    std::vector<double> logits(static_cast<std::size_t>(vocab_));
    for (double& x : logits) x = normal(rng);
    return logits;
  }

 private:
  int vocab_;
  std::uint64_t seed_;
  double spread_;
};

/// Log-probability of `tokens` followed by eos, each step normalized over
/// the legal continuations in `trie` (or the full vocabulary when null).
/// Written independently of the search code as a reference.
inline double ReferenceSequenceLogProb(const NextTokenScorer& scorer,
                                       const std::vector<TokenId>& tokens,
                                       const LabelTrie* trie) {
  std::vector<TokenId> prefix{kBosId};
  std::vector<TokenId> full = tokens;
  full.push_back(kEosId);
  double total = 0.0;
  for (std::size_t step = 0; step < full.size(); ++step) {
    const std::vector<double> logits = scorer.NextLogits(prefix);
    std::vector<TokenId> legal;
    if (trie) {
      legal = trie->Allowed(std::span<const TokenId>(prefix).subspan(1));
    } else {
      for (int v = 0; v < scorer.vocab_size(); ++v) legal.push_back(v);
    }
    double peak = -std::numeric_limits<double>::infinity();
    for (TokenId v : legal) peak = std::max(peak, logits[v]);
    double z = 0.0;
    for (TokenId v : legal) z += std::exp(logits[v] - peak);
    total += logits[full[step]] - peak - std::log(z);
    prefix.push_back(full[step]);
  }
  return total;
}

}  // namespace uniseq::testing

#endif  // UNISEQ_TESTS_STUB_SCORER_HPP_
