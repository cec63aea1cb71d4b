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

#include <cmath>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "../support/stub_scorer.hpp"
#include "uniseq/search.hpp"

namespace uniseq {
namespace {

using testing::ReferenceSequenceLogProb;
using testing::StubScorer;

/// Logits looked up per prefix; unknown prefixes score uniformly.
class TableScorer final : public NextTokenScorer {
 public:
  TableScorer(int vocab, std::map<std::vector<TokenId>, std::vector<double>> table)
      : vocab_(vocab), table_(std::move(table)) {}
  int vocab_size() const override { return vocab_; }
  std::vector<double> NextLogits(std::span<const TokenId> prefix) const override {
    const auto it = table_.find({prefix.begin(), prefix.end()});
    return it == table_.end() ? std::vector<double>(vocab_, 0.0) : it->second;
  }

 private:
  int vocab_;
  std::map<std::vector<TokenId>, std::vector<double>> table_;
};

// Every eos-terminated sequence up to max_len, scored with full-vocabulary
// normalization; the smaller sequence wins ties.
std::vector<TokenId> ExhaustiveBest(const NextTokenScorer& scorer, int max_len,
                                    double penalty) {
  std::vector<TokenId> best;
  double best_score = -INFINITY;
  std::function<void(std::vector<TokenId>&)> walk = [&](std::vector<TokenId>& body) {
    const double score = ReferenceSequenceLogProb(scorer, body, nullptr) /
                         std::pow(static_cast<double>(body.size() + 1), penalty);
    std::vector<TokenId> full = body;
    full.push_back(kEosId);
    if (score > best_score || (score == best_score && full < best)) {
      best_score = score;
      best = full;
    }
    if (static_cast<int>(body.size()) + 1 >= max_len) return;
    for (TokenId t = 0; t < scorer.vocab_size(); ++t) {
      if (t == kEosId) continue;
      body.push_back(t);
      walk(body);
      body.pop_back();
    }
  };
  std::vector<TokenId> empty;
  walk(empty);
  return best;
}

TEST_CASE("trie structure") {
  const std::vector<std::string> corpus{"yes", "no"};
  const UnifiedVocab v(kFirstMergeId + 3, 10, 10, TrainBpe(corpus, kFirstMergeId + 3));
  REQUIRE(EncodeText(v, "yes").size() == 1);
  REQUIRE(EncodeText(v, "no").size() == 1);
  const std::vector<std::string> labels{"yes", "no"};
  const LabelTrie yn = LabelTrie::FromLabels(labels, v);
  CHECK(yn.root().children.size() == 2);
  CHECK(yn.Contains(EncodeText(v, "yes")));

  const std::vector<std::vector<TokenId>> ab{{7, 8}, {7, 9}};
  const LabelTrie t = LabelTrie::FromSequences(ab);
  REQUIRE(t.root().children.size() == 1);
  CHECK(t.node(t.root().children.at(7)).children.size() == 2);
  CHECK(t.Allowed(std::vector<TokenId>{7}) == std::vector<TokenId>{8, 9});
  CHECK(t.Allowed(std::vector<TokenId>{7, 9}) == std::vector<TokenId>{kEosId});
  CHECK(t.Allowed(std::vector<TokenId>{8}).empty());

  LabelTrie twice = LabelTrie::FromSequences(ab);
  twice.Insert(ab[0]);
  CHECK(twice.node_count() == t.node_count());
  CHECK(twice.label_count() == t.label_count());

  const std::vector<std::string> blank{"ok", ""};
  CHECK_THROWS_AS(LabelTrie::FromLabels(blank, v), std::invalid_argument);
}

TEST_CASE("beam search equals exhaustive search on a tiny vocabulary") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const StubScorer scorer(3, seed);
    for (double penalty : {1.0, 0.0}) {
      DecodeConfig config{9, 2, penalty};
      const DecodeResult r = BeamSearch(scorer, config);
      CHECK(r.tokens == ExhaustiveBest(scorer, 2, penalty));
      CHECK_FALSE(r.truncated);
    }
  }
}

TEST_CASE("beam of one is greedy") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const StubScorer scorer(12, seed);
    std::vector<TokenId> prefix{kBosId};
    for (int step = 0; step < 6; ++step) {
      const auto logits = scorer.NextLogits(prefix);
      const auto best = std::max_element(logits.begin(), logits.end()) - logits.begin();
      prefix.push_back(static_cast<TokenId>(best));
      if (best == kEosId) break;
    }
    const DecodeResult r = BeamSearch(scorer, DecodeConfig{1, 6, 1.0});
    CHECK(r.tokens == std::vector<TokenId>(prefix.begin() + 1, prefix.end()));
  }
}

TEST_CASE("unfinished search reports truncation") {
  std::vector<double> no_eos(5, 0.0);
  no_eos[kEosId] = -1e9;
  std::map<std::vector<TokenId>, std::vector<double>> table;
  std::function<void(std::vector<TokenId>, int)> fill = [&](std::vector<TokenId> p, int d) {
    table[p] = no_eos;
    if (d == 0) return;
    for (TokenId t = 0; t < 5; ++t) {
      auto q = p;
      q.push_back(t);
      fill(q, d - 1);
    }
  };
  fill({kBosId}, 3);
  const TableScorer scorer(5, table);
  const DecodeResult r = BeamSearch(scorer, DecodeConfig{2, 3, 1.0});
  CHECK(r.truncated);
  CHECK(r.tokens.size() == 3);
}

TEST_CASE("trie decoding") {
  SUBCASE("a single label is forced") {
    const std::vector<std::vector<TokenId>> one{{6}};
    const LabelTrie trie = LabelTrie::FromSequences(one);
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      const DecodeResult r = TrieBeamSearch(StubScorer(10, seed), trie, DecodeConfig{});
      CHECK(r.tokens == std::vector<TokenId>{6, kEosId});
    }
  }
  SUBCASE("the better label wins even when greedy leaves the trie") {
    // Token 9 dominates unconstrained; the trie allows [4 5] and [6].
    std::vector<double> root(10, 0.0);
    root[9] = 10.0;
    root[4] = 1.0;
    root[6] = 0.5;
    std::vector<double> after4(10, 0.0);
    after4[5] = -3.0;
    std::vector<double> ends(10, 0.0);
    const TableScorer scorer(10, {{{kBosId}, root},
                                  {{kBosId, 4}, after4},
                                  {{kBosId, 4, 5}, ends},
                                  {{kBosId, 6}, ends}});
    CHECK(BeamSearch(scorer, DecodeConfig{1, 1, 1.0}).tokens.front() == 9);
    const std::vector<std::vector<TokenId>> labels{{4, 5}, {6}};
    const LabelTrie trie = LabelTrie::FromSequences(labels);
    const double s45 = ReferenceSequenceLogProb(scorer, labels[0], &trie) / 3.0;
    const double s6 = ReferenceSequenceLogProb(scorer, labels[1], &trie) / 2.0;
    const std::vector<TokenId> want = s45 > s6 ? std::vector<TokenId>{4, 5, kEosId}
                                               : std::vector<TokenId>{6, kEosId};
    CHECK(TrieBeamSearch(scorer, trie, DecodeConfig{2, 5, 1.0}).tokens == want);
  }
}

TEST_CASE("all-candidate search") {
  const StubScorer scorer(10, 3);
  const std::vector<std::vector<TokenId>> one{{5, 6}};
  const CandidateResult single = AllCandidateSearch(scorer, one);
  CHECK(single.best == 0);
  const LabelTrie trie = LabelTrie::FromSequences(one);
  CHECK(single.scores[0] ==
        doctest::Approx(ReferenceSequenceLogProb(scorer, one[0], &trie) / 3.0));

  // Hand-set: after bos, token 4 has probability e^2 / (e^2 + 1) under the
  // trie, token 7 the rest; both end immediately.
  std::vector<double> root(10, 0.0);
  root[4] = 2.0;
  const TableScorer table(10, {{{kBosId}, root}});
  const std::vector<std::vector<TokenId>> two{{7}, {4}};
  const CandidateResult r = AllCandidateSearch(table, two);
  CHECK(r.best == 1);
  const std::vector<std::vector<TokenId>> none;
  CHECK_THROWS_AS(AllCandidateSearch(table, none), std::invalid_argument);
  const UnifiedVocab v(kFirstMergeId, 10, 10);
  const std::vector<std::string> blank{""};
  CHECK_THROWS_AS(AllCandidateSearch(table, blank, v), std::invalid_argument);
}

TEST_CASE("masked log-softmax") {
  const std::vector<double> logits{1.0, 2.0, 3.0};
  const std::vector<TokenId> allowed{0, 2};
  const auto lp = MaskedLogSoftmax(logits, &allowed);
  CHECK(std::isinf(lp[1]));
  CHECK(std::exp(lp[0]) + std::exp(lp[2]) == doctest::Approx(1.0));
  CHECK_THROWS_AS(DecodeConfig({0, 5, 1.0}).Validate(), std::invalid_argument);
}

}  // namespace
}  // namespace uniseq
