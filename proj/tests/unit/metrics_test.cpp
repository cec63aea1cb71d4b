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

#include <string>
#include <vector>

#include "../oracle_values.hpp"
#include "uniseq/metrics.hpp"

namespace uniseq {
namespace {

using Strings = std::vector<std::string>;

TEST_CASE("normalizers") {
  CHECK(NormalizeAnswer("  Yes \t  Sir ") == "yes sir");
  CHECK(MetricTokens("The cat, sat.") == Strings{"the", "cat", ",", "sat", "."});
}

TEST_CASE("exact match") {
  const Strings a{"x", "y"};
  CHECK(ExactMatchAccuracy(a, a) == 1.0);
  CHECK(ExactMatchAccuracy(a, Strings{"p", "q"}) == 0.0);
  CHECK(ExactMatchAccuracy(Strings{"Yes", "no"}, Strings{"yes ", "maybe"}) == 0.5);
  CHECK_THROWS_AS(ExactMatchAccuracy(a, Strings{"x"}), MetricError);
}

TEST_CASE("f1 scores") {
  const Strings truths{"A", "A", "A", "B"}, preds{"A", "A", "B", "B"};
  CHECK(F1Weighted(truths, preds) == doctest::Approx(oracle::kWeightedF1).epsilon(1e-12));
  CHECK(F1Macro(truths, preds) == doctest::Approx(oracle::kMacroF1).epsilon(1e-12));
  const auto per = PerClassF1(truths, preds);
  REQUIRE(per.size() == 2);
  CHECK(per[0].f1 == doctest::Approx(0.8));
  CHECK(per[1].f1 == doctest::Approx(2.0 / 3.0));
  CHECK(F1Weighted(truths, truths) == 1.0);
  CHECK(F1Macro(truths, truths) == 1.0);
  CHECK(F1Macro(Strings{"a", "a"}, Strings{"a", "a"}) == 1.0);
  CHECK_THROWS_AS(F1Macro(Strings{}, Strings{}), MetricError);
}

TEST_CASE("rouge-l") {
  CHECK(RougeLText("the cat sat", "the cat") ==
        doctest::Approx(oracle::kRougeCatSat).epsilon(1e-15));
  CHECK(RougeLText("the cat", "the cat sat") ==
        doctest::Approx(oracle::kRougeCatSat).epsilon(1e-15));
  CHECK(RougeLText("a b c", "a b c") == 1.0);
  CHECK(RougeLText("a b", "c d") == 0.0);
  const Strings empty, one{"x"};
  const RougeL r = RougeLScore(empty, one);
  CHECK(r.score == 0.0);
  CHECK(r.empty_input);
  CHECK(LongestCommonSubsequence(Strings{"a", "b", "c", "d"}, Strings{"b", "x", "d"}) == 2);
}

TEST_CASE("meteor") {
  const Meteor same = MeteorScore(Strings{"a", "b", "c", "d"}, Strings{"a", "b", "c", "d"});
  CHECK(same.matches == 4);
  CHECK(same.chunks == 1);
  CHECK(same.penalty == doctest::Approx(0.0078125));
  CHECK(same.score == doctest::Approx(oracle::kMeteorIdentity).epsilon(1e-15));
  CHECK(MeteorText("a b", "a c") == doctest::Approx(oracle::kMeteorHalf).epsilon(1e-15));
  CHECK(MeteorText("x y", "a b") == 0.0);
  // Two alignments match all words; the one with fewer chunks must win.
  const Meteor m = MeteorScore(Strings{"a", "b", "a"}, Strings{"b", "a", "a"});
  CHECK(m.matches == 3);
  CHECK(m.chunks == 2);
}

TEST_CASE("cider") {
  const Strings cand{"a red circle on the left"};
  const std::vector<Strings> refs{{"a red circle on the left"}};
  const Cider c = CiderScore(cand, refs);
  REQUIRE(c.per_n.size() == 4);
  for (double s : c.per_n) CHECK(s == doctest::Approx(1.0));
  CHECK(c.score == doctest::Approx(10.0));
  const Cider none = CiderScore(Strings{"blue square"}, std::vector<Strings>{{"red circle"}});
  CHECK(none.score == 0.0);
  CHECK_THROWS_AS(CiderScore(Strings{}, std::vector<Strings>{}), MetricError);
}

TEST_CASE("task routing") {
  const Strings labels{"circle", "square"};
  const EvalReport cls = EvaluateTask("classification", labels, labels);
  CHECK(cls.values.at("accuracy") == 1.0);
  CHECK(cls.values.count("f1_weighted") == 1);
  CHECK(cls.values.count("f1_macro") == 1);
  const EvalReport cap = EvaluateTask("caption", labels, labels);
  CHECK(cap.values.count("rouge_l") == 1);
  CHECK(cap.values.count("meteor") == 1);
  CHECK(cap.values.count("cider") == 1);
  CHECK(EvaluateTask("summarization", labels, labels).values.size() == 1);
  CHECK_THROWS_AS(EvaluateTask("detection", labels, labels), MetricError);
  CHECK_THROWS_AS(EvaluateTask("caption", Strings{}, Strings{}), MetricError);
  CHECK(cls.ToJson()["accuracy"] == 1.0);
}

}  // namespace
}  // namespace uniseq
