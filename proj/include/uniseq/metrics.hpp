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

#ifndef UNISEQ_METRICS_HPP_
#define UNISEQ_METRICS_HPP_

#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace uniseq {

class MetricError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Lowercase, trimmed, internal whitespace collapsed to single spaces.
std::string NormalizeAnswer(std::string_view text);

/// Lowercase, punctuation split into separate tokens, split on whitespace.
std::vector<std::string> MetricTokens(std::string_view text);

double ExactMatchAccuracy(std::span<const std::string> predictions,
                          std::span<const std::string> references);

struct ClassF1 {
  std::string label;
  long support = 0;  // occurrences among the truths
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

/// One-vs-rest scores for every class in truths and predictions (after
/// NormalizeAnswer), sorted by label.
std::vector<ClassF1> PerClassF1(std::span<const std::string> truths,
                                std::span<const std::string> predictions);
double F1Weighted(std::span<const std::string> truths,
                  std::span<const std::string> predictions);
double F1Macro(std::span<const std::string> truths,
               std::span<const std::string> predictions);

struct RougeL {
  double score = 0.0;
  long lcs = 0;
  double recall = 0.0;     // LCS / candidate length
  double precision = 0.0;  // LCS / reference length
  bool empty_input = false;
};

long LongestCommonSubsequence(std::span<const std::string> a,
                              std::span<const std::string> b);
RougeL RougeLScore(std::span<const std::string> candidate,
                   std::span<const std::string> reference);
double RougeLText(std::string_view candidate, std::string_view reference);

struct MeteorParams {
  double alpha = 0.9;
  double gamma = 0.5;
  double theta = 3.0;
};

struct Meteor {
  double score = 0.0;
  long matches = 0;
  long chunks = 0;
  double precision = 0.0;
  double recall = 0.0;
  double penalty = 0.0;
};

/// Exact unigram alignment with the most matches, then the fewest chunks.
Meteor MeteorScore(std::span<const std::string> candidate,
                   std::span<const std::string> reference,
                   const MeteorParams& params = {});
double MeteorText(std::string_view candidate, std::string_view reference,
                  const MeteorParams& params = {});

struct Cider {
  double score = 0.0;            // 10 * mean over n and candidates
  std::vector<double> per_n;     // mean cosine similarity for n = 1..n_max
  std::vector<double> per_item;  // 10 * mean over n, per candidate
};

/// TF-IDF n-gram cosine similarity against each candidate's references.
/// IDF is smoothed, log((1 + N) / (1 + df)) + 1, over the N reference sets.
Cider CiderScore(std::span<const std::string> candidates,
                 std::span<const std::vector<std::string>> references,
                 int n_max = 4);

/// Metric name -> value with stable key names.
struct EvalReport {
  std::map<std::string, double> values;

  nlohmann::json ToJson() const;
};

/// accuracy + F1s for classification/vqa/nli; ROUGE-L, METEOR and CIDEr for
/// caption; ROUGE-L for summarization.
EvalReport EvaluateTask(std::string_view task,
                        std::span<const std::string> predictions,
                        std::span<const std::string> references);

}  // namespace uniseq

#endif  // UNISEQ_METRICS_HPP_
