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

#include "uniseq/metrics.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <set>

namespace uniseq {
namespace {

void CheckSizes(std::size_t a, std::size_t b) {
  if (a != b) {
    throw MetricError("prediction count " + std::to_string(a) +
                      " differs from reference count " + std::to_string(b));
  }
}

char Lower(char c) {
  return static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
}

bool Space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }

// Depth-first search for the exact alignment with the fewest chunks among
// those with the maximum match count.
class ChunkSearch {
 public:
  ChunkSearch(std::span<const std::string> cand, std::span<const std::string> ref)
      : cand_(cand), ref_(ref), used_(ref.size(), false) {
    std::map<std::string, long> cc, rc;
    for (const auto& w : cand) ++cc[w];
    for (const auto& w : ref) ++rc[w];
    for (const auto& [w, n] : cc) {
      const auto it = rc.find(w);
      const long need = it == rc.end() ? 0 : std::min(n, it->second);
      need_[w] = need;
      matches_ += need;
    }
    remaining_ = cc;
  }

  long matches() const { return matches_; }

  long MinChunks() {
    if (matches_ == 0) return 0;
    best_ = matches_ + 1;
    Visit(0, -2, 0);
    return best_;
  }

 private:
  void Visit(std::size_t i, long prev_j, long chunks) {
    if (chunks >= best_ || ++nodes_ > kNodeBudget) return;
    if (i == cand_.size()) {
      best_ = chunks;
      return;
    }
    const std::string& w = cand_[i];
    long& need = need_[w];
    long& left = remaining_[w];
    --left;  // occurrences of w after position i
    if (need > 0) {
      // Extending the current chunk first tightens the bound early.
      const long ext = prev_j + 1;
      if (ext >= 0 && ext < static_cast<long>(ref_.size()) && !used_[ext] &&
          ref_[ext] == w) {
        Take(i, ext, chunks);
      }
      for (std::size_t j = 0; j < ref_.size(); ++j) {
        if (static_cast<long>(j) == ext || used_[j] || ref_[j] != w) continue;
        Take(i, static_cast<long>(j), chunks + 1);
      }
    }
    if (left >= need) Visit(i + 1, -2, chunks);
    ++left;
  }

  void Take(std::size_t i, long j, long chunks) {
    long& need = need_[cand_[i]];
    used_[j] = true;
    --need;
    Visit(i + 1, j, chunks == 0 ? 1 : chunks);
    ++need;
    used_[j] = false;
  }

  static constexpr long kNodeBudget = 2'000'000;
  std::span<const std::string> cand_, ref_;
  std::vector<bool> used_;
  std::map<std::string, long> need_, remaining_;
  long matches_ = 0;
  long best_ = 0;
  long nodes_ = 0;
};

using NgramCounts = std::map<std::vector<std::string>, double>;

NgramCounts CountNgrams(const std::vector<std::string>& tokens, int n) {
  NgramCounts out;
  for (std::size_t i = 0; i + n <= tokens.size(); ++i) {
    out[std::vector<std::string>(tokens.begin() + i, tokens.begin() + i + n)] += 1.0;
  }
  return out;
}

double Cosine(const NgramCounts& a, const NgramCounts& b,
              const std::map<std::vector<std::string>, double>& idf) {
  auto weight = [&idf](const std::vector<std::string>& g, double tf) {
    const auto it = idf.find(g);
    return tf * (it == idf.end() ? 0.0 : it->second);
  };
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (const auto& [g, tf] : a) {
    const double wa = weight(g, tf);
    na += wa * wa;
    const auto it = b.find(g);
    if (it != b.end()) dot += wa * weight(g, it->second);
  }
  for (const auto& [g, tf] : b) {
    const double wb = weight(g, tf);
    nb += wb * wb;
  }
  if (na == 0.0 || nb == 0.0) return 0.0;
  return dot / (std::sqrt(na) * std::sqrt(nb));
}

}  // namespace

std::string NormalizeAnswer(std::string_view text) {
  std::string out;
  bool pending_space = false;
  for (char c : text) {
    if (Space(c)) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) out += ' ';
    pending_space = false;
    out += Lower(c);
  }
  return out;
}

std::vector<std::string> MetricTokens(std::string_view text) {
  std::vector<std::string> out;
  std::string word;
  auto flush = [&] {
    if (!word.empty()) out.push_back(std::move(word));
    word.clear();
  };
  for (char c : text) {
    if (Space(c)) {
      flush();
    } else if (std::ispunct(static_cast<unsigned char>(c))) {
      flush();
      out.emplace_back(1, c);
    } else {
      word += Lower(c);
    }
  }
  flush();
  return out;
}

double ExactMatchAccuracy(std::span<const std::string> predictions,
                          std::span<const std::string> references) {
  CheckSizes(predictions.size(), references.size());
  if (predictions.empty()) throw MetricError("empty prediction list");
  long hits = 0;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    hits += NormalizeAnswer(predictions[i]) == NormalizeAnswer(references[i]);
  }
  return static_cast<double>(hits) / static_cast<double>(predictions.size());
}

std::vector<ClassF1> PerClassF1(std::span<const std::string> truths,
                                std::span<const std::string> predictions) {
  CheckSizes(predictions.size(), truths.size());
  if (truths.empty()) throw MetricError("empty label list");
  std::vector<std::string> t, p;
  for (const auto& s : truths) t.push_back(NormalizeAnswer(s));
  for (const auto& s : predictions) p.push_back(NormalizeAnswer(s));
  std::set<std::string> classes(t.begin(), t.end());
  classes.insert(p.begin(), p.end());
  std::vector<ClassF1> out;
  for (const auto& label : classes) {
    long tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < t.size(); ++i) {
      const bool is_true = t[i] == label, is_pred = p[i] == label;
      tp += is_true && is_pred;
      fp += !is_true && is_pred;
      fn += is_true && !is_pred;
    }
    ClassF1 c;
    c.label = label;
    c.support = tp + fn;
    c.precision = tp + fp > 0 ? static_cast<double>(tp) / (tp + fp) : 0.0;
    c.recall = tp + fn > 0 ? static_cast<double>(tp) / (tp + fn) : 0.0;
    const double denom = c.precision + c.recall;
    c.f1 = denom > 0.0 ? 2.0 * c.precision * c.recall / denom : 0.0;
    out.push_back(c);
  }
  return out;
}

double F1Weighted(std::span<const std::string> truths,
                  std::span<const std::string> predictions) {
  double sum = 0.0;
  for (const auto& c : PerClassF1(truths, predictions)) {
    sum += static_cast<double>(c.support) * c.f1;
  }
  return sum / static_cast<double>(truths.size());
}

double F1Macro(std::span<const std::string> truths,
               std::span<const std::string> predictions) {
  const auto classes = PerClassF1(truths, predictions);
  double sum = 0.0;
  for (const auto& c : classes) sum += c.f1;
  return sum / static_cast<double>(classes.size());
}

long LongestCommonSubsequence(std::span<const std::string> a,
                              std::span<const std::string> b) {
  std::vector<long> row(b.size() + 1, 0), prev(b.size() + 1, 0);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j) {
      row[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : std::max(prev[j], row[j - 1]);
    }
    std::swap(row, prev);
  }
  return prev[b.size()];
}

RougeL RougeLScore(std::span<const std::string> candidate,
                   std::span<const std::string> reference) {
  RougeL r;
  if (candidate.empty() || reference.empty()) {
    r.empty_input = true;
    return r;
  }
  r.lcs = LongestCommonSubsequence(candidate, reference);
  if (r.lcs == 0) return r;
  const double lcs = static_cast<double>(r.lcs);
  r.recall = lcs / static_cast<double>(candidate.size());
  r.precision = lcs / static_cast<double>(reference.size());
  const double beta2 = (r.precision / r.recall) * (r.precision / r.recall);
  r.score = (1.0 + beta2) * r.recall * r.precision / (r.recall + beta2 * r.precision);
  return r;
}

double RougeLText(std::string_view candidate, std::string_view reference) {
  return RougeLScore(MetricTokens(candidate), MetricTokens(reference)).score;
}

Meteor MeteorScore(std::span<const std::string> candidate,
                   std::span<const std::string> reference,
                   const MeteorParams& params) {
  Meteor m;
  ChunkSearch search(candidate, reference);
  m.matches = search.matches();
  if (m.matches == 0) return m;
  m.chunks = search.MinChunks();
  const double matches = static_cast<double>(m.matches);
  m.precision = matches / static_cast<double>(candidate.size());
  m.recall = matches / static_cast<double>(reference.size());
  const double fmean = m.precision * m.recall /
                       (params.alpha * m.precision + (1.0 - params.alpha) * m.recall);
  m.penalty = params.gamma *
              std::pow(static_cast<double>(m.chunks) / matches, params.theta);
  m.score = (1.0 - m.penalty) * fmean;
  return m;
}

double MeteorText(std::string_view candidate, std::string_view reference,
                  const MeteorParams& params) {
  return MeteorScore(MetricTokens(candidate), MetricTokens(reference), params).score;
}

Cider CiderScore(std::span<const std::string> candidates,
                 std::span<const std::vector<std::string>> references, int n_max) {
  CheckSizes(candidates.size(), references.size());
  if (candidates.empty()) throw MetricError("empty corpus");
  if (n_max < 1) throw MetricError("n_max must be at least 1");
  const auto items = candidates.size();
  std::vector<std::vector<std::vector<std::string>>> ref_tokens(items);
  for (std::size_t i = 0; i < items; ++i) {
    if (references[i].empty()) throw MetricError("candidate without references");
    for (const auto& r : references[i]) ref_tokens[i].push_back(MetricTokens(r));
  }
  const double n_docs = static_cast<double>(items);

  Cider out;
  out.per_n.assign(static_cast<std::size_t>(n_max), 0.0);
  out.per_item.assign(items, 0.0);
  for (int n = 1; n <= n_max; ++n) {
    std::vector<std::vector<NgramCounts>> ref_counts(items);
    std::map<std::vector<std::string>, double> df;
    for (std::size_t i = 0; i < items; ++i) {
      std::set<std::vector<std::string>> seen;
      for (const auto& tokens : ref_tokens[i]) {
        ref_counts[i].push_back(CountNgrams(tokens, n));
        for (const auto& [g, c] : ref_counts[i].back()) seen.insert(g);
      }
      for (const auto& g : seen) df[g] += 1.0;
    }
    std::map<std::vector<std::string>, double> idf;
    for (const auto& [g, d] : df) idf[g] = std::log((1.0 + n_docs) / (1.0 + d)) + 1.0;

    for (std::size_t i = 0; i < items; ++i) {
      const NgramCounts cand = CountNgrams(MetricTokens(candidates[i]), n);
      double sim = 0.0;
      for (const auto& ref : ref_counts[i]) sim += Cosine(cand, ref, idf);
      sim /= static_cast<double>(ref_counts[i].size());
      out.per_n[n - 1] += sim / n_docs;
      out.per_item[i] += 10.0 * sim / n_max;
    }
  }
  for (double v : out.per_item) out.score += v / n_docs;
  return out;
}

nlohmann::json EvalReport::ToJson() const {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& [k, v] : values) j[k] = v;
  return j;
}

EvalReport EvaluateTask(std::string_view task,
                        std::span<const std::string> predictions,
                        std::span<const std::string> references) {
  CheckSizes(predictions.size(), references.size());
  if (predictions.empty()) throw MetricError("empty corpus");
  EvalReport report;
  auto mean_of = [&](auto&& metric) {
    double sum = 0.0;
    for (std::size_t i = 0; i < predictions.size(); ++i) {
      sum += metric(predictions[i], references[i]);
    }
    return sum / static_cast<double>(predictions.size());
  };
  if (task == "classification" || task == "vqa" || task == "nli") {
    report.values["accuracy"] = ExactMatchAccuracy(predictions, references);
    report.values["f1_weighted"] = F1Weighted(references, predictions);
    report.values["f1_macro"] = F1Macro(references, predictions);
  } else if (task == "caption") {
    report.values["rouge_l"] = mean_of(
        [](const std::string& p, const std::string& r) { return RougeLText(p, r); });
    report.values["meteor"] = mean_of(
        [](const std::string& p, const std::string& r) { return MeteorText(p, r); });
    std::vector<std::vector<std::string>> refs;
    for (const auto& r : references) refs.push_back({r});
    report.values["cider"] = CiderScore(predictions, refs).score;
  } else if (task == "summarization") {
    report.values["rouge_l"] = mean_of(
        [](const std::string& p, const std::string& r) { return RougeLText(p, r); });
  } else if (task == "mlm") {
    report.values["accuracy"] = ExactMatchAccuracy(predictions, references);
  } else {
    throw MetricError("no metric routing for task '" + std::string(task) + "'");
  }
  return report;
}

}  // namespace uniseq
