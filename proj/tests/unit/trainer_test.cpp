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
#include <limits>
#include <string>
#include <vector>

#include "../oracle_values.hpp"
#include "../support/toy_models.hpp"
#include "uniseq/trainer.hpp"

namespace uniseq {
namespace {

using M = Matrix<double>;
using testing::ToyBatch;
using testing::ToyConfig;

TEST_CASE("smoothed nll reference values") {
  const M uniform = M::Zero(1, 59457);
  const std::vector<TokenId> target{17};
  CHECK(Seq2SeqLoss(uniform, target, 0.0) == doctest::Approx(std::log(59457.0)).epsilon(1e-12));
  CHECK(Seq2SeqLoss(uniform, target, 0.1) == doctest::Approx(std::log(59457.0)).epsilon(1e-12));

  M peaked = M::Zero(1, 5);
  peaked(0, 3) = 1000.0;
  const std::vector<TokenId> three{3};
  CHECK(Seq2SeqLoss(peaked, three, 0.0) == doctest::Approx(0.0));

  const M hand = (M(1, 3) << 1.0, 0.0, 0.0).finished();
  const std::vector<TokenId> zero{4 - 4};
  // Target id 0 is padding, so place the hand case at id 1 instead.
  const M shifted = (M(1, 3) << 0.0, 1.0, 0.0).finished();
  const std::vector<TokenId> one{1};
  CHECK(Seq2SeqLoss(shifted, one, 0.0) ==
        doctest::Approx(oracle::kThreeWayLoss).epsilon(1e-14));
  CHECK_THROWS_AS(Seq2SeqLoss(hand, zero, 0.0), ModelError);
}

TEST_CASE("smoothed nll gradient") {
  const M logits = (M(2, 4) << 0.3, -1.0, 2.0, 0.5, 1.0, 1.0, -0.5, 0.0).finished();
  const std::vector<TokenId> targets{2, 3};
  M grad;
  SmoothedNll(logits, targets, 0.2, &grad);
  for (Eigen::Index i = 0; i < 2; ++i) {
    const Eigen::RowVectorXd p =
        (logits.row(i).array().exp() / logits.row(i).array().exp().sum()).matrix();
    for (Eigen::Index v = 0; v < 4; ++v) {
      const double want = p(v) - (0.8 * (v == targets[i]) + 0.2 / 4.0);
      CHECK(grad(i, v) == doctest::Approx(want).epsilon(1e-12));
    }
  }
}

TEST_CASE("gradients on a d=2 model match finite differences") {
  const ModelConfig c = ToyConfig(2, 1, 1, 1, 12);
  const auto p = InitModel<double>(c, 5);
  const auto batch = ToyBatch(c, 2, 3, true, 6);
  GradCheckOptions opts;
  opts.entries = 100000;  // every entry
  const GradCheckResult r = GradCheck(p, batch, opts);
  CHECK(r.checked == static_cast<long>(p.ParameterCount()));
  INFO(r.worst_tensor);
  CHECK(r.max_relative_error <= 1e-5);
}

TEST_CASE("batch gradient is the mean of per-sample gradients") {
  const ModelConfig c = ToyConfig(4, 2, 1, 1);
  const auto p = InitModel<double>(c, 1);
  const auto batch = ToyBatch(c, 2, 2, false, 3);
  ModelParams<double> both, first, second;
  ComputeGrads(p, std::span<const Sample>(batch), 0.1, ForwardOptions{}, both);
  ComputeGrads(p, std::span<const Sample>(batch).subspan(0, 1), 0.1, ForwardOptions{}, first);
  ComputeGrads(p, std::span<const Sample>(batch).subspan(1, 1), 0.1, ForwardOptions{}, second);
  AddScaled(first, second, 1.0);
  double worst = 0.0;
  std::vector<const M*> avg;
  first.ForEach([&](const std::string&, const M& m, ParamKind) { avg.push_back(&m); });
  std::size_t i = 0;
  both.ForEach([&](const std::string&, const M& m, ParamKind) {
    worst = std::max(worst, (m - 0.5 * *avg[i++]).cwiseAbs().maxCoeff());
  });
  CHECK(worst < 1e-12);
}

TEST_CASE("unused table rows get exact zero gradients") {
  const ModelConfig c = ToyConfig(4, 2, 1, 1);
  const auto p = InitModel<double>(c, 1);
  const auto batch = ToyBatch(c, 1, 2, false, 3);
  ModelParams<double> g;
  ComputeGrads(p, std::span<const Sample>(batch), 0.1, ForwardOptions{}, g);
  CHECK(g.encoder_text_positions.bottomRows(8).cwiseAbs().maxCoeff() == 0.0);
  CHECK(g.patch_positions.bottomRows(10).cwiseAbs().maxCoeff() == 0.0);
  CHECK(g.decoder_positions.bottomRows(8).cwiseAbs().maxCoeff() == 0.0);
  CHECK(g.encoder_text_positions.row(0).cwiseAbs().maxCoeff() > 0.0);
}

TEST_CASE("non-finite losses raise numeric errors") {
  const ModelConfig c = ToyConfig(4, 2, 1, 1);
  auto p = InitModel<double>(c, 1);
  p.token_embedding(5, 0) = std::numeric_limits<double>::quiet_NaN();
  const auto batch = ToyBatch(c, 1, 2, false, 3);
  ModelParams<double> g;
  CHECK_THROWS_AS(ComputeGrads(p, std::span<const Sample>(batch), 0.1, ForwardOptions{}, g),
                  NumericError);
}

TEST_CASE("learning rate schedule") {
  OptimizerConfig c;
  c.total_steps = 1000;
  c.warmup_ratio = 0.01;
  CHECK(c.warmup_steps() == 10);
  CHECK(LearningRateAt(c, 0) == 0.0);
  CHECK(LearningRateAt(c, 5) == doctest::Approx(5e-5));
  CHECK(LearningRateAt(c, 10) == doctest::Approx(1e-4).epsilon(1e-15));
  CHECK(LearningRateAt(c, 505) == doctest::Approx(oracle::kLr505).epsilon(1e-14));
  CHECK(LearningRateAt(c, 1000) == 0.0);
  CHECK_THROWS_AS(LearningRateAt(c, 1001), ModelError);
}

ModelParams<double> OneWeight(double w) {
  ModelConfig c = ToyConfig(2, 1, 0, 0, 4);
  auto p = ZeroModel<double>(c);
  p.token_embedding(0, 0) = w;
  return p;
}

TEST_CASE("adamw closed forms") {
  OptimizerConfig c;
  c.weight_decay = 0.0;
  auto p = OneWeight(0.0);
  auto g = ZerosLike(p);
  g.token_embedding(0, 0) = 1.0;
  auto state = MakeOptimizer(p, c);
  AdamWStep(p, g, state, 0.1);
  CHECK(p.token_embedding(0, 0) == doctest::Approx(oracle::kFirstAdamWStep).epsilon(1e-14));

  auto still = OneWeight(0.7);
  auto s2 = MakeOptimizer(still, c);
  AdamWStep(still, ZerosLike(still), s2, 0.1);
  CHECK(still.token_embedding(0, 0) == 0.7);

  c.weight_decay = 0.01;
  auto decayed = OneWeight(0.7);
  auto s3 = MakeOptimizer(decayed, c);
  AdamWStep(decayed, ZerosLike(decayed), s3, 0.1);
  CHECK(decayed.token_embedding(0, 0) == 0.7 * (1.0 - 0.1 * 0.01));
}

TEST_CASE("relative error floor") {
  CHECK(RelativeError(0.0, 1e-12) == 0.0);
  CHECK(RelativeError(1.0, 1.1) == doctest::Approx(0.1 / 1.1));
}

TEST_CASE("seeded training is repeatable") {
  const ModelConfig c = ToyConfig(8, 2, 1, 1);
  auto run = [&] {
    auto p = InitModel<double>(c, 2);
    OptimizerConfig oc;
    oc.total_steps = 10;
    oc.peak_lr = 1e-2;
    auto state = MakeOptimizer(p, oc);
    const auto batch = ToyBatch(c, 2, 2, true, 9);
    TrainOptions opts{0.1, 0.1, 42};
    std::vector<double> losses;
    for (const auto& r : TrainEpoch<double>(p, state, 10, [&] { return batch; }, opts)) {
      losses.push_back(r.loss);
    }
    return losses;
  };
  const auto a = run();
  CHECK(a == run());
  CHECK(a.back() < a.front());
}

}  // namespace
}  // namespace uniseq
