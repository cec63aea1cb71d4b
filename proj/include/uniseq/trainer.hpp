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

// Teacher-forced sequence loss, backpropagation over sample batches, AdamW
// with a linear warmup/decay schedule, and a finite-difference checker.

#ifndef UNISEQ_TRAINER_HPP_
#define UNISEQ_TRAINER_HPP_

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <type_traits>
#include <vector>

#include "uniseq/model.hpp"
#include "uniseq/sample.hpp"

namespace uniseq {

/// A non-finite loss or gradient. `step` is -1 outside a training loop.
class NumericError : public std::runtime_error {
 public:
  NumericError(const std::string& what, long step = -1)
      : std::runtime_error(what), step_(step) {}
  long step() const { return step_; }

 private:
  long step_;
};

// ---------------------------------------------------------------------------
// Loss

/// Summed smoothed NLL over the non-pad rows of `logits`.
/// Accumulation type for losses: at least double, wider when the model is.
template <typename Scalar>
using LossScalar =
    std::conditional_t<(sizeof(Scalar) > sizeof(double)), Scalar, double>;

struct LossSum {
  long double total = 0.0;
  long tokens = 0;
};

/// Per-token loss (1-s)*NLL(target) + s*mean-NLL over the vocabulary. When
/// `d_logits` is given it receives the gradient of the *sum*, times `scale`.
template <typename Scalar>
LossSum SmoothedNll(const Matrix<Scalar>& logits,
                    std::span<const TokenId> targets, double smoothing,
                    Matrix<Scalar>* d_logits = nullptr, double scale = 1.0) {
  if (logits.rows() != static_cast<Eigen::Index>(targets.size())) {
    throw ModelError("one logit row per target position required");
  }
  if (smoothing < 0.0 || smoothing > 1.0) {
    throw ModelError("label smoothing must lie in [0,1]");
  }
  const Eigen::Index vocab = logits.cols();
  if (d_logits) d_logits->setZero(logits.rows(), vocab);
  LossSum out;
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    const TokenId target = targets[static_cast<std::size_t>(i)];
    if (target == kPadId) continue;
    if (target < 0 || target >= vocab) throw ModelError("target id out of range");
    using Acc = LossScalar<Scalar>;
    const auto row = logits.row(i).template cast<Acc>();
    const Acc peak = row.maxCoeff();
    const Acc lse = peak + std::log((row.array() - peak).exp().sum());
    out.total += lse - (1.0 - smoothing) * row(target) - smoothing * row.mean();
    ++out.tokens;
    if (d_logits) {
      Eigen::Matrix<Acc, 1, Eigen::Dynamic> g = (row.array() - lse).exp().matrix();
      g.array() -= smoothing / static_cast<double>(vocab);
      g(target) -= 1.0 - smoothing;
      d_logits->row(i) = (scale * g).template cast<Scalar>();
    }
  }
  return out;
}

/// Mean smoothed NLL over non-pad target positions.
template <typename Scalar>
double Seq2SeqLoss(const Matrix<Scalar>& logits, std::span<const TokenId> targets,
                   double smoothing) {
  const LossSum sum = SmoothedNll(logits, targets, smoothing);
  if (sum.tokens == 0) throw ModelError("target contains only padding");
  return static_cast<double>(sum.total / static_cast<long double>(sum.tokens));
}

/// Decoder input for teacher forcing: bos followed by all but the last target.
inline std::vector<TokenId> TeacherForcingPrefix(std::span<const TokenId> target) {
  std::vector<TokenId> prefix{kBosId};
  if (!target.empty()) prefix.insert(prefix.end(), target.begin(), target.end() - 1);
  return prefix;
}

template <typename Scalar>
SourceInput<Scalar> SourceFromSample(const Sample& sample, const ModelConfig& c) {
  return MakeSourceInput<Scalar>(sample.source_text_ids, sample.source_patches,
                                 c.patch_dim());
}

// ---------------------------------------------------------------------------
// Gradients

/// Loss for a batch: mean over every non-pad target token in the batch.
template <typename Scalar>
LossScalar<Scalar> BatchLoss(const ModelParams<Scalar>& params,
                             std::span<const Sample> batch, double smoothing,
                             const ForwardOptions& opts) {
  long double total = 0.0;
  long tokens = 0;
  for (const Sample& sample : batch) {
    const auto source = SourceFromSample<Scalar>(sample, params.config);
    const Matrix<Scalar> memory = EncoderForward(params, source, opts);
    const auto prefix = TeacherForcingPrefix(sample.target_ids);
    const Matrix<Scalar> logits = DecoderForward<Scalar>(params, memory, prefix, opts);
    const LossSum s = SmoothedNll(logits, sample.target_ids, smoothing);
    total += s.total;
    tokens += s.tokens;
  }
  if (tokens == 0) throw ModelError("batch targets contain only padding");
  return static_cast<LossScalar<Scalar>>(total / static_cast<long double>(tokens));
}

/// Fills `grads` (reshaped to match `params`) with d(batch loss)/d(params)
/// and returns the loss. Untouched parameters get exact zeros.
template <typename Scalar>
double ComputeGrads(const ModelParams<Scalar>& params, std::span<const Sample> batch,
                    double smoothing, const ForwardOptions& opts,
                    ModelParams<Scalar>& grads) {
  grads = ZerosLike(params);
  long tokens = 0;
  for (const Sample& sample : batch) {
    for (TokenId id : sample.target_ids) tokens += id != kPadId;
  }
  if (tokens == 0) throw ModelError("batch targets contain only padding");
  const double scale = 1.0 / static_cast<double>(tokens);

  long double total = 0.0;
  for (const Sample& sample : batch) {
    const auto source = SourceFromSample<Scalar>(sample, params.config);
    EncoderTrace<Scalar> enc_trace;
    const Matrix<Scalar> memory = EncoderForward(params, source, opts, &enc_trace);
    const auto prefix = TeacherForcingPrefix(sample.target_ids);
    DecoderTrace<Scalar> dec_trace;
    const Matrix<Scalar> logits =
        DecoderForward<Scalar>(params, memory, prefix, opts, &dec_trace);
    Matrix<Scalar> d_logits;
    total += SmoothedNll(logits, sample.target_ids, smoothing, &d_logits, scale).total;
    const Matrix<Scalar> d_memory =
        DecoderBackward(params, dec_trace, d_logits, memory.rows(), grads);
    EncoderBackward(params, enc_trace, d_memory, grads);
  }
  const double loss = static_cast<double>(total) * scale;
  if (!std::isfinite(loss)) throw NumericError("non-finite loss");
  return loss;
}

template <typename Scalar>
double GlobalNorm(const ModelParams<Scalar>& grads) {
  double sq = 0.0;
  grads.ForEach([&sq](const std::string&, const Matrix<Scalar>& m, ParamKind) {
    sq += m.template cast<double>().squaredNorm();
  });
  return std::sqrt(sq);
}

// ---------------------------------------------------------------------------
// Optimizer

struct OptimizerConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double weight_decay = 0.01;
  double peak_lr = 1e-4;
  long total_steps = 1000;
  double warmup_ratio = 0.01;
  double label_smoothing = 0.1;
  double max_grad_norm = 0.0;  // 0 disables clipping

  long warmup_steps() const {
    return std::lround(warmup_ratio * static_cast<double>(total_steps));
  }
  void Validate() const {
    if (total_steps < 0) throw ModelError("total_steps must be nonnegative");
    if (peak_lr < 0.0) throw ModelError("peak learning rate must be nonnegative");
    if (warmup_ratio < 0.0 || warmup_ratio > 1.0) {
      throw ModelError("warmup ratio must lie in [0,1]");
    }
    if (beta1 < 0.0 || beta1 >= 1.0 || beta2 < 0.0 || beta2 >= 1.0) {
      throw ModelError("Adam betas must lie in [0,1)");
    }
    if (max_grad_norm < 0.0) throw ModelError("max_grad_norm must be nonnegative");
  }
};

/// Linear 0 -> peak over the warmup steps, then linear peak -> 0 at the end.
inline double LearningRateAt(const OptimizerConfig& c, long step) {
  if (step < 0 || step > c.total_steps) {
    throw ModelError("step " + std::to_string(step) + " outside [0, " +
                     std::to_string(c.total_steps) + "]");
  }
  const long warmup = c.warmup_steps();
  if (step < warmup) {
    return c.peak_lr * static_cast<double>(step) / static_cast<double>(warmup);
  }
  if (c.total_steps == warmup) return c.peak_lr;
  return c.peak_lr * static_cast<double>(c.total_steps - step) /
         static_cast<double>(c.total_steps - warmup);
}

template <typename Scalar>
struct OptimizerState {
  OptimizerConfig config;
  ModelParams<Scalar> m;
  ModelParams<Scalar> v;
  long t = 0;
};

template <typename Scalar>
OptimizerState<Scalar> MakeOptimizer(const ModelParams<Scalar>& params,
                                     const OptimizerConfig& config) {
  config.Validate();
  return {config, ZerosLike(params), ZerosLike(params), 0};
}

/// One AdamW update at an explicit learning rate. Decay is decoupled:
/// w <- w * (1 - lr*lambda) before the bias-corrected moment step.
template <typename Scalar>
void AdamWStep(ModelParams<Scalar>& params, const ModelParams<Scalar>& grads,
               OptimizerState<Scalar>& state, double lr) {
  const OptimizerConfig& c = state.config;
  ++state.t;
  const double correction1 = 1.0 - std::pow(c.beta1, static_cast<double>(state.t));
  const double correction2 = 1.0 - std::pow(c.beta2, static_cast<double>(state.t));
  std::vector<const Matrix<Scalar>*> g;
  std::vector<Matrix<Scalar>*> m, v;
  grads.ForEach([&g](const std::string&, const Matrix<Scalar>& x, ParamKind) {
    g.push_back(&x);
  });
  state.m.ForEach([&m](const std::string&, Matrix<Scalar>& x, ParamKind) {
    m.push_back(&x);
  });
  state.v.ForEach([&v](const std::string&, Matrix<Scalar>& x, ParamKind) {
    v.push_back(&x);
  });
  const Scalar b1(c.beta1), b2(c.beta2);
  const Scalar decay(1.0 - lr * c.weight_decay);
  const Scalar step_size(lr / correction1);
  const Scalar inv_c2(1.0 / correction2);
  const Scalar eps(c.epsilon);
  std::size_t i = 0;
  params.ForEach([&](const std::string& name, Matrix<Scalar>& w, ParamKind) {
    const Matrix<Scalar>& gi = *g[i];
    if (gi.rows() != w.rows() || gi.cols() != w.cols()) {
      throw ModelError("gradient shape mismatch for " + name);
    }
    Matrix<Scalar>& mi = *m[i];
    Matrix<Scalar>& vi = *v[i];
    ++i;
    w *= decay;
    mi = b1 * mi + (Scalar(1) - b1) * gi;
    vi = b2 * vi + (Scalar(1) - b2) * gi.cwiseProduct(gi);
    w.array() -= step_size * mi.array() / ((vi.array() * inv_c2).sqrt() + eps);
  });
}

/// AdamW update with the scheduled rate for the next step (1-based).
/// Returns that rate.
template <typename Scalar>
double AdamWStep(ModelParams<Scalar>& params, const ModelParams<Scalar>& grads,
                 OptimizerState<Scalar>& state) {
  const double lr = LearningRateAt(state.config, state.t + 1);
  AdamWStep(params, grads, state, lr);
  return lr;
}

// ---------------------------------------------------------------------------
// Gradient check

struct GradCheckOptions {
  double step = 1e-5;
  int entries = 240;  // lower bound on checked entries
  std::uint64_t seed = 7;
  double smoothing = 0.1;
  // With nonzero rates the mask rng is reseeded before every evaluation, so
  // analytic and numeric losses see identical masks.
  double dropout = 0.0;
  double stochastic_depth = 0.0;
  std::uint64_t mask_seed = 11;
};

struct GradCheckResult {
  double max_relative_error = 0.0;
  std::string worst_tensor;
  long checked = 0;
};

/// |a - n| / max(|a|, |n|, 1e-8); exactly 0 when both sit under the floor.
inline double RelativeError(double analytic, double numeric) {
  const double scale = std::max(std::abs(analytic), std::abs(numeric));
  if (scale < 1e-8) return 0.0;
  return std::abs(analytic - numeric) / scale;
}

/// Compares analytic gradients with central differences on a random subset
/// of entries drawn from every tensor (all entries when the model is small).
inline GradCheckResult GradCheck(const ModelParams<double>& params,
                                 std::span<const Sample> batch,
                                 const GradCheckOptions& options = {}) {
  const bool stochastic = options.dropout > 0.0 || options.stochastic_depth > 0.0;
  std::mt19937_64 mask_rng;
  ForwardOptions fwd{stochastic, options.dropout, options.stochastic_depth,
                     &mask_rng};
  using Wide = long double;
  auto loss_at = [&](const ModelParams<Wide>& p) {
    mask_rng.seed(options.mask_seed);
    return BatchLoss(p, batch, options.smoothing, fwd);
  };

  ModelParams<double> grads;
  mask_rng.seed(options.mask_seed);
  ComputeGrads(params, batch, options.smoothing, fwd, grads);

  std::vector<std::pair<std::string, const Matrix<double>*>> analytic;
  grads.ForEach([&analytic](const std::string& name, const Matrix<double>& m,
                            ParamKind) { analytic.emplace_back(name, &m); });
  const auto total = static_cast<long>(params.ParameterCount());
  const long tensors = static_cast<long>(analytic.size());
  const long per_tensor =
      std::max<long>(2, (options.entries + tensors - 1) / tensors);

  // The finite-difference reference runs in extended precision so its
  // roundoff stays well below the tolerance even for tiny gradients.
  ModelParams<Wide> probe = params.template Cast<Wide>();
  std::mt19937_64 rng(options.seed);
  GradCheckResult result;
  std::size_t t = 0;
  probe.ForEach([&](const std::string& name, Matrix<Wide>& w, ParamKind) {
    const Matrix<double>& g = *analytic[t++].second;
    std::vector<Eigen::Index> picks(static_cast<std::size_t>(w.size()));
    for (Eigen::Index k = 0; k < w.size(); ++k) picks[static_cast<std::size_t>(k)] = k;
    if (total > options.entries && w.size() > per_tensor) {
      std::shuffle(picks.begin(), picks.end(), rng);
      picks.resize(static_cast<std::size_t>(per_tensor));
    }
    for (Eigen::Index k : picks) {
      Wide& x = w.data()[k];
      const Wide saved = x;
      const Wide step = options.step;
      x = saved + step;
      const Wide up = loss_at(probe);
      x = saved - step;
      const Wide down = loss_at(probe);
      x = saved;
      const auto numeric = static_cast<double>((up - down) / (2 * step));
      const double err = RelativeError(g.data()[k], numeric);
      if (result.worst_tensor.empty() || err > result.max_relative_error) {
        result.max_relative_error = err;
        result.worst_tensor = name;
      }
      ++result.checked;
    }
  });
  return result;
}

// ---------------------------------------------------------------------------
// Training loop

struct TrainRecord {
  long step = 0;
  double lr = 0.0;
  double loss = 0.0;
  double seconds = 0.0;
};

struct TrainOptions {
  double dropout = 0.1;
  double stochastic_depth = 0.1;
  std::uint64_t seed = 0;
};

/// One optimizer step on `batch`; throws NumericError naming the step.
template <typename Scalar>
TrainRecord TrainStep(ModelParams<Scalar>& params, OptimizerState<Scalar>& state,
                      std::span<const Sample> batch, const TrainOptions& options,
                      std::mt19937_64& rng) {
  const auto start = std::chrono::steady_clock::now();
  const long step = state.t + 1;
  ForwardOptions fwd{true, options.dropout, options.stochastic_depth, &rng};
  ModelParams<Scalar> grads;
  double loss = 0.0;
  try {
    loss = ComputeGrads(params, batch, state.config.label_smoothing, fwd, grads);
  } catch (const NumericError& e) {
    throw NumericError(std::string(e.what()) + " at step " + std::to_string(step),
                       step);
  }
  if (state.config.max_grad_norm > 0.0) {
    const double norm = GlobalNorm(grads);
    if (!std::isfinite(norm)) {
      throw NumericError("non-finite gradient at step " + std::to_string(step), step);
    }
    if (norm > state.config.max_grad_norm) {
      const Scalar shrink(state.config.max_grad_norm / norm);
      grads.ForEach([shrink](const std::string&, Matrix<Scalar>& m, ParamKind) {
        m *= shrink;
      });
    }
  }
  TrainRecord record;
  record.step = step;
  record.loss = loss;
  record.lr = AdamWStep(params, grads, state);
  record.seconds = std::chrono::duration<double>(
                       std::chrono::steady_clock::now() - start).count();
  return record;
}

/// Runs `steps` updates pulling batches from `next_batch`; `on_step` sees
/// every record as it is produced.
template <typename Scalar>
std::vector<TrainRecord> TrainEpoch(
    ModelParams<Scalar>& params, OptimizerState<Scalar>& state, long steps,
    const std::function<std::vector<Sample>()>& next_batch,
    const TrainOptions& options,
    const std::function<void(const TrainRecord&)>& on_step = {}) {
  std::mt19937_64 rng(options.seed);
  std::vector<TrainRecord> records;
  records.reserve(static_cast<std::size_t>(std::max<long>(steps, 0)));
  for (long i = 0; i < steps; ++i) {
    const std::vector<Sample> batch = next_batch();
    records.push_back(TrainStep(params, state, batch, options, rng));
    if (on_step) on_step(records.back());
  }
  return records;
}

}  // namespace uniseq

#endif  // UNISEQ_TRAINER_HPP_
