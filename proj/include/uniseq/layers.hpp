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

// Forward and reverse-mode building blocks of the transformer. Every
// activation matrix holds one sequence position per row.

#ifndef UNISEQ_LAYERS_HPP_
#define UNISEQ_LAYERS_HPP_

#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "uniseq/model_config.hpp"

namespace uniseq {

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using ColumnVector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

// ---------------------------------------------------------------------------
// Layer normalization

template <typename Scalar>
struct LayerNormParams {
  Matrix<Scalar> gain;  // 1 x width
  Matrix<Scalar> bias;  // 1 x width
};

template <typename Scalar>
struct LayerNormCache {
  Matrix<Scalar> normalized;
  ColumnVector<Scalar> inv_std;
};

inline constexpr double kLayerNormEpsilon = 1e-5;

template <typename Scalar>
Matrix<Scalar> LayerNormForward(const Matrix<Scalar>& x,
                                const LayerNormParams<Scalar>& p,
                                LayerNormCache<Scalar>* cache = nullptr) {
  const Eigen::Index width = x.cols();
  const ColumnVector<Scalar> mean = x.rowwise().mean();
  Matrix<Scalar> centered = x.colwise() - mean;
  const ColumnVector<Scalar> inv_std =
      ((centered.array().square().rowwise().sum() / Scalar(width)) +
       Scalar(kLayerNormEpsilon))
          .rsqrt()
          .matrix();
  Matrix<Scalar> normalized = centered.array().colwise() * inv_std.array();
  Matrix<Scalar> y =
      (normalized.array().rowwise() * p.gain.row(0).array()).matrix();
  y.rowwise() += p.bias.row(0);
  if (cache) {
    cache->normalized = std::move(normalized);
    cache->inv_std = inv_std;
  }
  return y;
}

template <typename Scalar>
Matrix<Scalar> LayerNormBackward(const Matrix<Scalar>& dy,
                                 const LayerNormParams<Scalar>& p,
                                 const LayerNormCache<Scalar>& cache,
                                 LayerNormParams<Scalar>& grad) {
  const auto& xhat = cache.normalized;
  const Scalar width = Scalar(dy.cols());
  grad.gain += (dy.array() * xhat.array()).colwise().sum().matrix();
  grad.bias += dy.colwise().sum();
  const Matrix<Scalar> dxhat =
      (dy.array().rowwise() * p.gain.row(0).array()).matrix();
  const ColumnVector<Scalar> sum_dxhat = dxhat.rowwise().sum();
  const ColumnVector<Scalar> sum_dxhat_xhat =
      (dxhat.array() * xhat.array()).rowwise().sum().matrix();
  Matrix<Scalar> dx = (dxhat.array() * width).matrix();
  dx.colwise() -= sum_dxhat;
  dx -= (xhat.array().colwise() * sum_dxhat_xhat.array()).matrix();
  dx = (dx.array().colwise() * (cache.inv_std.array() / width)).matrix();
  return dx;
}

// ---------------------------------------------------------------------------
// Elementwise activations

template <typename Scalar>
Scalar Gelu(Scalar x) {
  return Scalar(0.5) * x *
         (Scalar(1) + std::erf(x / Scalar(std::numbers::sqrt2)));
}

template <typename Scalar>
Scalar GeluDerivative(Scalar x) {
  const Scalar cdf =
      Scalar(0.5) * (Scalar(1) + std::erf(x / Scalar(std::numbers::sqrt2)));
  const Scalar pdf = std::exp(Scalar(-0.5) * x * x) /
                     Scalar(std::sqrt(2 * std::numbers::pi));
  return cdf + x * pdf;
}

/// Row-wise softmax; -inf entries receive probability 0.
template <typename Scalar>
void SoftmaxRowsInPlace(Matrix<Scalar>& s) {
  for (Eigen::Index i = 0; i < s.rows(); ++i) {
    const Scalar peak = s.row(i).maxCoeff();
    s.row(i) = (s.row(i).array() - peak).exp().matrix();
    s.row(i) /= s.row(i).sum();
  }
}

// ---------------------------------------------------------------------------
// Feed-forward block: linear -> LN -> GELU -> linear

template <typename Scalar>
struct FeedForwardParams {
  Matrix<Scalar> w1, b1;  // width x inner, 1 x inner
  LayerNormParams<Scalar> inner_norm;
  Matrix<Scalar> w2, b2;  // inner x width, 1 x width
};

template <typename Scalar>
struct FeedForwardCache {
  Matrix<Scalar> input;
  LayerNormCache<Scalar> norm;
  Matrix<Scalar> normalized;  // LN output, GELU input
  Matrix<Scalar> activated;
};

template <typename Scalar>
Matrix<Scalar> FeedForwardForward(const Matrix<Scalar>& x,
                                  const FeedForwardParams<Scalar>& p,
                                  FeedForwardCache<Scalar>* cache = nullptr) {
  Matrix<Scalar> h(x.rows(), p.w1.cols());
  h.noalias() = x * p.w1;
  h.rowwise() += p.b1.row(0);
  LayerNormCache<Scalar> norm_cache;
  Matrix<Scalar> normalized =
      LayerNormForward(h, p.inner_norm, cache ? &norm_cache : nullptr);
  Matrix<Scalar> activated = normalized.unaryExpr(&Gelu<Scalar>);
  Matrix<Scalar> y(x.rows(), p.w2.cols());
  y.noalias() = activated * p.w2;
  y.rowwise() += p.b2.row(0);
  if (cache) {
    cache->input = x;
    cache->norm = std::move(norm_cache);
    cache->normalized = std::move(normalized);
    cache->activated = std::move(activated);
  }
  return y;
}

template <typename Scalar>
Matrix<Scalar> FeedForwardBackward(const Matrix<Scalar>& dy,
                                   const FeedForwardParams<Scalar>& p,
                                   const FeedForwardCache<Scalar>& cache,
                                   FeedForwardParams<Scalar>& grad) {
  grad.w2.noalias() += cache.activated.transpose() * dy;
  grad.b2 += dy.colwise().sum();
  Matrix<Scalar> dact(dy.rows(), p.w2.rows());
  dact.noalias() = dy * p.w2.transpose();
  const Matrix<Scalar> dnorm =
      (dact.array() *
       cache.normalized.unaryExpr(&GeluDerivative<Scalar>).array())
          .matrix();
  const Matrix<Scalar> dh =
      LayerNormBackward(dnorm, p.inner_norm, cache.norm, grad.inner_norm);
  grad.w1.noalias() += cache.input.transpose() * dh;
  grad.b1 += dh.colwise().sum();
  Matrix<Scalar> dx(dy.rows(), p.w1.rows());
  dx.noalias() = dh * p.w1.transpose();
  return dx;
}

// ---------------------------------------------------------------------------
// Head-scaled attention with decoupled positional scores and relative bias

template <typename Scalar>
struct AttentionParams {
  Matrix<Scalar> wq, bq, wk, bk, wv, bv, wo, bo;
  // Positional projections; empty for cross-attention.
  Matrix<Scalar> uq, uk;
  Matrix<Scalar> head_scale;  // 1 x heads
};

/// Relative position bias lookup for one query/key layout. `index(i, j)`
/// addresses the text table when below its row count, the patch table
/// (after subtracting that count) otherwise, and no bias when negative.
/// The tables belong to the model and are shared by every layer.
template <typename Scalar>
struct RelativeBias {
  const Matrix<Scalar>* text_table = nullptr;
  const Matrix<Scalar>* patch_table = nullptr;
  Eigen::MatrixXi index;

  Scalar at(Eigen::Index i, Eigen::Index j, int head) const {
    const int k = index(i, j);
    if (k < 0) return Scalar(0);
    const int text_rows = static_cast<int>(text_table->rows());
    return k < text_rows ? (*text_table)(k, head)
                         : (*patch_table)(k - text_rows, head);
  }
};

template <typename Scalar>
struct RelativeBiasGrad {
  Matrix<Scalar>* text_table = nullptr;
  Matrix<Scalar>* patch_table = nullptr;
};

struct AttentionMask {
  bool causal = false;
};

template <typename Scalar>
struct AttentionCache {
  Matrix<Scalar> xq, xkv;
  Matrix<Scalar> pos_q, pos_k;
  Matrix<Scalar> q, k, v;
  Matrix<Scalar> pq, pk;
  std::vector<Matrix<Scalar>> probs;
  Matrix<Scalar> mixed;   // concat over heads of A_h V_h
  Matrix<Scalar> scaled;  // concat over heads of gamma_h A_h V_h
};

namespace detail {

template <typename Scalar>
Matrix<Scalar> Affine(const Matrix<Scalar>& x, const Matrix<Scalar>& w,
                      const Matrix<Scalar>& b) {
  Matrix<Scalar> y(x.rows(), w.cols());
  y.noalias() = x * w;
  y.rowwise() += b.row(0);
  return y;
}

// Pre-softmax scores of all heads from already-projected content and
// positional vectors. Empty pq/pk disable the positional term.
template <typename Scalar>
std::vector<Matrix<Scalar>> ScoresFromProjections(
    const Matrix<Scalar>& q, const Matrix<Scalar>& k, const Matrix<Scalar>& pq,
    const Matrix<Scalar>& pk, int heads, const RelativeBias<Scalar>* bias,
    AttentionMask mask) {
  const int dh = static_cast<int>(q.cols()) / heads;
  const Scalar inv = Scalar(1) / std::sqrt(Scalar(dh));
  const bool positional = pq.size() > 0;
  std::vector<Matrix<Scalar>> scores(heads);
  for (int h = 0; h < heads; ++h) {
    Matrix<Scalar>& s = scores[h];
    s.noalias() = q.middleCols(h * dh, dh) * k.middleCols(h * dh, dh).transpose();
    if (positional) {
      s.noalias() +=
          pq.middleCols(h * dh, dh) * pk.middleCols(h * dh, dh).transpose();
    }
    s *= inv;
    if (bias) {
      for (Eigen::Index j = 0; j < s.cols(); ++j) {
        for (Eigen::Index i = 0; i < s.rows(); ++i) s(i, j) += bias->at(i, j, h);
      }
    }
    if (mask.causal) {
      for (Eigen::Index i = 0; i < s.rows(); ++i) {
        for (Eigen::Index j = i + 1; j < s.cols(); ++j) {
          s(i, j) = -std::numeric_limits<Scalar>::infinity();
        }
      }
    }
  }
  return scores;
}

}  // namespace detail

/// Per-head scores (1/sqrt(d_head)) (I_i W^Q)(I_j W^K)^T
///   + (1/sqrt(d_head)) (P_i U^Q)(P_j U^K)^T + B_{j-i},
/// with masked entries at -inf. Positions may be empty matrices when the
/// parameters carry no positional projections.
template <typename Scalar>
std::vector<Matrix<Scalar>> AttentionScores(
    const Matrix<Scalar>& content_q, const Matrix<Scalar>& content_kv,
    const Matrix<Scalar>& positions_q, const Matrix<Scalar>& positions_kv,
    const AttentionParams<Scalar>& p, int heads,
    const RelativeBias<Scalar>* bias = nullptr, AttentionMask mask = {}) {
  const bool positional = p.uq.size() > 0 && positions_q.size() > 0;
  if (positional && (positions_q.rows() != content_q.rows() ||
                     positions_kv.rows() != content_kv.rows())) {
    throw ModelError("content and position sequences differ in length");
  }
  const Matrix<Scalar> q = detail::Affine(content_q, p.wq, p.bq);
  const Matrix<Scalar> k = detail::Affine(content_kv, p.wk, p.bk);
  Matrix<Scalar> pq, pk;
  if (positional) {
    pq.noalias() = positions_q * p.uq;
    pk.noalias() = positions_kv * p.uk;
  }
  return detail::ScoresFromProjections(q, k, pq, pk, heads, bias, mask);
}

/// concat_h(gamma_h * probs_h * V_h) * W^O + b^O.
template <typename Scalar>
Matrix<Scalar> MultiHeadCombine(const std::vector<Matrix<Scalar>>& probs,
                                const Matrix<Scalar>& values,
                                const Matrix<Scalar>& head_scale,
                                const Matrix<Scalar>& wo,
                                const Matrix<Scalar>& bo) {
  const int heads = static_cast<int>(probs.size());
  const int dh = static_cast<int>(values.cols()) / heads;
  Matrix<Scalar> scaled(probs.front().rows(), values.cols());
  for (int h = 0; h < heads; ++h) {
    scaled.middleCols(h * dh, dh).noalias() =
        head_scale(0, h) * (probs[h] * values.middleCols(h * dh, dh));
  }
  return detail::Affine(scaled, wo, bo);
}

template <typename Scalar>
Matrix<Scalar> AttentionForward(const AttentionParams<Scalar>& p, int heads,
                                const Matrix<Scalar>& xq,
                                const Matrix<Scalar>& xkv,
                                const Matrix<Scalar>& pos_q,
                                const Matrix<Scalar>& pos_k,
                                const RelativeBias<Scalar>* bias,
                                AttentionMask mask,
                                AttentionCache<Scalar>* cache = nullptr) {
  const int dh = static_cast<int>(p.wq.cols()) / heads;
  const bool positional = p.uq.size() > 0 && pos_q.size() > 0;
  Matrix<Scalar> q = detail::Affine(xq, p.wq, p.bq);
  Matrix<Scalar> k = detail::Affine(xkv, p.wk, p.bk);
  Matrix<Scalar> v = detail::Affine(xkv, p.wv, p.bv);
  Matrix<Scalar> pq, pk;
  if (positional) {
    pq.noalias() = pos_q * p.uq;
    pk.noalias() = pos_k * p.uk;
  }
  std::vector<Matrix<Scalar>> probs =
      detail::ScoresFromProjections(q, k, pq, pk, heads, bias, mask);
  Matrix<Scalar> mixed(xq.rows(), p.wv.cols());
  Matrix<Scalar> scaled(xq.rows(), p.wv.cols());
  for (int h = 0; h < heads; ++h) {
    SoftmaxRowsInPlace(probs[h]);
    mixed.middleCols(h * dh, dh).noalias() =
        probs[h] * v.middleCols(h * dh, dh);
    scaled.middleCols(h * dh, dh) =
        p.head_scale(0, h) * mixed.middleCols(h * dh, dh);
  }
  Matrix<Scalar> y = detail::Affine(scaled, p.wo, p.bo);
  if (cache) {
    cache->xq = xq;
    cache->xkv = xkv;
    if (positional) {
      cache->pos_q = pos_q;
      cache->pos_k = pos_k;
    }
    cache->q = std::move(q);
    cache->k = std::move(k);
    cache->v = std::move(v);
    cache->pq = std::move(pq);
    cache->pk = std::move(pk);
    cache->probs = std::move(probs);
    cache->mixed = std::move(mixed);
    cache->scaled = std::move(scaled);
  }
  return y;
}

template <typename Scalar>
struct AttentionInputGrads {
  Matrix<Scalar> xq, xkv;
  Matrix<Scalar> pos_q, pos_k;  // empty without positional projections
};

template <typename Scalar>
AttentionInputGrads<Scalar> AttentionBackward(
    const Matrix<Scalar>& dy, const AttentionParams<Scalar>& p, int heads,
    const AttentionCache<Scalar>& c, const RelativeBias<Scalar>* bias,
    AttentionParams<Scalar>& grad, RelativeBiasGrad<Scalar> bias_grad) {
  const int dh = static_cast<int>(p.wq.cols()) / heads;
  const Scalar inv = Scalar(1) / std::sqrt(Scalar(dh));
  const bool positional = c.pq.size() > 0;

  grad.wo.noalias() += c.scaled.transpose() * dy;
  grad.bo += dy.colwise().sum();
  Matrix<Scalar> dscaled(dy.rows(), p.wo.rows());
  dscaled.noalias() = dy * p.wo.transpose();

  Matrix<Scalar> dq = Matrix<Scalar>::Zero(c.q.rows(), c.q.cols());
  Matrix<Scalar> dk = Matrix<Scalar>::Zero(c.k.rows(), c.k.cols());
  Matrix<Scalar> dv = Matrix<Scalar>::Zero(c.v.rows(), c.v.cols());
  Matrix<Scalar> dpq, dpk;
  if (positional) {
    dpq = Matrix<Scalar>::Zero(c.pq.rows(), c.pq.cols());
    dpk = Matrix<Scalar>::Zero(c.pk.rows(), c.pk.cols());
  }
  const int text_rows =
      bias && bias->text_table ? static_cast<int>(bias->text_table->rows()) : 0;
  for (int h = 0; h < heads; ++h) {
    const auto cols = Eigen::seqN(h * dh, dh);
    const Matrix<Scalar>& a = c.probs[h];
    const Matrix<Scalar> dmixed = p.head_scale(0, h) * dscaled(Eigen::all, cols);
    grad.head_scale(0, h) +=
        (dscaled(Eigen::all, cols).array() * c.mixed(Eigen::all, cols).array())
            .sum();
    Matrix<Scalar> da(a.rows(), a.cols());
    da.noalias() = dmixed * c.v(Eigen::all, cols).transpose();
    dv(Eigen::all, cols).noalias() += a.transpose() * dmixed;
    const ColumnVector<Scalar> row_dot =
        (da.array() * a.array()).rowwise().sum().matrix();
    Matrix<Scalar> ds = (a.array() * (da.colwise() - row_dot).array()).matrix();
    if (bias) {
      for (Eigen::Index j = 0; j < ds.cols(); ++j) {
        for (Eigen::Index i = 0; i < ds.rows(); ++i) {
          const int k = bias->index(i, j);
          if (k < 0) continue;
          if (k < text_rows) {
            (*bias_grad.text_table)(k, h) += ds(i, j);
          } else {
            (*bias_grad.patch_table)(k - text_rows, h) += ds(i, j);
          }
        }
      }
    }
    ds *= inv;
    dq(Eigen::all, cols).noalias() += ds * c.k(Eigen::all, cols);
    dk(Eigen::all, cols).noalias() += ds.transpose() * c.q(Eigen::all, cols);
    if (positional) {
      dpq(Eigen::all, cols).noalias() += ds * c.pk(Eigen::all, cols);
      dpk(Eigen::all, cols).noalias() += ds.transpose() * c.pq(Eigen::all, cols);
    }
  }

  AttentionInputGrads<Scalar> out;
  grad.wq.noalias() += c.xq.transpose() * dq;
  grad.bq += dq.colwise().sum();
  grad.wk.noalias() += c.xkv.transpose() * dk;
  grad.bk += dk.colwise().sum();
  grad.wv.noalias() += c.xkv.transpose() * dv;
  grad.bv += dv.colwise().sum();
  out.xq.noalias() = dq * p.wq.transpose();
  out.xkv.noalias() = dk * p.wk.transpose();
  out.xkv.noalias() += dv * p.wv.transpose();
  if (positional) {
    grad.uq.noalias() += c.pos_q.transpose() * dpq;
    grad.uk.noalias() += c.pos_k.transpose() * dpk;
    out.pos_q.noalias() = dpq * p.uq.transpose();
    out.pos_k.noalias() = dpk * p.uk.transpose();
  }
  return out;
}

// ---------------------------------------------------------------------------
// Residual branch regularization

/// Dropout and stochastic depth applied to one residual branch.
struct BranchGate {
  bool skip = false;   // stochastic depth dropped the whole branch
  double scale = 1.0;  // eval-time survival scaling
  Eigen::MatrixXd keep_mask;  // inverted-dropout multipliers; empty = none
};

struct ForwardOptions {
  bool training = false;
  double dropout = 0.0;
  double stochastic_depth = 0.0;
  std::mt19937_64* rng = nullptr;

  bool deterministic() const {
    return !training || (dropout == 0.0 && stochastic_depth == 0.0);
  }
};

/// Draws the gate for a branch whose output has the given shape.
inline BranchGate DrawBranchGate(const ForwardOptions& opts, Eigen::Index rows,
                                 Eigen::Index cols) {
  BranchGate gate;
  if (!opts.training) {
    gate.scale = 1.0 - opts.stochastic_depth;
    return gate;
  }
  if (opts.stochastic_depth > 0.0) {
    std::bernoulli_distribution drop(opts.stochastic_depth);
    if (drop(*opts.rng)) {
      gate.skip = true;
      return gate;
    }
  }
  if (opts.dropout > 0.0) {
    std::bernoulli_distribution keep(1.0 - opts.dropout);
    const double inv_keep = 1.0 / (1.0 - opts.dropout);
    gate.keep_mask.resize(rows, cols);
    for (Eigen::Index j = 0; j < cols; ++j) {
      for (Eigen::Index i = 0; i < rows; ++i) {
        gate.keep_mask(i, j) = keep(*opts.rng) ? inv_keep : 0.0;
      }
    }
  }
  return gate;
}

/// Applies the gate to a branch output (forward) or its gradient (backward);
/// the map is linear so both directions share it.
template <typename Scalar>
Matrix<Scalar> ApplyGate(const BranchGate& gate, const Matrix<Scalar>& x) {
  if (gate.skip) return Matrix<Scalar>::Zero(x.rows(), x.cols());
  Matrix<Scalar> y = x;
  if (gate.keep_mask.size() > 0) {
    y.array() *= gate.keep_mask.cast<Scalar>().array();
  }
  if (gate.scale != 1.0) y *= Scalar(gate.scale);
  return y;
}

/// input + branch(input) under stochastic depth: in training the branch is
/// skipped with probability `rate`; in evaluation it always runs and its
/// output is scaled by (1 - rate).
template <typename Scalar, typename Branch>
Matrix<Scalar> ApplyStochasticDepth(Branch&& branch,
                                    const Matrix<Scalar>& input, double rate,
                                    bool training, std::mt19937_64& rng) {
  if (rate < 0.0 || rate >= 1.0) {
    throw ModelError("stochastic depth rate must lie in [0,1)");
  }
  ForwardOptions opts{training, 0.0, rate, &rng};
  const BranchGate gate = DrawBranchGate(opts, input.rows(), input.cols());
  if (gate.skip) return input;
  return input + ApplyGate<Scalar>(gate, branch(input));
}

}  // namespace uniseq

#endif  // UNISEQ_LAYERS_HPP_
