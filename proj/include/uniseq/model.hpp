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

// Encoder-decoder transformer over the unified vocabulary.
//
// Each layer runs x -> LN -> attention -> LN -> +x, then
// x -> LN -> linear -> LN -> GELU -> linear -> +x. Absolute positions never
// enter the residual stream: every self-attention layer adds a separate
// position-position score term and a relative bias looked up from tables
// shared by all layers (1D for text offsets, 2D for patch-grid offsets).
// The output projection is tied to the token embedding.

#ifndef UNISEQ_MODEL_HPP_
#define UNISEQ_MODEL_HPP_

#include <algorithm>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "uniseq/image.hpp"
#include "uniseq/layers.hpp"
#include "uniseq/model_config.hpp"
#include "uniseq/vocab.hpp"

namespace uniseq {

enum class ParamKind { kWeight, kBias, kGain };

template <typename Scalar>
struct EncoderLayerParams {
  LayerNormParams<Scalar> attn_pre, attn_post;
  AttentionParams<Scalar> attn;
  LayerNormParams<Scalar> ffn_pre;
  FeedForwardParams<Scalar> ffn;
};

template <typename Scalar>
struct DecoderLayerParams {
  LayerNormParams<Scalar> self_pre, self_post;
  AttentionParams<Scalar> self_attn;
  LayerNormParams<Scalar> cross_pre, cross_post;
  AttentionParams<Scalar> cross_attn;
  LayerNormParams<Scalar> ffn_pre;
  FeedForwardParams<Scalar> ffn;
};

template <typename Scalar>
struct ModelParams {
  ModelConfig config;
  Matrix<Scalar> token_embedding;        // vocab_total x hidden (tied)
  Matrix<Scalar> patch_embedding;        // patch_dim x hidden
  Matrix<Scalar> patch_embedding_bias;   // 1 x hidden
  Matrix<Scalar> encoder_text_positions; // max_text_positions x hidden
  Matrix<Scalar> patch_positions;        // max_patch_grid^2 x hidden
  Matrix<Scalar> decoder_positions;      // max_text_positions x hidden
  Matrix<Scalar> text_relative_bias;     // 2 * text_rel_span x heads
  Matrix<Scalar> patch_relative_bias;    // (2 * patch_rel_span)^2 x heads
  std::vector<EncoderLayerParams<Scalar>> encoder;
  std::vector<DecoderLayerParams<Scalar>> decoder;
  LayerNormParams<Scalar> decoder_final;

  /// Calls fn(name, matrix, kind) for every tensor in a fixed order.
  template <typename Fn>
  void ForEach(Fn&& fn) {
    Visit(*this, fn);
  }
  template <typename Fn>
  void ForEach(Fn&& fn) const {
    Visit(*this, fn);
  }

  std::size_t ParameterCount() const {
    std::size_t n = 0;
    ForEach([&n](const std::string&, const auto& m, ParamKind) {
      n += static_cast<std::size_t>(m.size());
    });
    return n;
  }

  template <typename Other>
  ModelParams<Other> Cast() const;

 private:
  template <typename Self, typename Fn>
  static void Visit(Self& self, Fn& fn);
};

namespace detail {

template <typename Fn, typename Norm>
void VisitNorm(const std::string& prefix, Norm& n, Fn& fn) {
  fn(prefix + ".gain", n.gain, ParamKind::kGain);
  fn(prefix + ".bias", n.bias, ParamKind::kBias);
}

template <typename Fn, typename Attn>
void VisitAttention(const std::string& prefix, Attn& a, Fn& fn) {
  fn(prefix + ".wq", a.wq, ParamKind::kWeight);
  fn(prefix + ".bq", a.bq, ParamKind::kBias);
  fn(prefix + ".wk", a.wk, ParamKind::kWeight);
  fn(prefix + ".bk", a.bk, ParamKind::kBias);
  fn(prefix + ".wv", a.wv, ParamKind::kWeight);
  fn(prefix + ".bv", a.bv, ParamKind::kBias);
  fn(prefix + ".wo", a.wo, ParamKind::kWeight);
  fn(prefix + ".bo", a.bo, ParamKind::kBias);
  if (a.uq.size() > 0) {
    fn(prefix + ".uq", a.uq, ParamKind::kWeight);
    fn(prefix + ".uk", a.uk, ParamKind::kWeight);
  }
  fn(prefix + ".head_scale", a.head_scale, ParamKind::kGain);
}

template <typename Fn, typename Ffn>
void VisitFeedForward(const std::string& prefix, Ffn& f, Fn& fn) {
  fn(prefix + ".w1", f.w1, ParamKind::kWeight);
  fn(prefix + ".b1", f.b1, ParamKind::kBias);
  VisitNorm(prefix + ".inner_norm", f.inner_norm, fn);
  fn(prefix + ".w2", f.w2, ParamKind::kWeight);
  fn(prefix + ".b2", f.b2, ParamKind::kBias);
}

}  // namespace detail

template <typename Scalar>
template <typename Self, typename Fn>
void ModelParams<Scalar>::Visit(Self& self, Fn& fn) {
  fn("token_embedding", self.token_embedding, ParamKind::kWeight);
  fn("patch_embedding", self.patch_embedding, ParamKind::kWeight);
  fn("patch_embedding_bias", self.patch_embedding_bias, ParamKind::kBias);
  fn("encoder_text_positions", self.encoder_text_positions, ParamKind::kWeight);
  fn("patch_positions", self.patch_positions, ParamKind::kWeight);
  fn("decoder_positions", self.decoder_positions, ParamKind::kWeight);
  fn("text_relative_bias", self.text_relative_bias, ParamKind::kWeight);
  fn("patch_relative_bias", self.patch_relative_bias, ParamKind::kWeight);
  for (std::size_t l = 0; l < self.encoder.size(); ++l) {
    const std::string p = "encoder." + std::to_string(l);
    auto& layer = self.encoder[l];
    detail::VisitNorm(p + ".attn_pre", layer.attn_pre, fn);
    detail::VisitAttention(p + ".attn", layer.attn, fn);
    detail::VisitNorm(p + ".attn_post", layer.attn_post, fn);
    detail::VisitNorm(p + ".ffn_pre", layer.ffn_pre, fn);
    detail::VisitFeedForward(p + ".ffn", layer.ffn, fn);
  }
  for (std::size_t l = 0; l < self.decoder.size(); ++l) {
    const std::string p = "decoder." + std::to_string(l);
    auto& layer = self.decoder[l];
    detail::VisitNorm(p + ".self_pre", layer.self_pre, fn);
    detail::VisitAttention(p + ".self_attn", layer.self_attn, fn);
    detail::VisitNorm(p + ".self_post", layer.self_post, fn);
    detail::VisitNorm(p + ".cross_pre", layer.cross_pre, fn);
    detail::VisitAttention(p + ".cross_attn", layer.cross_attn, fn);
    detail::VisitNorm(p + ".cross_post", layer.cross_post, fn);
    detail::VisitNorm(p + ".ffn_pre", layer.ffn_pre, fn);
    detail::VisitFeedForward(p + ".ffn", layer.ffn, fn);
  }
  detail::VisitNorm("decoder_final", self.decoder_final, fn);
}

/// Parameters with every tensor allocated and zero-filled.
template <typename Scalar>
ModelParams<Scalar> ZeroModel(const ModelConfig& config) {
  config.Validate();
  using M = Matrix<Scalar>;
  const int d = config.hidden, h = config.heads, inner = config.intermediate;
  auto norm = [](int width) {
    return LayerNormParams<Scalar>{M::Zero(1, width), M::Zero(1, width)};
  };
  auto attention = [&](bool positional) {
    AttentionParams<Scalar> a;
    a.wq = a.wk = a.wv = a.wo = M::Zero(d, d);
    a.bq = a.bk = a.bv = a.bo = M::Zero(1, d);
    if (positional) a.uq = a.uk = M::Zero(d, d);
    a.head_scale = M::Zero(1, h);
    return a;
  };
  auto ffn = [&] {
    return FeedForwardParams<Scalar>{M::Zero(d, inner), M::Zero(1, inner),
                                     norm(inner), M::Zero(inner, d),
                                     M::Zero(1, d)};
  };
  ModelParams<Scalar> p;
  p.config = config;
  p.token_embedding = M::Zero(config.vocab_total, d);
  p.patch_embedding = M::Zero(config.patch_dim(), d);
  p.patch_embedding_bias = M::Zero(1, d);
  p.encoder_text_positions = M::Zero(config.max_text_positions, d);
  p.patch_positions =
      M::Zero(config.max_patch_grid * config.max_patch_grid, d);
  p.decoder_positions = M::Zero(config.max_text_positions, d);
  p.text_relative_bias = M::Zero(config.text_rel_size(), h);
  p.patch_relative_bias = M::Zero(config.patch_rel_size(), h);
  for (int l = 0; l < config.enc_layers; ++l) {
    p.encoder.push_back(
        {norm(d), norm(d), attention(true), norm(d), ffn()});
  }
  for (int l = 0; l < config.dec_layers; ++l) {
    p.decoder.push_back({norm(d), norm(d), attention(true), norm(d), norm(d),
                         attention(false), norm(d), ffn()});
  }
  p.decoder_final = norm(d);
  return p;
}

template <typename Scalar>
ModelParams<Scalar> ZerosLike(const ModelParams<Scalar>& params) {
  return ZeroModel<Scalar>(params.config);
}

/// Weights ~ N(0, init_std^2) drawn in visitation order from a seeded
/// generator; gains and head scales 1; biases 0.
template <typename Scalar>
ModelParams<Scalar> InitModel(const ModelConfig& config, std::uint64_t seed) {
  ModelParams<Scalar> p = ZeroModel<Scalar>(config);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, config.init_std);
  p.ForEach([&](const std::string&, Matrix<Scalar>& m, ParamKind kind) {
    switch (kind) {
      case ParamKind::kWeight:
        for (Eigen::Index j = 0; j < m.cols(); ++j) {
          for (Eigen::Index i = 0; i < m.rows(); ++i) {
            m(i, j) = static_cast<Scalar>(normal(rng));
          }
        }
        break;
      case ParamKind::kGain:
        m.setOnes();
        break;
      case ParamKind::kBias:
        m.setZero();
        break;
    }
  });
  return p;
}

template <typename Scalar>
template <typename Other>
ModelParams<Other> ModelParams<Scalar>::Cast() const {
  ModelParams<Other> out = ZeroModel<Other>(config);
  std::vector<const Matrix<Scalar>*> mine;
  ForEach([&mine](const std::string&, const Matrix<Scalar>& m, ParamKind) {
    mine.push_back(&m);
  });
  std::size_t i = 0;
  out.ForEach([&](const std::string&, Matrix<Other>& m, ParamKind) {
    m = mine[i++]->template cast<Other>();
  });
  return out;
}

/// Adds `scale * other` into `target` tensor by tensor.
template <typename Scalar>
void AddScaled(ModelParams<Scalar>& target, const ModelParams<Scalar>& other,
               Scalar scale) {
  std::vector<const Matrix<Scalar>*> src;
  other.ForEach([&src](const std::string&, const Matrix<Scalar>& m,
                       ParamKind) { src.push_back(&m); });
  std::size_t i = 0;
  target.ForEach([&](const std::string&, Matrix<Scalar>& m, ParamKind) {
    m += scale * *src[i++];
  });
}

// ---------------------------------------------------------------------------
// Inputs

struct PatchCoord {
  int row = 0;
  int col = 0;
};

/// Encoder input: image patches (raster order) followed by text tokens.
template <typename Scalar>
struct SourceInput {
  std::vector<TokenId> text_ids;
  Matrix<Scalar> patch_features;  // patches x patch_dim; masked rows unused
  std::vector<PatchCoord> patch_coords;
  std::vector<bool> patch_masked;

  int patch_count() const { return static_cast<int>(patch_coords.size()); }
  int length() const {
    return patch_count() + static_cast<int>(text_ids.size());
  }
};

/// Pixels are mapped to [-1, 1]; masked patches keep a zero row and are
/// embedded with the mask token instead.
template <typename Scalar>
SourceInput<Scalar> MakeSourceInput(std::vector<TokenId> text_ids,
                                    std::span<const ImagePatch> patches,
                                    int patch_dim) {
  SourceInput<Scalar> in;
  in.text_ids = std::move(text_ids);
  in.patch_features = Matrix<Scalar>::Zero(
      static_cast<Eigen::Index>(patches.size()), patch_dim);
  for (std::size_t i = 0; i < patches.size(); ++i) {
    const auto& patch = patches[i];
    in.patch_coords.push_back({patch.row, patch.col});
    in.patch_masked.push_back(patch.masked);
    if (patch.masked) continue;
    if (static_cast<int>(patch.pixels.size()) != patch_dim) {
      throw ModelError("patch has " + std::to_string(patch.pixels.size()) +
                       " values, model expects " + std::to_string(patch_dim));
    }
    for (int k = 0; k < patch_dim; ++k) {
      in.patch_features(static_cast<Eigen::Index>(i), k) =
          Scalar(patch.pixels[k]) / Scalar(127.5) - Scalar(1);
    }
  }
  return in;
}

// ---------------------------------------------------------------------------
// Traces

template <typename Scalar>
struct EncoderLayerCache {
  LayerNormCache<Scalar> attn_pre, attn_post, ffn_pre;
  AttentionCache<Scalar> attn;
  FeedForwardCache<Scalar> ffn;
  BranchGate attn_gate, ffn_gate;
};

template <typename Scalar>
struct DecoderLayerCache {
  LayerNormCache<Scalar> self_pre, self_post, cross_pre, cross_post, ffn_pre;
  AttentionCache<Scalar> self_attn, cross_attn;
  FeedForwardCache<Scalar> ffn;
  BranchGate self_gate, cross_gate, ffn_gate;
};

template <typename Scalar>
struct EncoderTrace {
  SourceInput<Scalar> input;
  Matrix<Scalar> positions;
  Eigen::MatrixXi bias_index;
  std::vector<EncoderLayerCache<Scalar>> layers;
};

template <typename Scalar>
struct DecoderTrace {
  std::vector<TokenId> prefix;
  Eigen::MatrixXi bias_index;
  std::vector<DecoderLayerCache<Scalar>> layers;
  LayerNormCache<Scalar> final_norm;
  Matrix<Scalar> hidden;  // final-LN output
};

namespace detail {

inline int ClipOffset(int offset, int span) {
  return std::clamp(offset, -span, span - 1) + span;
}

inline Eigen::MatrixXi EncoderBiasIndex(const ModelConfig& c,
                                        std::span<const PatchCoord> coords,
                                        int text_len) {
  const int patches = static_cast<int>(coords.size());
  const int n = patches + text_len;
  const int text_rows = c.text_rel_size();
  const int axis = 2 * c.patch_rel_span;
  Eigen::MatrixXi index = Eigen::MatrixXi::Constant(n, n, -1);
  for (int i = 0; i < patches; ++i) {
    for (int j = 0; j < patches; ++j) {
      const int dr = ClipOffset(coords[j].row - coords[i].row, c.patch_rel_span);
      const int dc = ClipOffset(coords[j].col - coords[i].col, c.patch_rel_span);
      index(i, j) = text_rows + dr * axis + dc;
    }
  }
  for (int i = 0; i < text_len; ++i) {
    for (int j = 0; j < text_len; ++j) {
      index(patches + i, patches + j) = ClipOffset(j - i, c.text_rel_span);
    }
  }
  return index;
}

inline Eigen::MatrixXi TextBiasIndex(const ModelConfig& c, int len) {
  Eigen::MatrixXi index(len, len);
  for (int i = 0; i < len; ++i) {
    for (int j = 0; j < len; ++j) index(i, j) = ClipOffset(j - i, c.text_rel_span);
  }
  return index;
}

template <typename Scalar>
void CheckTokens(const ModelConfig& c, std::span<const TokenId> ids) {
  for (TokenId id : ids) {
    if (id < 0 || id >= c.vocab_total) {
      throw ModelError("token id " + std::to_string(id) +
                       " outside the model vocabulary");
    }
  }
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Encoder

template <typename Scalar>
Matrix<Scalar> EncoderForward(const ModelParams<Scalar>& params,
                              const SourceInput<Scalar>& input,
                              const ForwardOptions& opts,
                              EncoderTrace<Scalar>* trace = nullptr) {
  const ModelConfig& c = params.config;
  const int patches = input.patch_count();
  const int text_len = static_cast<int>(input.text_ids.size());
  const int n = patches + text_len;
  if (n > kMaxSourceLength) {
    throw ModelError("source length " + std::to_string(n) + " exceeds " +
                     std::to_string(kMaxSourceLength));
  }
  if (n == 0) throw ModelError("empty source");
  if (text_len > c.max_text_positions) {
    throw ModelError("source text longer than the position table");
  }
  detail::CheckTokens<Scalar>(c, input.text_ids);

  const int d = c.hidden;
  Matrix<Scalar> x(n, d);
  Matrix<Scalar> positions(n, d);
  if (patches > 0) {
    if (input.patch_features.cols() != c.patch_dim()) {
      throw ModelError("patch feature width does not match the model");
    }
    x.topRows(patches).noalias() = input.patch_features * params.patch_embedding;
    x.topRows(patches).rowwise() += params.patch_embedding_bias.row(0);
  }
  for (int i = 0; i < patches; ++i) {
    const auto [row, col] = input.patch_coords[i];
    if (row < 0 || col < 0 || row >= c.max_patch_grid ||
        col >= c.max_patch_grid) {
      throw ModelError("patch coordinate outside the position grid");
    }
    if (input.patch_masked[i]) x.row(i) = params.token_embedding.row(kMaskId);
    positions.row(i) = params.patch_positions.row(row * c.max_patch_grid + col);
  }
  for (int k = 0; k < text_len; ++k) {
    x.row(patches + k) = params.token_embedding.row(input.text_ids[k]);
    positions.row(patches + k) = params.encoder_text_positions.row(k);
  }

  RelativeBias<Scalar> bias{&params.text_relative_bias,
                            &params.patch_relative_bias,
                            detail::EncoderBiasIndex(c, input.patch_coords,
                                                     text_len)};
  std::vector<EncoderLayerCache<Scalar>> caches(params.encoder.size());
  for (std::size_t l = 0; l < params.encoder.size(); ++l) {
    const auto& layer = params.encoder[l];
    auto& cache = caches[l];
    cache.attn_gate = DrawBranchGate(opts, n, d);
    if (!cache.attn_gate.skip) {
      const Matrix<Scalar> a = LayerNormForward(x, layer.attn_pre, &cache.attn_pre);
      const Matrix<Scalar> s =
          AttentionForward(layer.attn, c.heads, a, a, positions, positions,
                           &bias, AttentionMask{}, &cache.attn);
      x += ApplyGate<Scalar>(cache.attn_gate,
                             LayerNormForward(s, layer.attn_post, &cache.attn_post));
    }
    cache.ffn_gate = DrawBranchGate(opts, n, d);
    if (!cache.ffn_gate.skip) {
      const Matrix<Scalar> b = LayerNormForward(x, layer.ffn_pre, &cache.ffn_pre);
      x += ApplyGate<Scalar>(cache.ffn_gate,
                             FeedForwardForward(b, layer.ffn, &cache.ffn));
    }
  }
  if (trace) {
    trace->input = input;
    trace->positions = std::move(positions);
    trace->bias_index = std::move(bias.index);
    trace->layers = std::move(caches);
  }
  return x;
}

template <typename Scalar>
void EncoderBackward(const ModelParams<Scalar>& params,
                     const EncoderTrace<Scalar>& trace,
                     const Matrix<Scalar>& d_output, ModelParams<Scalar>& grads) {
  const ModelConfig& c = params.config;
  const RelativeBias<Scalar> bias{&params.text_relative_bias,
                                  &params.patch_relative_bias, trace.bias_index};
  const RelativeBiasGrad<Scalar> bias_grad{&grads.text_relative_bias,
                                           &grads.patch_relative_bias};
  Matrix<Scalar> dx = d_output;
  Matrix<Scalar> dpos = Matrix<Scalar>::Zero(dx.rows(), dx.cols());
  for (std::size_t l = params.encoder.size(); l-- > 0;) {
    const auto& layer = params.encoder[l];
    auto& g = grads.encoder[l];
    const auto& cache = trace.layers[l];
    if (!cache.ffn_gate.skip) {
      const Matrix<Scalar> dbranch = ApplyGate<Scalar>(cache.ffn_gate, dx);
      const Matrix<Scalar> db =
          FeedForwardBackward(dbranch, layer.ffn, cache.ffn, g.ffn);
      dx += LayerNormBackward(db, layer.ffn_pre, cache.ffn_pre, g.ffn_pre);
    }
    if (!cache.attn_gate.skip) {
      const Matrix<Scalar> dbranch = ApplyGate<Scalar>(cache.attn_gate, dx);
      const Matrix<Scalar> ds =
          LayerNormBackward(dbranch, layer.attn_post, cache.attn_post, g.attn_post);
      const auto ag = AttentionBackward(ds, layer.attn, c.heads, cache.attn,
                                        &bias, g.attn, bias_grad);
      const Matrix<Scalar> da = ag.xq + ag.xkv;
      dx += LayerNormBackward(da, layer.attn_pre, cache.attn_pre, g.attn_pre);
      if (ag.pos_q.size() > 0) dpos += ag.pos_q + ag.pos_k;
    }
  }

  const auto& in = trace.input;
  const int patches = in.patch_count();
  for (int i = 0; i < patches; ++i) {
    const auto [row, col] = in.patch_coords[i];
    grads.patch_positions.row(row * c.max_patch_grid + col) += dpos.row(i);
    if (in.patch_masked[i]) {
      grads.token_embedding.row(kMaskId) += dx.row(i);
    }
  }
  if (patches > 0) {
    // Masked rows of patch_features are zero, so their rows contribute
    // nothing to the weight gradient; the bias must skip them explicitly.
    grads.patch_embedding.noalias() +=
        in.patch_features.transpose() * dx.topRows(patches);
    for (int i = 0; i < patches; ++i) {
      if (!in.patch_masked[i]) grads.patch_embedding_bias += dx.row(i);
    }
  }
  for (std::size_t k = 0; k < in.text_ids.size(); ++k) {
    const Eigen::Index r = patches + static_cast<Eigen::Index>(k);
    grads.token_embedding.row(in.text_ids[k]) += dx.row(r);
    grads.encoder_text_positions.row(static_cast<Eigen::Index>(k)) += dpos.row(r);
  }
}

// ---------------------------------------------------------------------------
// Decoder

/// Final-LN hidden states for a decoder prefix (which starts with bos).
template <typename Scalar>
Matrix<Scalar> DecoderHidden(const ModelParams<Scalar>& params,
                             const Matrix<Scalar>& memory,
                             std::span<const TokenId> prefix,
                             const ForwardOptions& opts,
                             DecoderTrace<Scalar>* trace = nullptr) {
  const ModelConfig& c = params.config;
  const int t = static_cast<int>(prefix.size());
  if (t == 0) throw ModelError("empty decoder prefix");
  if (t > c.max_text_positions) {
    throw ModelError("decoder prefix longer than the position table");
  }
  detail::CheckTokens<Scalar>(c, prefix);
  const int d = c.hidden;
  Matrix<Scalar> y(t, d);
  for (int i = 0; i < t; ++i) y.row(i) = params.token_embedding.row(prefix[i]);
  const Matrix<Scalar> positions = params.decoder_positions.topRows(t);
  RelativeBias<Scalar> bias{&params.text_relative_bias,
                            &params.patch_relative_bias,
                            detail::TextBiasIndex(c, t)};
  const Matrix<Scalar> none;
  std::vector<DecoderLayerCache<Scalar>> caches(params.decoder.size());
  for (std::size_t l = 0; l < params.decoder.size(); ++l) {
    const auto& layer = params.decoder[l];
    auto& cache = caches[l];
    cache.self_gate = DrawBranchGate(opts, t, d);
    if (!cache.self_gate.skip) {
      const Matrix<Scalar> a = LayerNormForward(y, layer.self_pre, &cache.self_pre);
      const Matrix<Scalar> s =
          AttentionForward(layer.self_attn, c.heads, a, a, positions, positions,
                           &bias, AttentionMask{true}, &cache.self_attn);
      y += ApplyGate<Scalar>(cache.self_gate,
                             LayerNormForward(s, layer.self_post, &cache.self_post));
    }
    cache.cross_gate = DrawBranchGate(opts, t, d);
    if (!cache.cross_gate.skip) {
      const Matrix<Scalar> a =
          LayerNormForward(y, layer.cross_pre, &cache.cross_pre);
      const Matrix<Scalar> s =
          AttentionForward<Scalar>(layer.cross_attn, c.heads, a, memory, none,
                                   none, nullptr, AttentionMask{},
                                   &cache.cross_attn);
      y += ApplyGate<Scalar>(
          cache.cross_gate, LayerNormForward(s, layer.cross_post, &cache.cross_post));
    }
    cache.ffn_gate = DrawBranchGate(opts, t, d);
    if (!cache.ffn_gate.skip) {
      const Matrix<Scalar> b = LayerNormForward(y, layer.ffn_pre, &cache.ffn_pre);
      y += ApplyGate<Scalar>(cache.ffn_gate,
                             FeedForwardForward(b, layer.ffn, &cache.ffn));
    }
  }
  LayerNormCache<Scalar> final_cache;
  Matrix<Scalar> hidden =
      LayerNormForward(y, params.decoder_final, trace ? &final_cache : nullptr);
  if (trace) {
    trace->prefix.assign(prefix.begin(), prefix.end());
    trace->bias_index = std::move(bias.index);
    trace->layers = std::move(caches);
    trace->final_norm = std::move(final_cache);
    trace->hidden = hidden;
  }
  return hidden;
}

/// Logits over the unified vocabulary, one row per prefix position.
template <typename Scalar>
Matrix<Scalar> DecoderForward(const ModelParams<Scalar>& params,
                              const Matrix<Scalar>& memory,
                              std::span<const TokenId> prefix,
                              const ForwardOptions& opts,
                              DecoderTrace<Scalar>* trace = nullptr) {
  const Matrix<Scalar> hidden = DecoderHidden(params, memory, prefix, opts, trace);
  Matrix<Scalar> logits(hidden.rows(), params.token_embedding.rows());
  logits.noalias() = hidden * params.token_embedding.transpose();
  return logits;
}

/// Logits for the last prefix position only.
template <typename Scalar>
ColumnVector<Scalar> DecoderNextLogits(const ModelParams<Scalar>& params,
                                       const Matrix<Scalar>& memory,
                                       std::span<const TokenId> prefix,
                                       const ForwardOptions& opts) {
  const Matrix<Scalar> hidden = DecoderHidden(params, memory, prefix, opts);
  return params.token_embedding * hidden.row(hidden.rows() - 1).transpose();
}

/// Backpropagates logit gradients; returns the gradient w.r.t. `memory`.
template <typename Scalar>
Matrix<Scalar> DecoderBackward(const ModelParams<Scalar>& params,
                               const DecoderTrace<Scalar>& trace,
                               const Matrix<Scalar>& d_logits,
                               Eigen::Index memory_rows,
                               ModelParams<Scalar>& grads) {
  const ModelConfig& c = params.config;
  grads.token_embedding.noalias() += d_logits.transpose() * trace.hidden;
  Matrix<Scalar> dhidden(d_logits.rows(), c.hidden);
  dhidden.noalias() = d_logits * params.token_embedding;
  Matrix<Scalar> dy = LayerNormBackward(dhidden, params.decoder_final,
                                        trace.final_norm, grads.decoder_final);

  const RelativeBias<Scalar> bias{&params.text_relative_bias,
                                  &params.patch_relative_bias, trace.bias_index};
  const RelativeBiasGrad<Scalar> bias_grad{&grads.text_relative_bias,
                                           &grads.patch_relative_bias};
  Matrix<Scalar> dmemory = Matrix<Scalar>::Zero(memory_rows, c.hidden);
  Matrix<Scalar> dpos = Matrix<Scalar>::Zero(dy.rows(), dy.cols());
  for (std::size_t l = params.decoder.size(); l-- > 0;) {
    const auto& layer = params.decoder[l];
    auto& g = grads.decoder[l];
    const auto& cache = trace.layers[l];
    if (!cache.ffn_gate.skip) {
      const Matrix<Scalar> dbranch = ApplyGate<Scalar>(cache.ffn_gate, dy);
      const Matrix<Scalar> db =
          FeedForwardBackward(dbranch, layer.ffn, cache.ffn, g.ffn);
      dy += LayerNormBackward(db, layer.ffn_pre, cache.ffn_pre, g.ffn_pre);
    }
    if (!cache.cross_gate.skip) {
      const Matrix<Scalar> dbranch = ApplyGate<Scalar>(cache.cross_gate, dy);
      const Matrix<Scalar> ds = LayerNormBackward(dbranch, layer.cross_post,
                                                  cache.cross_post, g.cross_post);
      const auto ag = AttentionBackward<Scalar>(ds, layer.cross_attn, c.heads,
                                                cache.cross_attn, nullptr,
                                                g.cross_attn, {});
      dmemory += ag.xkv;
      dy += LayerNormBackward(ag.xq, layer.cross_pre, cache.cross_pre, g.cross_pre);
    }
    if (!cache.self_gate.skip) {
      const Matrix<Scalar> dbranch = ApplyGate<Scalar>(cache.self_gate, dy);
      const Matrix<Scalar> ds = LayerNormBackward(dbranch, layer.self_post,
                                                  cache.self_post, g.self_post);
      const auto ag = AttentionBackward(ds, layer.self_attn, c.heads,
                                        cache.self_attn, &bias, g.self_attn,
                                        bias_grad);
      const Matrix<Scalar> da = ag.xq + ag.xkv;
      dy += LayerNormBackward(da, layer.self_pre, cache.self_pre, g.self_pre);
      if (ag.pos_q.size() > 0) dpos += ag.pos_q + ag.pos_k;
    }
  }
  for (std::size_t i = 0; i < trace.prefix.size(); ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    grads.token_embedding.row(trace.prefix[i]) += dy.row(r);
  }
  grads.decoder_positions.topRows(dpos.rows()) += dpos;
  return dmemory;
}

}  // namespace uniseq

#endif  // UNISEQ_MODEL_HPP_
