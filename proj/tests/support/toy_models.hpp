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

#ifndef UNISEQ_TESTS_TOY_MODELS_HPP_
#define UNISEQ_TESTS_TOY_MODELS_HPP_

#include <cstdint>
#include <random>
#include <vector>

#include "uniseq/model.hpp"
#include "uniseq/sample.hpp"

namespace uniseq::testing {

/// Tiny shapes for gradient and trace tests. Patches are 2x2 grayscale so a
/// patch row has four values.
inline ModelConfig ToyConfig(int hidden, int heads, int enc_layers, int dec_layers,
                             int vocab = 20) {
  ModelConfig c;
  c.hidden = hidden;
  c.intermediate = 2 * hidden;
  c.heads = heads;
  c.enc_layers = enc_layers;
  c.dec_layers = dec_layers;
  c.vocab_total = vocab;
  c.max_text_positions = 16;
  c.max_patch_grid = 4;
  c.patch_size = 2;
  c.image_channels = 1;
  c.image_size = 8;
  c.text_rel_span = 4;
  c.patch_rel_span = 2;
  c.dropout = 0.0;
  c.stochastic_depth = 0.0;
  c.init_std = 0.5;
  return c;
}

/// Random samples: `patches` patches on the grid (one masked when
/// `mask_one`), short text, short target ending with eos.
inline std::vector<Sample> ToyBatch(const ModelConfig& c, int count, int patches,
                                    bool mask_one, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> pixel(0, 255);
  std::uniform_int_distribution<TokenId> token(4, c.vocab_total - 1);
  std::vector<Sample> batch;
  for (int s = 0; s < count; ++s) {
    Sample sample;
    for (int p = 0; p < patches; ++p) {
      ImagePatch patch;
      patch.row = p / c.max_patch_grid;
      patch.col = p % c.max_patch_grid;
      patch.masked = mask_one && p == 1;
      if (!patch.masked) {
        patch.pixels.resize(static_cast<std::size_t>(c.patch_dim()));
        for (auto& v : patch.pixels) v = static_cast<std::uint8_t>(pixel(rng));
      }
      sample.source_patches.push_back(patch);
    }
    sample.source_text_ids = {kBosId, token(rng), token(rng), kEosId};
    sample.target_ids = {token(rng), token(rng), token(rng), kEosId};
    batch.push_back(sample);
  }
  return batch;
}

}  // namespace uniseq::testing

#endif  // UNISEQ_TESTS_TOY_MODELS_HPP_
