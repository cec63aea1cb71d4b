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

#ifndef UNISEQ_MODEL_CONFIG_HPP_
#define UNISEQ_MODEL_CONFIG_HPP_

#include <stdexcept>
#include <string>

#include <json.hpp>

namespace uniseq {

class ModelError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Longest combined (patches + text) encoder input.
inline constexpr int kMaxSourceLength = 512;

struct ModelConfig {
  int hidden = 256;
  int intermediate = 1024;
  int heads = 4;
  int enc_layers = 4;
  int dec_layers = 4;
  int vocab_total = 59457;
  int max_text_positions = 512;
  // Side of the absolute patch-position grid (256 / 8 for the canvas).
  int max_patch_grid = 32;
  int patch_size = 8;
  int image_channels = 3;
  // Side length images are resized to before patching (non-MIM inputs).
  int image_size = 256;
  // Relative offsets are clipped to [-span, span - 1].
  int text_rel_span = 128;
  int patch_rel_span = 16;
  double dropout = 0.1;
  double stochastic_depth = 0.1;
  double init_std = 0.02;

  /// Small / medium / base shapes: "S", "M", "B".
  static ModelConfig Preset(const std::string& name);

  int head_dim() const { return hidden / heads; }
  int patch_dim() const { return patch_size * patch_size * image_channels; }
  int text_rel_size() const { return 2 * text_rel_span; }
  int patch_rel_size() const { return 4 * patch_rel_span * patch_rel_span; }

  void Validate() const;

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

nlohmann::json ToJson(const ModelConfig& config);
/// Missing keys keep their defaults.
ModelConfig ModelConfigFromJson(const nlohmann::json& j);

}  // namespace uniseq

#endif  // UNISEQ_MODEL_CONFIG_HPP_
