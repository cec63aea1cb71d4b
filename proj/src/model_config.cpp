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

#include "uniseq/model_config.hpp"

namespace uniseq {

ModelConfig ModelConfig::Preset(const std::string& name) {
  ModelConfig c;
  if (name == "S") {
    c.hidden = 256, c.intermediate = 1024, c.heads = 4;
    c.enc_layers = 4, c.dec_layers = 4;
  } else if (name == "M") {
    c.hidden = 512, c.intermediate = 2048, c.heads = 8;
    c.enc_layers = 4, c.dec_layers = 4;
  } else if (name == "B") {
    c.hidden = 768, c.intermediate = 3072, c.heads = 12;
    c.enc_layers = 6, c.dec_layers = 6;
  } else {
    throw ModelError("unknown model preset '" + name + "' (expected S, M or B)");
  }
  return c;
}

void ModelConfig::Validate() const {
  if (hidden <= 0 || heads <= 0 || intermediate <= 0) {
    throw ModelError("model widths must be positive");
  }
  if (hidden % heads != 0) {
    throw ModelError("hidden size " + std::to_string(hidden) +
                     " is not divisible by " + std::to_string(heads) +
                     " heads");
  }
  if (enc_layers < 0 || dec_layers < 0) {
    throw ModelError("layer counts must be nonnegative");
  }
  if (vocab_total <= 0 || max_text_positions <= 0 || max_patch_grid <= 0 ||
      patch_size <= 0 || text_rel_span <= 0 || patch_rel_span <= 0) {
    throw ModelError("table sizes must be positive");
  }
  if (image_channels != 1 && image_channels != 3) {
    throw ModelError("image_channels must be 1 or 3");
  }
  if (image_size % patch_size != 0 || image_size / patch_size > max_patch_grid) {
    throw ModelError("image_size must be a multiple of patch_size within the "
                     "patch grid");
  }
  if (dropout < 0 || dropout >= 1 || stochastic_depth < 0 ||
      stochastic_depth >= 1) {
    throw ModelError("dropout and stochastic depth rates must lie in [0,1)");
  }
}

nlohmann::json ToJson(const ModelConfig& c) {
  return {{"hidden", c.hidden},
          {"intermediate", c.intermediate},
          {"heads", c.heads},
          {"enc_layers", c.enc_layers},
          {"dec_layers", c.dec_layers},
          {"vocab_total", c.vocab_total},
          {"max_text_positions", c.max_text_positions},
          {"max_patch_grid", c.max_patch_grid},
          {"patch_size", c.patch_size},
          {"image_channels", c.image_channels},
          {"image_size", c.image_size},
          {"text_rel_span", c.text_rel_span},
          {"patch_rel_span", c.patch_rel_span},
          {"dropout", c.dropout},
          {"stochastic_depth", c.stochastic_depth},
          {"init_std", c.init_std}};
}

ModelConfig ModelConfigFromJson(const nlohmann::json& j) {
  ModelConfig c;
  if (j.contains("preset")) c = ModelConfig::Preset(j.at("preset"));
  auto read = [&j](const char* key, auto& field) {
    if (j.contains(key)) j.at(key).get_to(field);
  };
  read("hidden", c.hidden);
  read("intermediate", c.intermediate);
  read("heads", c.heads);
  read("enc_layers", c.enc_layers);
  read("dec_layers", c.dec_layers);
  read("vocab_total", c.vocab_total);
  read("max_text_positions", c.max_text_positions);
  read("max_patch_grid", c.max_patch_grid);
  read("patch_size", c.patch_size);
  read("image_channels", c.image_channels);
  read("image_size", c.image_size);
  read("text_rel_span", c.text_rel_span);
  read("patch_rel_span", c.patch_rel_span);
  read("dropout", c.dropout);
  read("stochastic_depth", c.stochastic_depth);
  read("init_std", c.init_std);
  return c;
}

}  // namespace uniseq
