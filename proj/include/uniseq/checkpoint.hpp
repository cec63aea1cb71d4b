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

// Checkpoint container:
//
//   8 bytes   magic "USQCKPT1"
//   8 bytes   little-endian header length H
//   H bytes   JSON {"config": {...}, "tensors": [{name, shape, offset}]}
//   rest      tensors as little-endian float32, row-major, at their offsets
//
// The header is serialized with sorted keys, so save -> load -> save is
// byte-identical.

#ifndef UNISEQ_CHECKPOINT_HPP_
#define UNISEQ_CHECKPOINT_HPP_

#include <filesystem>
#include <string>

#include "uniseq/model.hpp"

namespace uniseq {

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::string SerializeCheckpoint(const ModelParams<float>& params);
ModelParams<float> DeserializeCheckpoint(const std::string& bytes);

void SaveCheckpoint(const std::filesystem::path& path,
                    const ModelParams<float>& params);
ModelParams<float> LoadCheckpoint(const std::filesystem::path& path);

}  // namespace uniseq

#endif  // UNISEQ_CHECKPOINT_HPP_
