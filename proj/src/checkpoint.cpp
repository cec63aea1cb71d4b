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

#include "uniseq/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>

namespace uniseq {
namespace {

constexpr char kMagic[8] = {'U', 'S', 'Q', 'C', 'K', 'P', 'T', '1'};

void PutU64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out += static_cast<char>((v >> (8 * i)) & 0xff);
}

std::uint64_t GetU64(const std::string& in, std::size_t at) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) {
    v |= static_cast<std::uint64_t>(static_cast<unsigned char>(in[at + i])) << (8 * i);
  }
  return v;
}

void PutFloat(std::string& out, float f) {
  const auto bits = std::bit_cast<std::uint32_t>(f);
  for (int i = 0; i < 4; ++i) out += static_cast<char>((bits >> (8 * i)) & 0xff);
}

float GetFloat(const std::string& in, std::size_t at) {
  std::uint32_t bits = 0;
  for (int i = 0; i < 4; ++i) {
    bits |= static_cast<std::uint32_t>(static_cast<unsigned char>(in[at + i])) << (8 * i);
  }
  return std::bit_cast<float>(bits);
}

}  // namespace

std::string SerializeCheckpoint(const ModelParams<float>& params) {
  nlohmann::json tensors = nlohmann::json::array();
  std::string data;
  params.ForEach([&](const std::string& name, const Matrix<float>& m, ParamKind) {
    tensors.push_back({{"name", name},
                       {"shape", {m.rows(), m.cols()}},
                       {"offset", data.size()}});
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
      for (Eigen::Index c = 0; c < m.cols(); ++c) PutFloat(data, m(r, c));
    }
  });
  const nlohmann::json header = {{"config", ToJson(params.config)},
                                 {"tensors", std::move(tensors)}};
  const std::string text = header.dump();
  std::string out(kMagic, sizeof(kMagic));
  PutU64(out, text.size());
  out += text;
  out += data;
  return out;
}

ModelParams<float> DeserializeCheckpoint(const std::string& bytes) {
  if (bytes.size() < 16 || std::memcmp(bytes.data(), kMagic, 8) != 0) {
    throw CheckpointError("not a checkpoint (bad magic)");
  }
  const std::uint64_t header_size = GetU64(bytes, 8);
  if (header_size > bytes.size() - 16) throw CheckpointError("truncated checkpoint header");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(bytes.substr(16, header_size));
  } catch (const nlohmann::json::exception& e) {
    throw CheckpointError(std::string("malformed checkpoint header: ") + e.what());
  }
  const std::size_t data_start = 16 + header_size;
  const std::size_t data_size = bytes.size() - data_start;

  ModelParams<float> params = ZeroModel<float>(ModelConfigFromJson(header.at("config")));
  const auto& index = header.at("tensors");
  std::size_t i = 0;
  params.ForEach([&](const std::string& name, Matrix<float>& m, ParamKind) {
    if (i >= index.size()) throw CheckpointError("checkpoint lacks tensor " + name);
    const auto& entry = index[i++];
    if (entry.at("name").get<std::string>() != name) {
      throw CheckpointError("tensor order mismatch at " + name);
    }
    const auto rows = entry.at("shape")[0].get<Eigen::Index>();
    const auto cols = entry.at("shape")[1].get<Eigen::Index>();
    if (rows != m.rows() || cols != m.cols()) {
      throw CheckpointError("shape mismatch for " + name);
    }
    const auto offset = entry.at("offset").get<std::size_t>();
    if (offset + 4 * static_cast<std::size_t>(m.size()) > data_size) {
      throw CheckpointError("tensor " + name + " runs past the end of the file");
    }
    std::size_t at = data_start + offset;
    for (Eigen::Index r = 0; r < rows; ++r) {
      for (Eigen::Index c = 0; c < cols; ++c, at += 4) m(r, c) = GetFloat(bytes, at);
    }
  });
  if (i != index.size()) throw CheckpointError("checkpoint holds unexpected tensors");
  return params;
}

void SaveCheckpoint(const std::filesystem::path& path, const ModelParams<float>& params) {
  const std::string bytes = SerializeCheckpoint(params);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw CheckpointError("cannot write checkpoint " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw CheckpointError("failed writing checkpoint " + path.string());
}

ModelParams<float> LoadCheckpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot read checkpoint " + path.string());
  const std::string bytes((std::istreambuf_iterator<char>(in)),
                          std::istreambuf_iterator<char>());
  return DeserializeCheckpoint(bytes);
}

}  // namespace uniseq
