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

#include "uniseq/corpus.hpp"

#include <fstream>

namespace uniseq {
namespace {

using nlohmann::json;

void Require(const std::optional<std::string>& field, const char* name,
             const std::string& task) {
  if (!field) {
    throw CorpusError("task '" + task + "' requires field '" + name + "'");
  }
}

template <typename T>
void ReadOptional(const json& j, const char* key, std::optional<T>& field) {
  if (j.contains(key) && !j.at(key).is_null()) field = j.at(key).get<T>();
}

}  // namespace

void CorpusRecord::Validate() const {
  const auto kind = ParseTaskName(task);
  if (!kind) {
    throw CorpusError("unknown task '" + task + "' (valid: " +
                      ValidTaskNames() + ")");
  }
  switch (*kind) {
    case TaskKind::kMim:
      Require(image, "image", task);
      break;
    case TaskKind::kMlm:
      Require(text, "text", task);
      if (text->empty()) throw CorpusError("mlm text must be nonempty");
      break;
    case TaskKind::kDetection:
      Require(image, "image", task);
      if (!objects) {
        throw CorpusError("task 'detection' requires field 'objects'");
      }
      for (const auto& object : *objects) {
        try {
          object.box.Validate();
        } catch (const VocabError& e) {
          throw CorpusError(std::string("invalid detection box: ") + e.what());
        }
        if (object.label.empty()) throw CorpusError("empty detection label");
      }
      break;
    case TaskKind::kCaption:
      Require(image, "image", task);
      Require(text, "text", task);
      break;
    case TaskKind::kVqa:
      Require(image, "image", task);
      Require(question, "question", task);
      Require(answer, "answer", task);
      break;
    case TaskKind::kClassification:
      Require(image, "image", task);
      Require(label, "label", task);
      break;
    case TaskKind::kSummarization:
      Require(text, "text", task);
      Require(summary, "summary", task);
      break;
    case TaskKind::kNli:
      Require(premise, "premise", task);
      Require(hypothesis, "hypothesis", task);
      Require(nli_label, "nli_label", task);
      break;
  }
  if (image) {
    try {
      DecodeImage();
    } catch (const ImageError& e) {
      throw CorpusError(std::string("image does not decode: ") + e.what());
    }
  }
}

ImageRaster CorpusRecord::DecodeImage() const {
  if (!image) throw CorpusError("record has no image");
  const auto bytes = Base64Decode(*image);
  return DecodePng(bytes);
}

std::string CorpusRecord::Reference() const {
  const auto kind = ParseTaskName(task);
  if (!kind) throw CorpusError("unknown task '" + task + "'");
  switch (*kind) {
    case TaskKind::kCaption:
    case TaskKind::kMlm:
      return text.value_or("");
    case TaskKind::kClassification:
      return label.value_or("");
    case TaskKind::kVqa:
      return answer.value_or("");
    case TaskKind::kSummarization:
      return summary.value_or("");
    case TaskKind::kNli:
      return nli_label.value_or("");
    case TaskKind::kMim:
    case TaskKind::kDetection:
      break;
  }
  return "";
}

nlohmann::json ToJson(const CorpusRecord& r) {
  json j;
  j["task"] = r.task;
  auto put = [&j](const char* key, const std::optional<std::string>& v) {
    if (v) j[key] = *v;
  };
  put("text", r.text);
  put("image", r.image);
  put("question", r.question);
  put("answer", r.answer);
  put("label", r.label);
  if (r.objects) {
    json objects = json::array();
    for (const auto& o : *r.objects) {
      objects.push_back({{"box", {o.box.x1, o.box.y1, o.box.x2, o.box.y2}},
                         {"label", o.label}});
    }
    j["objects"] = std::move(objects);
  }
  put("summary", r.summary);
  put("premise", r.premise);
  put("hypothesis", r.hypothesis);
  put("nli_label", r.nli_label);
  return j;
}

CorpusRecord CorpusRecordFromJson(const nlohmann::json& j) {
  if (!j.is_object()) throw CorpusError("record is not a JSON object");
  if (!j.contains("task") || !j.at("task").is_string()) {
    throw CorpusError("record lacks a string 'task' field");
  }
  CorpusRecord r;
  try {
    r.task = j.at("task").get<std::string>();
    ReadOptional(j, "text", r.text);
    ReadOptional(j, "image", r.image);
    ReadOptional(j, "question", r.question);
    ReadOptional(j, "answer", r.answer);
    ReadOptional(j, "label", r.label);
    ReadOptional(j, "summary", r.summary);
    ReadOptional(j, "premise", r.premise);
    ReadOptional(j, "hypothesis", r.hypothesis);
    ReadOptional(j, "nli_label", r.nli_label);
    if (j.contains("objects")) {
      std::vector<DetectionObject> objects;
      for (const auto& o : j.at("objects")) {
        const auto& box = o.at("box");
        if (!box.is_array() || box.size() != 4) {
          throw CorpusError("object box must hold 4 numbers");
        }
        objects.push_back({{box[0].get<double>(), box[1].get<double>(),
                            box[2].get<double>(), box[3].get<double>()},
                           o.at("label").get<std::string>()});
      }
      r.objects = std::move(objects);
    }
  } catch (const json::exception& e) {
    throw CorpusError(std::string("malformed record: ") + e.what());
  }
  return r;
}

std::vector<CorpusRecord> ReadCorpus(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw CorpusError("cannot read corpus " + path.string());
  std::vector<CorpusRecord> records;
  std::string line;
  long index = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    try {
      CorpusRecord r = CorpusRecordFromJson(json::parse(line));
      r.Validate();
      records.push_back(std::move(r));
    } catch (const json::exception& e) {
      throw CorpusError("record " + std::to_string(index) + ": " + e.what(),
                        index);
    } catch (const CorpusError& e) {
      throw CorpusError("record " + std::to_string(index) + ": " + e.what(),
                        index);
    }
    ++index;
  }
  return records;
}

void WriteCorpus(const std::filesystem::path& path,
                 const std::vector<CorpusRecord>& records) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw CorpusError("cannot write corpus " + path.string());
  for (const auto& r : records) out << ToJson(r).dump() << '\n';
  if (!out) throw CorpusError("failed writing corpus " + path.string());
}

}  // namespace uniseq
