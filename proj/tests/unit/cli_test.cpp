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

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "uniseq/commands.hpp"
#include "uniseq/corpus.hpp"

namespace uniseq {
namespace {

namespace fs = std::filesystem;

struct CliResult {
  int code = 0;
  std::string out, err;
};

CliResult Run(std::vector<std::string> args) {
  args.insert(args.begin(), "uniseq");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  CliResult r;
  r.code = RunCli(static_cast<int>(argv.size()), argv.data(), out, err);
  r.out = out.str();
  r.err = err.str();
  return r;
}

std::string Slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

/// Scratch directory holding a small corpus, a vocabulary and a tiny config.
class Workspace {
 public:
  Workspace() : dir_(fs::temp_directory_path() / "uniseq_cli_test") {
    fs::remove_all(dir_);
    fs::create_directories(dir_);
    REQUIRE(Run({"gen-synthetic", "--out", P("corpus.jsonl"), "--n", "24", "--seed", "3",
                 "--image-size", "32"})
                .code == kExitOk);
    REQUIRE(Run({"train-vocab", "--corpus", P("corpus.jsonl"), "--out", P("vocab.txt"),
                 "--text-size", "400", "--location-bins", "50", "--visual-size", "64"})
                .code == kExitOk);
    std::ofstream(dir_ / "tiny.json")
        << R"({"model": {"hidden": 16, "intermediate": 32, "heads": 2, "enc_layers": 1,
                 "dec_layers": 1, "image_size": 32, "text_rel_span": 16,
                 "patch_rel_span": 4},
               "seed": 11, "total_steps": 3, "batch_size": 12,
               "decode": {"beam_size": 2, "max_length": 6}})";
  }
  ~Workspace() { fs::remove_all(dir_); }

  std::string P(const std::string& name) const { return (dir_ / name).string(); }

  CliResult Pretrain(const std::string& tag) const {
    return Run({"pretrain", "--config", P("tiny.json"), "--corpus", P("corpus.jsonl"),
                "--vocab", P("vocab.txt"), "--out", P(tag + ".ckpt"), "--log",
                P(tag + ".log"), "--omit-timing"});
  }

 private:
  fs::path dir_;
};

TEST_CASE("usage problems exit with code 1") {
  CHECK(Run({}).code == kExitUsage);
  CHECK(Run({"paint"}).code == kExitUsage);
  CHECK(Run({"gen-synthetic", "--n", "3"}).code == kExitUsage);
  CHECK(Run({"gen-synthetic", "--out", "x", "--n", "-1", "--seed", "1"}).code == kExitUsage);
}

TEST_CASE("missing or malformed data exits with code 2") {
  const fs::path bad = fs::temp_directory_path() / "uniseq_cli_bad.jsonl";
  std::ofstream(bad) << "{not json\n";
  const auto r = Run({"train-vocab", "--corpus", bad.string(), "--out",
                      (fs::temp_directory_path() / "uniseq_cli_v.txt").string()});
  CHECK(r.code == kExitData);
  CHECK_FALSE(r.err.empty());
  fs::remove(bad);
  CHECK(Run({"train-vocab", "--corpus", "/nonexistent/c.jsonl", "--out", "/tmp/v"}).code ==
        kExitData);
}

TEST_CASE("gen-synthetic is deterministic in its seed") {
  Workspace ws;
  REQUIRE(Run({"gen-synthetic", "--out", ws.P("again.jsonl"), "--n", "24", "--seed", "3",
               "--image-size", "32"})
              .code == kExitOk);
  CHECK(Slurp(ws.P("again.jsonl")) == Slurp(ws.P("corpus.jsonl")));
  REQUIRE(Run({"gen-synthetic", "--out", ws.P("other.jsonl"), "--n", "24", "--seed", "4",
               "--image-size", "32"})
              .code == kExitOk);
  CHECK(Slurp(ws.P("other.jsonl")) != Slurp(ws.P("corpus.jsonl")));
}

TEST_CASE("pretraining twice with one seed gives identical logs and checkpoints") {
  Workspace ws;
  const auto a = ws.Pretrain("a");
  REQUIRE_MESSAGE(a.code == kExitOk, a.err);
  REQUIRE(ws.Pretrain("b").code == kExitOk);
  const std::string log = Slurp(ws.P("a.log"));
  CHECK(std::count(log.begin(), log.end(), '\n') == 3);
  CHECK(log == Slurp(ws.P("b.log")));
  CHECK(Slurp(ws.P("a.ckpt")) == Slurp(ws.P("b.ckpt")));
}

TEST_CASE("finetuning for zero steps leaves the checkpoint unchanged") {
  Workspace ws;
  REQUIRE(ws.Pretrain("base").code == kExitOk);
  const auto r = Run({"finetune", "--config", ws.P("tiny.json"), "--init", ws.P("base.ckpt"),
                      "--corpus", ws.P("corpus.jsonl"), "--vocab", ws.P("vocab.txt"),
                      "--task", "classification", "--steps", "0", "--out", ws.P("ft.ckpt")});
  REQUIRE_MESSAGE(r.code == kExitOk, r.err);
  CHECK(Slurp(ws.P("ft.ckpt")) == Slurp(ws.P("base.ckpt")));
}

TEST_CASE("eval scores reference predictions perfectly") {
  Workspace ws;
  std::ofstream preds(ws.P("preds.txt"));
  for (const auto& rec : ReadCorpus(ws.P("corpus.jsonl"))) {
    if (rec.task == "classification") preds << *rec.label << "\n";
  }
  preds.close();
  const auto r = Run({"eval", "--config", ws.P("tiny.json"), "--corpus", ws.P("corpus.jsonl"),
                      "--vocab", ws.P("vocab.txt"), "--task", "classification",
                      "--predictions", ws.P("preds.txt")});
  REQUIRE_MESSAGE(r.code == kExitOk, r.err);
  const auto report = nlohmann::json::parse(r.out);
  CHECK(report.at("accuracy").get<double>() == doctest::Approx(1.0));
  CHECK(report.contains("f1_macro"));
  CHECK(report.contains("f1_weighted"));
}

TEST_CASE("constrained decoding without labels is a usage error") {
  Workspace ws;
  REQUIRE(ws.Pretrain("m").code == kExitOk);
  std::ofstream(ws.P("one.json")) << ToJson(ReadCorpus(ws.P("corpus.jsonl")).front()).dump();
  const std::vector<std::string> base = {"generate", "--config", ws.P("tiny.json"),
                                         "--checkpoint", ws.P("m.ckpt"), "--vocab",
                                         ws.P("vocab.txt"), "--input", ws.P("one.json")};
  auto args = base;
  args.insert(args.end(), {"--decode", "trie"});
  CHECK(Run(args).code == kExitUsage);
  args = base;
  args.insert(args.end(), {"--decode", "trie", "--labels", "circle,square"});
  const auto ok = Run(args);
  REQUIRE_MESSAGE(ok.code == kExitOk, ok.err);
  CHECK((ok.out == "circle\n" || ok.out == "square\n"));
}

}  // namespace
}  // namespace uniseq
