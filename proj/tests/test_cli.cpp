/*
 * Copyright 2026 The Scene Novelty Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "json.hpp"
#include "scenenov/cli/cli.hpp"
#include "scenenov/cli/experiment.hpp"
#include "scenenov/errors.hpp"

using namespace scenenov;
using namespace scenenov::cli;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  REQUIRE(f);
  std::stringstream s;
  s << f.rdbuf();
  return s.str();
}

json tiny_config(const fs::path& out) {
  json j = json::parse(R"({
    "dataset": {"scenes": [{"kind": "highway", "count": 6}, {"kind": "roundabout3", "count": 6},
                           {"kind": "crossing4", "count": 6}],
                "image_size": 16},
    "architectures": [{"kind": "res_small", "image_size": 16, "channels": [4, 8], "latent_dim": 4,
                       "decoder_base": 8}],
    "train": {"epochs": 2, "batch_size": 6, "pool_size": 4},
    "ablation": [{"name": "full"}, {"name": "no_triplet", "triplet": false}],
    "detectors": {"lof_k": 3, "abod_k": 3, "trees": 10},
    "d_local_k_max": 4
  })");
  j["out"] = out.string();
  return j;
}

int run_args(std::vector<std::string> args) {
  args.insert(args.begin(), "scenenov");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  return run(int(argv.size()), argv.data());
}

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) { fs::remove_all(path); }
  ~TempDir() { fs::remove_all(path); }
};

}  // namespace

TEST_CASE("desk config is valid and round trips through JSON") {
  const auto desk = ExperimentConfig::desk();
  CHECK_NOTHROW(desk.check());
  CHECK(desk.dataset.total() == 600);
  CHECK(desk.train.epochs == 30);
  CHECK(desk.architectures.size() == 2);
  const json j = to_json(desk);
  CHECK(to_json(experiment_from_json(j)) == j);
  CHECK(to_json(experiment_from_json(json::object())) == j);
}

TEST_CASE("experiment configs are validated up front") {
  auto bad = [](const char* text) { return experiment_from_json(json::parse(text)); };
  CHECK_THROWS_AS(bad(R"({"extra": 1})"), ParseError);
  CHECK_THROWS_AS(bad(R"({"dataset": {"seed": "x"}})"), ParseError);
  CHECK_THROWS_AS(bad(R"({"train": {"epochs": 3, "momentum": 0.9}})"), ParseError);
  CHECK_THROWS_AS(bad(R"({"architectures": [{"kind": "vit", "depth": 3}]})"), ParseError);
  CHECK_THROWS_AS(bad(R"({"dataset": {"scenes": [{"kind": "highway", "count": 5}]}})"), ValidationError);
  CHECK_THROWS_AS(bad(R"({"dataset": {"scenes": [{"kind": "tunnel", "count": 5}]}})"), ValidationError);
  CHECK_THROWS_AS(bad(R"({"dataset": {"image_size": 32}})"), ValidationError);
  CHECK_THROWS_AS(bad(R"({"split": {"base": "crossing3"}})"), ValidationError);
  CHECK_THROWS_AS(bad(R"({"split": {"anomalies": ["highway"]}})"), ValidationError);
  CHECK_THROWS_AS(bad(R"({"ablation": [{"name": "x", "triplet": false, "decoder": false}]})"), ValidationError);
  CHECK_THROWS_AS(bad(R"({"detectors": {"kinds": ["lof", "lof"]}})"), ValidationError);
  CHECK_THROWS_AS(bad(R"({"detectors": {"nu": 0}})"), ValidationError);
  CHECK_THROWS_AS(bad(R"({"train": {"epochs": 0}})"), ValidationError);
  CHECK_THROWS_AS(bad(R"({"train": {"epochs": -1}})"), ParseError);
  const auto ok = bad(R"({"architectures": [{"kind": "res_small", "latent_dim": 8}], "train": {"epochs": 3}})");
  CHECK(ok.architectures.front().kind == models::EncoderKind::kResSmall);
  CHECK(ok.architectures.front().latent_dim == 8);
  CHECK(ok.train.epochs == 3);
  CHECK(ok.train.batch_size == 64);
}

TEST_CASE("scene seeds are distinct per index and dataset seed") {
  CHECK(scene_seed(1, 0) != scene_seed(1, 1));
  CHECK(scene_seed(1, 0) != scene_seed(2, 0));
  CHECK(scene_seed(5, 17) == scene_seed(5, 17));
}

TEST_CASE("usage errors exit with 2") {
  CHECK(run_args({}) == kExitUsage);
  CHECK(run_args({"frobnicate"}) == kExitUsage);
  CHECK(run_args({"generate", "--bogus"}) == kExitUsage);
  CHECK(run_args({"score", "--detector", "knn"}) == kExitUsage);
  CHECK(run_args({"score", "--space", "pixel"}) == kExitUsage);
  CHECK(run_args({"train", "--threads", "0"}) == kExitUsage);
  CHECK(run_args({"generate", "--config", "/nonexistent/c.json"}) == kExitUsage);
}

TEST_CASE("runtime errors exit with 1") {
  TempDir tmp("scenenov_cli_errors");
  fs::create_directories(tmp.path);
  std::ofstream(tmp.path / "bad.json") << R"({"train": {"epochs": 0}})";
  CHECK(run_args({"generate", "--config", (tmp.path / "bad.json").string()}) == kExitRuntime);
  std::ofstream(tmp.path / "c.json") << tiny_config(tmp.path / "run").dump();
  CHECK(run_args({"train", "--config", (tmp.path / "c.json").string(), "--data", tmp.path.string()}) == kExitRuntime);
}

TEST_CASE("pipeline end to end, rerunnable and deterministic") {
  TempDir tmp("scenenov_cli_pipeline");
  fs::create_directories(tmp.path);
  const fs::path cfg = tmp.path / "c.json";
  std::ofstream(cfg) << tiny_config(tmp.path / "run").dump();
  const std::string c = cfg.string();
  const fs::path run_dir = tmp.path / "run";

  REQUIRE(run_args({"generate", "--config", c}) == kExitOk);
  const std::string manifest = slurp(run_dir / "data" / "manifest.json");
  CHECK(fs::exists(run_dir / "data" / "config.json"));
  REQUIRE(run_args({"generate", "--config", c}) == kExitOk);
  CHECK(slurp(run_dir / "data" / "manifest.json") == manifest);
  REQUIRE(run_args({"generate", "--config", c, "--seed", "9", "--out", (tmp.path / "other").string()}) == kExitOk);
  CHECK(slurp(tmp.path / "other" / "images" / "000000.pgm") != slurp(run_dir / "data" / "images" / "000000.pgm"));
  CHECK(json::parse(slurp(tmp.path / "other" / "config.json"))["dataset"]["seed"] == 9);

  REQUIRE(run_args({"train", "--config", c, "--seed", "7", "--threads", "1"}) == kExitOk);
  const std::string log = slurp(run_dir / "train" / "res_small.metrics.jsonl");
  const std::string ckpt = slurp(run_dir / "train" / "res_small.snvl");
  CHECK(std::count(log.begin(), log.end(), '\n') == 2);
  REQUIRE(run_args({"train", "--config", c, "--seed", "7", "--threads", "1"}) == kExitOk);
  CHECK(slurp(run_dir / "train" / "res_small.metrics.jsonl") == log);
  CHECK(slurp(run_dir / "train" / "res_small.snvl") == ckpt);

  REQUIRE(run_args({"evaluate", "--config", c}) == kExitOk);
  const auto report = json::parse(slurp(run_dir / "eval" / "report.json"));
  CHECK(report["auc_table"]["rows"].size() == 2);
  CHECK(report["auc_table"]["rows"][0]["name"] == "res_small");
  CHECK(report["auc_table"]["rows"][1]["name"] == "input");
  CHECK(report["d_local"][0]["values"].size() == 4);
  CHECK(fs::exists(run_dir / "eval" / "projection.csv"));
  CHECK(fs::exists(run_dir / "eval" / "scores_res_small_abod.csv"));
  CHECK(fs::exists(run_dir / "eval" / "scores_res_small_recon.csv"));
  const std::string report_text = slurp(run_dir / "eval" / "report.json");
  REQUIRE(run_args({"evaluate", "--config", c}) == kExitOk);
  CHECK(slurp(run_dir / "eval" / "report.json") == report_text);

  const std::string ck = (run_dir / "train" / "res_small.snvl").string();
  REQUIRE(run_args({"embed", "--config", c, "--checkpoint", ck}) == kExitOk);
  const std::string emb = slurp(run_dir / "embed" / "embeddings.csv");
  CHECK(emb.rfind("id,tag,z0,z1,z2,z3\n0,highway,", 0) == 0);
  CHECK(std::count(emb.begin(), emb.end(), '\n') == 19);

  REQUIRE(run_args({"score", "--config", c, "--detector", "iforest", "--space", "input"}) == kExitOk);
  const std::string scores = slurp(run_dir / "score" / "scores_input_iforest.csv");
  CHECK(std::count(scores.begin(), scores.end(), '\n') == 19);
  REQUIRE(run_args({"score", "--config", c, "--detector", "recon"}) == kExitOk);
  CHECK(run_args({"score", "--config", c, "--detector", "recon", "--space", "input"}) == kExitUsage);

  REQUIRE(run_args({"project", "--config", c}) == kExitOk);
  CHECK(slurp(run_dir / "project" / "projection.csv").rfind("id,x,y,tag\n", 0) == 0);

  REQUIRE(run_args({"ablation", "--config", c}) == kExitOk);
  const auto ab = json::parse(slurp(run_dir / "ablation" / "report.json"));
  REQUIRE(ab["auc_table"]["rows"].size() == 3);
  CHECK(ab["auc_table"]["rows"][0]["name"] == "res_small_full");
  CHECK(ab["auc_table"]["rows"][1]["name"] == "res_small_no_triplet");
  CHECK(fs::exists(run_dir / "ablation" / "checkpoints" / "res_small_no_triplet.snvl"));
}
