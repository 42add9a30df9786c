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

#include "scenenov/cli/experiment.hpp"

#include <fstream>
#include <set>
#include <sstream>
#include <type_traits>

#include "scenenov/errors.hpp"
#include "scenenov/models/config_json.hpp"

namespace scenenov::cli {

namespace fs = std::filesystem;
using nlohmann::json;

std::size_t DatasetSpec::total() const {
  std::size_t n = 0;
  for (const auto& s : scenes) n += s.count;
  return n;
}

ExperimentConfig ExperimentConfig::desk() {
  ExperimentConfig c;
  for (const char* kind : {"highway", "roundabout3", "roundabout4", "crossing4", "single_lane"})
    c.dataset.scenes.push_back({kind, 120});
  c.architectures = {models::EncoderConfig::vit_s(), models::EncoderConfig::res_small()};
  c.train.epochs = 30;
  c.ablation = {{"full", true, true}, {"no_triplet", false, true}, {"no_decoder", true, false}};
  c.detectors = {outlier::DetectorKind::kLof, outlier::DetectorKind::kAbod, outlier::DetectorKind::kIForest,
                 outlier::DetectorKind::kOcsvm, outlier::DetectorKind::kRecon};
  c.out = "runs/desk";
  return c;
}

void ExperimentConfig::check() const {
  auto fail = [](const std::string& what) { throw ValidationError(what); };
  if (dataset.scenes.empty()) fail("/dataset/scenes: at least one scene kind is required");
  std::set<std::string> kinds;
  for (const auto& s : dataset.scenes) {
    try {
      roadnet::SceneKind::parse(s.kind);
    } catch (const ParameterError& e) {
      fail("/dataset/scenes: " + std::string(e.what()));
    }
    if (!kinds.insert(s.kind).second) fail("/dataset/scenes: " + s.kind + " listed twice");
    if (s.count == 0) fail("/dataset/scenes: " + s.kind + " has count 0");
  }
  if (dataset.image_size < 8) fail("/dataset/image_size: must be at least 8");
  if (!(dataset.extent_m > 0.0)) fail("/dataset/extent_m: must be positive");
  if (!(dataset.t_max > 0.0)) fail("/dataset/t_max: must be positive");
  if (architectures.empty()) fail("/architectures: at least one encoder is required");
  std::set<std::string> names;
  for (const auto& a : architectures) {
    try {
      a.check();
    } catch (const Error& e) {
      fail("/architectures: " + std::string(e.what()));
    }
    if (a.image_size != dataset.image_size)
      fail("/architectures: encoder image_size " + std::to_string(a.image_size) + " differs from dataset image_size " +
           std::to_string(dataset.image_size));
    if (!names.insert(models::encoder_name(a.kind)).second)
      fail("/architectures: " + models::encoder_name(a.kind) + " listed twice");
  }
  try {
    train.check();
  } catch (const Error& e) {
    fail("/train: " + std::string(e.what()));
  }
  if (train.epochs == 0) fail("/train/epochs: must be positive");
  std::set<std::string> variants;
  for (const auto& v : ablation) {
    if (v.name.empty()) fail("/ablation: variant without a name");
    if (!variants.insert(v.name).second) fail("/ablation: " + v.name + " listed twice");
    if (!v.triplet && !v.decoder) fail("/ablation/" + v.name + ": needs the triplet term or the decoder");
  }
  if (!kinds.count(split.base)) fail("/split/base: " + split.base + " is not a generated scene kind");
  for (const auto& a : split.anomalies) {
    if (!kinds.count(a)) fail("/split/anomalies: " + a + " is not a generated scene kind");
    if (a == split.base) fail("/split/anomalies: " + a + " is also the base kind");
  }
  if (kinds.size() < 2) fail("/dataset/scenes: the split needs an anomaly kind");
  if (detectors.empty()) fail("/detectors/kinds: at least one detector is required");
  if (detector.lof_k == 0) fail("/detectors/lof_k: must be positive");
  if (detector.abod_k < 2) fail("/detectors/abod_k: must be at least 2");
  if (detector.trees == 0) fail("/detectors/trees: must be positive");
  if (detector.subsample < 2) fail("/detectors/subsample: must be at least 2");
  if (!(detector.nu > 0.0 && detector.nu <= 1.0)) fail("/detectors/nu: must lie in (0, 1]");
  if (!(detector.gamma >= 0.0)) fail("/detectors/gamma: must be non-negative");
  if (!(detector.tolerance > 0.0)) fail("/detectors/tolerance: must be positive");
  if (d_local_k_max == 0) fail("/d_local_k_max: must be positive");
  if (out.empty()) fail("/out: output directory is empty");
}

// ---------------------------------------------------------------------------

namespace {

void check_keys(const json& j, const std::string& path, const std::set<std::string>& allowed) {
  if (!j.is_object()) throw ParseError(path + ": expected an object");
  for (const auto& [k, v] : j.items())
    if (!allowed.count(k)) throw ParseError(path + "/" + k + ": unknown key");
}

template <class V>
void read(const json& j, const std::string& path, const char* key, V& out) {
  if (!j.contains(key)) return;
  if constexpr (std::is_unsigned_v<V>)
    if (j.at(key).is_number_integer() && !j.at(key).is_number_unsigned())
      throw ParseError(path + "/" + key + ": must not be negative");
  try {
    out = j.at(key).get<V>();
  } catch (const json::exception&) {
    throw ParseError(path + "/" + key + ": wrong type");
  }
}

json detectors_json(const ExperimentConfig& c) {
  std::vector<std::string> kinds;
  for (auto k : c.detectors) kinds.push_back(outlier::detector_name(k));
  const auto& d = c.detector;
  return {{"kinds", kinds},   {"lof_k", d.lof_k}, {"abod_k", d.abod_k},       {"trees", d.trees},
          {"subsample", d.subsample}, {"seed", d.seed}, {"nu", d.nu}, {"gamma", d.gamma},
          {"tolerance", d.tolerance}, {"max_iterations", d.max_iterations}};
}

}  // namespace

json to_json(const ExperimentConfig& c) {
  json scenes = json::array();
  for (const auto& s : c.dataset.scenes) scenes.push_back({{"kind", s.kind}, {"count", s.count}});
  json archs = json::array();
  for (const auto& a : c.architectures) archs.push_back(models::to_json(a));
  json ablation = json::array();
  for (const auto& v : c.ablation) ablation.push_back({{"name", v.name}, {"triplet", v.triplet}, {"decoder", v.decoder}});
  return {{"dataset",
           {{"scenes", scenes},
            {"image_size", c.dataset.image_size},
            {"extent_m", c.dataset.extent_m},
            {"t_max", c.dataset.t_max},
            {"undirected", c.dataset.undirected},
            {"seed", c.dataset.seed}}},
          {"architectures", archs},
          {"train", models::to_json(c.train)},
          {"ablation", ablation},
          {"split", {{"base", c.split.base}, {"anomalies", c.split.anomalies}}},
          {"detectors", detectors_json(c)},
          {"d_local_k_max", c.d_local_k_max},
          {"out", c.out}};
}

ExperimentConfig experiment_from_json(const json& j) {
  check_keys(j, "", {"dataset", "architectures", "train", "ablation", "split", "detectors", "d_local_k_max", "out"});
  ExperimentConfig c = ExperimentConfig::desk();
  if (j.contains("dataset")) {
    const json& d = j.at("dataset");
    check_keys(d, "/dataset", {"scenes", "image_size", "extent_m", "t_max", "undirected", "seed"});
    if (d.contains("scenes")) {
      if (!d.at("scenes").is_array()) throw ParseError("/dataset/scenes: expected an array");
      c.dataset.scenes.clear();
      for (const json& s : d.at("scenes")) {
        check_keys(s, "/dataset/scenes", {"kind", "count"});
        SceneCount sc;
        read(s, "/dataset/scenes", "kind", sc.kind);
        read(s, "/dataset/scenes", "count", sc.count);
        c.dataset.scenes.push_back(sc);
      }
    }
    read(d, "/dataset", "image_size", c.dataset.image_size);
    read(d, "/dataset", "extent_m", c.dataset.extent_m);
    read(d, "/dataset", "t_max", c.dataset.t_max);
    read(d, "/dataset", "undirected", c.dataset.undirected);
    read(d, "/dataset", "seed", c.dataset.seed);
  }
  if (j.contains("architectures")) {
    if (!j.at("architectures").is_array()) throw ParseError("/architectures: expected an array");
    c.architectures.clear();
    for (const json& a : j.at("architectures")) {
      // Each entry starts from its kind's template.
      if (!a.is_object()) throw ParseError("/architectures: expected an object");
      std::string kind = "vit";
      read(a, "/architectures", "kind", kind);
      json merged = models::to_json(models::parse_encoder(kind) == models::EncoderKind::kViT
                                        ? models::EncoderConfig::vit_s()
                                        : models::EncoderConfig::res_small());
      for (const auto& [k, v] : a.items()) merged[k] = v;
      c.architectures.push_back(models::encoder_from_json(merged, "/architectures"));
    }
  }
  if (j.contains("train")) {
    json merged = models::to_json(c.train);
    if (!j.at("train").is_object()) throw ParseError("/train: expected an object");
    for (const auto& [k, v] : j.at("train").items()) merged[k] = v;
    c.train = models::train_from_json(merged, "/train");
  }
  if (j.contains("ablation")) {
    if (!j.at("ablation").is_array()) throw ParseError("/ablation: expected an array");
    c.ablation.clear();
    for (const json& v : j.at("ablation")) {
      check_keys(v, "/ablation", {"name", "triplet", "decoder"});
      AblationVariant a;
      read(v, "/ablation", "name", a.name);
      read(v, "/ablation", "triplet", a.triplet);
      read(v, "/ablation", "decoder", a.decoder);
      c.ablation.push_back(a);
    }
  }
  if (j.contains("split")) {
    const json& s = j.at("split");
    check_keys(s, "/split", {"base", "anomalies"});
    read(s, "/split", "base", c.split.base);
    read(s, "/split", "anomalies", c.split.anomalies);
  }
  if (j.contains("detectors")) {
    const json& d = j.at("detectors");
    check_keys(d, "/detectors",
               {"kinds", "lof_k", "abod_k", "trees", "subsample", "seed", "nu", "gamma", "tolerance", "max_iterations"});
    if (d.contains("kinds")) {
      std::vector<std::string> kinds;
      read(d, "/detectors", "kinds", kinds);
      c.detectors.clear();
      std::set<std::string> seen;
      for (const auto& k : kinds) {
        if (!seen.insert(k).second) throw ValidationError("/detectors/kinds: " + k + " listed twice");
        try {
          c.detectors.push_back(outlier::parse_detector(k));
        } catch (const ParameterError& e) {
          throw ValidationError("/detectors/kinds: " + std::string(e.what()));
        }
      }
    }
    auto& p = c.detector;
    read(d, "/detectors", "lof_k", p.lof_k);
    read(d, "/detectors", "abod_k", p.abod_k);
    read(d, "/detectors", "trees", p.trees);
    read(d, "/detectors", "subsample", p.subsample);
    read(d, "/detectors", "seed", p.seed);
    read(d, "/detectors", "nu", p.nu);
    read(d, "/detectors", "gamma", p.gamma);
    read(d, "/detectors", "tolerance", p.tolerance);
    read(d, "/detectors", "max_iterations", p.max_iterations);
  }
  read(j, "", "d_local_k_max", c.d_local_k_max);
  read(j, "", "out", c.out);
  c.check();
  return c;
}

ExperimentConfig load_experiment(const fs::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot read " + path.string());
  std::stringstream s;
  s << f.rdbuf();
  const json j = json::parse(s.str(), nullptr, false);
  if (j.is_discarded()) throw ParseError(path.string() + ": not valid JSON");
  return experiment_from_json(j);
}

void write_experiment(const ExperimentConfig& c, const fs::path& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot write " + path.string());
  f << to_json(c).dump(2) << "\n";
  if (!f) throw IoError("write failed: " + path.string());
}

// ---------------------------------------------------------------------------

std::uint64_t scene_seed(std::uint64_t dataset_seed, std::size_t i) {
  // splitmix64 finalizer over (seed, index)
  std::uint64_t z = dataset_seed + 0x9e3779b97f4a7c15ULL * (std::uint64_t(i) + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

dataset::Dataset generate_dataset(const DatasetSpec& spec, const fs::path& root) {
  std::vector<roadnet::RoadNetwork> scenes;
  std::vector<std::string> tags;
  scenes.reserve(spec.total());
  for (const auto& s : spec.scenes) {
    const auto kind = roadnet::SceneKind::parse(s.kind);
    for (std::size_t i = 0; i < s.count; ++i) {
      scenes.push_back(roadnet::generate_scene(kind, {}, scene_seed(spec.seed, scenes.size())));
      tags.push_back(kind.name());
    }
  }
  dataset::BuildParams p;
  p.render.size = spec.image_size;
  p.render.extent_m = spec.extent_m;
  p.crop.t_max = spec.t_max;
  p.undirected = spec.undirected;
  return dataset::build_dataset(scenes, tags, p, root);
}

eval::EvalSplit make_split(const dataset::Dataset& data, const SplitSpec& split) {
  const std::set<std::string> anomalies(split.anomalies.begin(), split.anomalies.end());
  eval::EvalSplit s;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const std::string& tag = data.entries[i].tag;
    if (tag == split.base) s.base.push_back(i);
    else if (anomalies.empty() || anomalies.count(tag)) s.anomaly.push_back(i);
  }
  s.check(data.size());
  return s;
}

std::vector<const raster::Image*> image_pointers(const dataset::Dataset& data) {
  std::vector<const raster::Image*> out;
  out.reserve(data.images.size());
  for (const auto& img : data.images) out.push_back(&img);
  return out;
}

models::EncoderConfig apply_variant(const models::EncoderConfig& arch, const AblationVariant& v) {
  models::EncoderConfig c = arch;
  c.use_triplet = v.triplet;
  c.use_decoder = v.decoder;
  return c;
}

namespace {

void check_image_size(const dataset::Dataset& data, const models::EncoderConfig& enc) {
  if (data.image_size() != enc.image_size)
    throw ParameterError("model expects " + std::to_string(enc.image_size) + " px images, dataset has " +
                         std::to_string(data.image_size()));
}

}  // namespace

void evaluate_checkpoint(const dataset::Dataset& data, const models::Checkpoint& ckpt, const ExperimentConfig& cfg,
                         const std::string& name, eval::Report& report) {
  check_image_size(data, ckpt.encoder);
  const auto images = image_pointers(data);
  const auto split = make_split(data, cfg.split);
  const auto z = models::embed(ckpt, images);
  eval::AucRow row{name, {}};
  for (auto kind : cfg.detectors) {
    eval::AucResult r;
    if (kind == outlier::DetectorKind::kRecon) {
      if (!ckpt.encoder.use_decoder) continue;
      r = eval::run_recon_experiment(ckpt, images, split);
    } else {
      r = eval::run_auc_experiment(z, split, kind, cfg.detector);
    }
    row.auc[outlier::detector_name(kind)] = r.auc;
    report.scores[name + "_" + outlier::detector_name(kind)] = std::move(r.scored);
  }
  report.auc.push_back(std::move(row));
  const std::size_t k_max = std::min(cfg.d_local_k_max, data.size() - 1);
  report.d_local.push_back({name, eval::d_local_curve(z, eval::image_rows(images), k_max)});
}

void evaluate_input(const dataset::Dataset& data, const ExperimentConfig& cfg, eval::Report& report) {
  const auto split = make_split(data, cfg.split);
  const auto x = eval::image_rows(image_pointers(data));
  eval::AucRow row{"input", {}};
  for (auto kind : cfg.detectors) {
    if (kind == outlier::DetectorKind::kRecon) continue;
    auto r = eval::run_auc_experiment(x, split, kind, cfg.detector);
    row.auc[outlier::detector_name(kind)] = r.auc;
    report.scores["input_" + outlier::detector_name(kind)] = std::move(r.scored);
  }
  report.auc.push_back(std::move(row));
}

std::vector<eval::ProjectionPoint> project(const dataset::Dataset& data, const models::Checkpoint& ckpt) {
  check_image_size(data, ckpt.encoder);
  const auto p = eval::pca_project(models::embed(ckpt, image_pointers(data)), 2);
  std::vector<eval::ProjectionPoint> out;
  for (std::size_t i = 0; i < p.size(); ++i) out.push_back({data.entries[i].id, p[i][0], p[i][1], data.entries[i].tag});
  return out;
}

eval::Report run_ablation(const dataset::Dataset& data, const ExperimentConfig& cfg, const fs::path& out,
                          const TrainCallback& on_epoch) {
  std::error_code ec;
  fs::create_directories(out / "checkpoints", ec);
  if (ec) throw IoError("cannot create " + (out / "checkpoints").string() + ": " + ec.message());
  eval::Report report;
  for (const auto& arch : cfg.architectures) {
    check_image_size(data, arch);
    for (const auto& v : cfg.ablation) {
      const std::string name = models::encoder_name(arch.kind) + "_" + v.name;
      auto cb = [&](const models::EpochMetrics& m) {
        if (on_epoch) on_epoch(name, m);
      };
      const auto ckpt = models::train(data, apply_variant(arch, v), cfg.train, cb);
      models::save_checkpoint(ckpt, out / "checkpoints" / (name + ".snvl"));
      std::ofstream log(out / "checkpoints" / (name + ".metrics.jsonl"), std::ios::binary);
      log << models::metrics_to_json_lines(ckpt.history);
      if (!log) throw IoError("cannot write metrics for " + name);
      evaluate_checkpoint(data, ckpt, cfg, name, report);
    }
  }
  evaluate_input(data, cfg, report);
  return report;
}

}  // namespace scenenov::cli
