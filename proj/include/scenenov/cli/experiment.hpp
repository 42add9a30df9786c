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

#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "json.hpp"
#include "scenenov/dataset/dataset.hpp"
#include "scenenov/eval/eval.hpp"
#include "scenenov/models/models.hpp"
#include "scenenov/outlier/outlier.hpp"

namespace scenenov::cli {

struct SceneCount {
  std::string kind;  // roadnet::SceneKind name
  std::size_t count = 0;
};

struct DatasetSpec {
  std::vector<SceneCount> scenes;
  std::size_t image_size = 64;
  double extent_m = 100.0;
  double t_max = 5.0;
  bool undirected = false;
  std::uint64_t seed = 1;

  std::size_t total() const;
};

struct AblationVariant {
  std::string name;
  bool triplet = true;
  bool decoder = true;
};

struct SplitSpec {
  std::string base = "highway";
  std::vector<std::string> anomalies;  // empty: every other tag
};

struct ExperimentConfig {
  DatasetSpec dataset;
  std::vector<models::EncoderConfig> architectures;
  models::TrainConfig train;
  std::vector<AblationVariant> ablation;
  SplitSpec split;
  std::vector<outlier::DetectorKind> detectors;
  outlier::DetectorParams detector;
  std::size_t d_local_k_max = 25;
  std::string out;

  // The desk-scale experiment: 600 scenes in five kinds, ViT-S and ResSmall,
  // 30 epochs, base = highway.
  static ExperimentConfig desk();
  // ValidationError naming the offending field.
  void check() const;
};

nlohmann::json to_json(const ExperimentConfig& c);
// Missing keys keep the desk() values. ParseError on unknown keys or wrong
// types, ValidationError when check() fails.
ExperimentConfig experiment_from_json(const nlohmann::json& j);
ExperimentConfig load_experiment(const std::filesystem::path& path);
void write_experiment(const ExperimentConfig& c, const std::filesystem::path& path);

// Seed of scene i; distinct scenes draw independent generator streams.
std::uint64_t scene_seed(std::uint64_t dataset_seed, std::size_t i);

// Generates every scene in order, renders and crops it and writes the
// dataset directory.
dataset::Dataset generate_dataset(const DatasetSpec& spec, const std::filesystem::path& root);

// Entries tagged with split.base form the base set; anomalies are the listed
// tags, or all other tags. Entries outside both are left out.
eval::EvalSplit make_split(const dataset::Dataset& data, const SplitSpec& split);

std::vector<const raster::Image*> image_pointers(const dataset::Dataset& data);

// Copy of `arch` with the variant's loss switches applied.
models::EncoderConfig apply_variant(const models::EncoderConfig& arch, const AblationVariant& v);

// Adds one AUC row (latent detectors plus recon when listed and the model
// has a decoder), one d_local curve and the score sets under "<name>_<det>".
void evaluate_checkpoint(const dataset::Dataset& data, const models::Checkpoint& ckpt, const ExperimentConfig& cfg,
                         const std::string& name, eval::Report& report);
// Adds the "input" row: the point detectors on flattened pixels.
void evaluate_input(const dataset::Dataset& data, const ExperimentConfig& cfg, eval::Report& report);
// Projection of the checkpoint's embeddings with dataset tags.
std::vector<eval::ProjectionPoint> project(const dataset::Dataset& data, const models::Checkpoint& ckpt);

using TrainCallback = std::function<void(const std::string& name, const models::EpochMetrics&)>;

// Trains every architecture under every ablation variant and evaluates each
// checkpoint. Checkpoints and metrics logs go under `out`.
eval::Report run_ablation(const dataset::Dataset& data, const ExperimentConfig& cfg, const std::filesystem::path& out,
                          const TrainCallback& on_epoch = {});

}  // namespace scenenov::cli
