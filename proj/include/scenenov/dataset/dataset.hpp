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
#include <random>
#include <string>
#include <vector>

#include "scenenov/congraph/congraph.hpp"
#include "scenenov/raster/raster.hpp"
#include "scenenov/roadnet/roadnet.hpp"

namespace scenenov::dataset {

inline constexpr int kFormatVersion = 1;

using Rng = std::mt19937_64;

// Isomorphism classes of a graph collection. Graphs share a class iff they
// are isomorphic; buckets with colliding hash keys are split by exact checks
// and the extra classes get "#1", "#2", ... appended to the key.
struct ClassIndex {
  std::vector<std::string> keys;                  // per class, sorted
  std::vector<std::vector<std::size_t>> members;  // per class, ascending ids
  std::vector<std::size_t> class_of;              // per entry

  std::size_t num_classes() const { return keys.size(); }
  std::size_t size() const { return class_of.size(); }
};

ClassIndex build_class_index(const std::vector<congraph::ConnGraph>& graphs);

struct Entry {
  std::size_t id = 0;
  std::string image;  // relative to the dataset root
  std::string graph;
  std::string tag;    // evaluation label only
};

struct BuildParams {
  congraph::CropParams crop;
  raster::RenderParams render;
  bool undirected = false;  // compare graphs with mirrored edges
};

struct Dataset {
  std::filesystem::path root;
  BuildParams params;
  std::vector<Entry> entries;
  std::vector<raster::Image> images;
  std::vector<congraph::ConnGraph> graphs;
  ClassIndex index;

  std::size_t size() const { return entries.size(); }
  std::size_t image_size() const { return params.render.size; }
};

// Renders and crops every scene, writes manifest.json, images/%06d.pgm and
// graphs/%06d.json under `root`. `tags` is empty or one label per scene.
// Errors from a scene are re-raised with its index in the message.
Dataset build_dataset(const std::vector<roadnet::RoadNetwork>& scenes, const std::vector<std::string>& tags,
                      const BuildParams& params, const std::filesystem::path& root);

// Reads a directory written by build_dataset and re-verifies the class index.
Dataset load_dataset(const std::filesystem::path& root);

struct TripletCandidates {
  std::size_t anchor = 0;
  std::size_t positive = 0;
  std::vector<std::size_t> pool;  // negatives
};

// Positive uniform over the anchor's class minus the anchor; pool drawn
// uniformly without replacement from all other classes, min(pool_size,
// available) members. NoPositiveError for singleton classes, NoNegativeError
// when every entry shares the anchor's class.
TripletCandidates sample_triplet_candidates(const ClassIndex& index, std::size_t anchor, std::size_t pool_size,
                                            Rng& rng);

// Uniform anchor whose class has a second member. Each rejected draw bumps
// `skipped`. NoPositiveError when no class has two members.
std::size_t sample_anchor(const ClassIndex& index, Rng& rng, std::size_t& skipped);

}  // namespace scenenov::dataset
