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

#include "scenenov/dataset/dataset.hpp"

#include <algorithm>
#include <cstdio>
#include <exception>
#include <fstream>
#include <iterator>
#include <map>

#include "json.hpp"
#include "scenenov/errors.hpp"
#include "scenenov/util/parallel.hpp"

namespace scenenov::dataset {

namespace fs = std::filesystem;
using nlohmann::json;

ClassIndex build_class_index(const std::vector<congraph::ConnGraph>& graphs) {
  std::map<std::string, std::vector<std::size_t>> buckets;
  std::vector<std::string> keys(graphs.size());
  parallel_for(0, graphs.size(), 64, [&](std::size_t b, std::size_t e) {
    for (std::size_t i = b; i < e; ++i) keys[i] = congraph::canonical_key(graphs[i]);
  });
  for (std::size_t i = 0; i < graphs.size(); ++i) buckets[keys[i]].push_back(i);

  std::map<std::string, std::vector<std::size_t>> classes;
  for (const auto& [key, ids] : buckets) {
    std::vector<std::vector<std::size_t>> split;
    for (std::size_t id : ids) {
      auto it = std::find_if(split.begin(), split.end(),
                             [&](const auto& cls) { return congraph::is_isomorphic(graphs[cls.front()], graphs[id]); });
      if (it == split.end()) split.push_back({id});
      else it->push_back(id);
    }
    for (std::size_t s = 0; s < split.size(); ++s)
      classes[s == 0 ? key : key + "#" + std::to_string(s)] = std::move(split[s]);
  }
  ClassIndex index;
  index.class_of.assign(graphs.size(), 0);
  for (auto& [key, ids] : classes) {
    for (std::size_t id : ids) index.class_of[id] = index.keys.size();
    index.keys.push_back(key);
    index.members.push_back(std::move(ids));
  }
  return index;
}

namespace {

std::string numbered(const char* dir, std::size_t id, const char* ext) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%s/%06zu.%s", dir, id, ext);
  return buf;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot write " + path.string());
  f << text;
  if (!f) throw IoError("write failed: " + path.string());
}

std::string read_text(const fs::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot read " + path.string());
  return std::string((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
}

json params_json(const BuildParams& p) {
  return {{"image_size", p.render.size},
          {"extent_m", p.render.extent_m},
          {"t_max", p.crop.t_max},
          {"undirected", p.undirected}};
}

// Rethrows the active library error with `prefix` added, keeping its type.
[[noreturn]] void rethrow_with(const std::string& prefix) {
  try {
    throw;
  } catch (const GeometryError& e) {
    throw GeometryError(prefix + e.what());
  } catch (const GraphError& e) {
    throw GraphError(prefix + e.what());
  } catch (const ValidationError& e) {
    throw ValidationError(prefix + e.what());
  } catch (const ParameterError& e) {
    throw ParameterError(prefix + e.what());
  } catch (const Error& e) {
    throw Error(prefix + e.what());
  }
}

const std::vector<congraph::ConnGraph>& compared(const Dataset& d, std::vector<congraph::ConnGraph>& scratch) {
  if (!d.params.undirected) return d.graphs;
  scratch.clear();
  for (const auto& g : d.graphs) scratch.push_back(congraph::symmetrized(g));
  return scratch;
}

}  // namespace

Dataset build_dataset(const std::vector<roadnet::RoadNetwork>& scenes, const std::vector<std::string>& tags,
                      const BuildParams& params, const fs::path& root) {
  if (scenes.empty()) throw ParameterError("dataset needs at least one scene");
  if (!tags.empty() && tags.size() != scenes.size()) throw ParameterError("one tag per scene required");
  params.crop.check();

  Dataset d;
  d.root = root;
  d.params = params;
  const std::size_t m = scenes.size();
  d.images.resize(m);
  d.graphs.resize(m);
  std::vector<std::exception_ptr> errors(m);
  parallel_for(0, m, 8, [&](std::size_t b, std::size_t e) {
    for (std::size_t i = b; i < e; ++i) {
      try {
        // Keep the stored (quantized) pixels so built and loaded datasets agree.
        d.images[i] = raster::render(scenes[i], params.render);
        for (float& v : d.images[i].pixels) v = raster::quantize(v);
        d.graphs[i] = congraph::crop_scene(scenes[i], params.crop);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  });
  for (std::size_t i = 0; i < m; ++i) {
    if (!errors[i]) continue;
    try {
      std::rethrow_exception(errors[i]);
    } catch (const Error&) {
      rethrow_with("scene " + std::to_string(i) + ": ");
    }
  }

  std::vector<congraph::ConnGraph> scratch;
  d.index = build_class_index(compared(d, scratch));

  std::error_code ec;
  fs::create_directories(root / "images", ec);
  fs::create_directories(root / "graphs", ec);
  if (ec) throw IoError("cannot create " + root.string() + ": " + ec.message());

  json entries = json::array();
  for (std::size_t i = 0; i < m; ++i) {
    Entry e{i, numbered("images", i, "pgm"), numbered("graphs", i, "json"), tags.empty() ? "" : tags[i]};
    raster::save_pgm(d.images[i], root / e.image);
    write_text(root / e.graph, congraph::graph_to_json(d.graphs[i]) + "\n");
    entries.push_back({{"id", e.id},
                       {"image", e.image},
                       {"graph", e.graph},
                       {"tag", e.tag},
                       {"class", d.index.keys[d.index.class_of[i]]}});
    d.entries.push_back(std::move(e));
  }
  json classes = json::object();
  for (std::size_t c = 0; c < d.index.num_classes(); ++c) classes[d.index.keys[c]] = d.index.members[c];
  json manifest = {{"format_version", kFormatVersion},
                   {"build", params_json(params)},
                   {"entries", std::move(entries)},
                   {"class_index", std::move(classes)}};
  write_text(root / "manifest.json", manifest.dump(2) + "\n");
  return d;
}

Dataset load_dataset(const fs::path& root) {
  const json manifest = json::parse(read_text(root / "manifest.json"), nullptr, false);
  if (manifest.is_discarded() || !manifest.is_object()) throw FormatError("manifest.json is not a JSON object");
  try {
    if (manifest.at("format_version").get<int>() != kFormatVersion)
      throw FormatError("unsupported dataset format version");
    Dataset d;
    d.root = root;
    const json& b = manifest.at("build");
    d.params.render.size = b.at("image_size").get<std::size_t>();
    d.params.render.extent_m = b.at("extent_m").get<double>();
    d.params.crop.t_max = b.at("t_max").get<double>();
    d.params.undirected = b.at("undirected").get<bool>();
    for (const json& e : manifest.at("entries")) {
      Entry entry{e.at("id").get<std::size_t>(), e.at("image").get<std::string>(), e.at("graph").get<std::string>(),
                  e.at("tag").get<std::string>()};
      if (entry.id != d.entries.size()) throw FormatError("manifest entries out of order");
      d.entries.push_back(std::move(entry));
    }
    if (d.entries.empty()) throw FormatError("dataset has no entries");
    d.images.resize(d.entries.size());
    d.graphs.resize(d.entries.size());
    for (std::size_t i = 0; i < d.entries.size(); ++i) {
      d.images[i] = raster::load_pgm(root / d.entries[i].image);
      if (d.images[i].size != d.params.render.size) throw FormatError(d.entries[i].image + ": wrong image size");
      d.graphs[i] = congraph::graph_from_json(read_text(root / d.entries[i].graph));
    }
    std::vector<congraph::ConnGraph> scratch;
    d.index = build_class_index(compared(d, scratch));
    const json& stored = manifest.at("class_index");
    if (stored.size() != d.index.num_classes()) throw FormatError("class index does not match the stored graphs");
    for (std::size_t c = 0; c < d.index.num_classes(); ++c) {
      if (!stored.contains(d.index.keys[c]) ||
          stored.at(d.index.keys[c]).get<std::vector<std::size_t>>() != d.index.members[c])
        throw FormatError("class index does not match the stored graphs");
    }
    return d;
  } catch (const json::exception& e) {
    throw FormatError(std::string("manifest.json: ") + e.what());
  }
}

TripletCandidates sample_triplet_candidates(const ClassIndex& index, std::size_t anchor, std::size_t pool_size,
                                            Rng& rng) {
  if (anchor >= index.size()) throw SamplingError("anchor " + std::to_string(anchor) + " out of range");
  const auto& bucket = index.members[index.class_of[anchor]];
  if (bucket.size() < 2) throw NoPositiveError("anchor " + std::to_string(anchor) + " has no positive");
  const std::size_t available = index.size() - bucket.size();
  if (available == 0) throw NoNegativeError("dataset has a single class");

  TripletCandidates t;
  t.anchor = anchor;
  std::size_t r = std::uniform_int_distribution<std::size_t>(0, bucket.size() - 2)(rng);
  const std::size_t self = std::size_t(std::lower_bound(bucket.begin(), bucket.end(), anchor) - bucket.begin());
  t.positive = bucket[r >= self ? r + 1 : r];

  std::vector<std::size_t> outside;
  outside.reserve(available);
  const std::size_t cls = index.class_of[anchor];
  for (std::size_t i = 0; i < index.size(); ++i)
    if (index.class_of[i] != cls) outside.push_back(i);
  const std::size_t k = std::min(pool_size, available);
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t j = std::uniform_int_distribution<std::size_t>(i, available - 1)(rng);
    std::swap(outside[i], outside[j]);
  }
  outside.resize(k);
  t.pool = std::move(outside);
  return t;
}

std::size_t sample_anchor(const ClassIndex& index, Rng& rng, std::size_t& skipped) {
  const bool any = std::any_of(index.members.begin(), index.members.end(), [](const auto& m) { return m.size() >= 2; });
  if (!any) throw NoPositiveError("no class has two members");
  std::uniform_int_distribution<std::size_t> pick(0, index.size() - 1);
  for (;;) {
    const std::size_t a = pick(rng);
    if (index.members[index.class_of[a]].size() >= 2) return a;
    ++skipped;
  }
}

}  // namespace scenenov::dataset
