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

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "scenenov/outlier/outlier.hpp"

namespace scenenov::eval {

using outlier::Matrix;

// Flattened pixel vectors, one row per image.
Matrix image_rows(const std::vector<const raster::Image*>& images);

// Mean over points of the average input-space distance to the point's k
// nearest latent-space neighbors (self excluded, ties to the lower index).
// ParameterError unless 1 <= k <= M - 1.
double d_local(const Matrix& z, const Matrix& x, std::size_t k);
// d_local(k) for k = 1 .. k_max, sharing one neighbor search.
std::vector<double> d_local_curve(const Matrix& z, const Matrix& x, std::size_t k_max);

struct EvalSplit {
  std::vector<std::size_t> base;     // detector fit set
  std::vector<std::size_t> anomaly;  // labeled outliers
  void check(std::size_t n) const;   // ParameterError
};

// Base and anomaly ids by tag: base entries carry `base_tag`, every other
// entry is an anomaly.
EvalSplit split_by_tag(const std::vector<std::string>& tags, const std::string& base_tag);

enum class Space { kLatent, kInput };
std::string space_name(Space s);
Space parse_space(const std::string& name);

struct AucResult {
  double auc = 0.0;
  outlier::ScoredSet scored;  // base rows first, then anomalies
};

// Fits on the base rows of `points` and scores base and anomaly rows.
AucResult run_auc_experiment(const Matrix& points, const EvalSplit& split, outlier::DetectorKind kind,
                             const outlier::DetectorParams& params);
// Reconstruction-error baseline on the same split.
AucResult run_recon_experiment(const models::Checkpoint& ckpt, const std::vector<const raster::Image*>& images,
                               const EvalSplit& split);

// Mean-centered coordinates on the top `dims` principal axes; each axis is
// signed so its largest-magnitude component is positive. FitError when the
// data has no variance.
Matrix pca_project(const Matrix& z, std::size_t dims = 2);

struct AucRow {
  std::string name;                     // architecture or ablation label
  std::map<std::string, double> auc;    // detector -> AUC
};

struct DLocalCurve {
  std::string name;
  std::vector<double> values;           // index k - 1
};

struct ProjectionPoint {
  std::size_t id = 0;
  double x = 0.0, y = 0.0;
  std::string tag;
};

struct Report {
  std::vector<AucRow> auc;
  std::vector<DLocalCurve> d_local;
  std::vector<ProjectionPoint> projection;
  std::map<std::string, outlier::ScoredSet> scores;  // file suffix -> scores
};

std::string report_json(const Report& r);
// "id,x,y,tag" rows.
std::string projection_to_csv(const std::vector<ProjectionPoint>& points);
// Writes report.json, projection.csv and scores_<name>.csv into `dir`.
void export_report(const Report& r, const std::filesystem::path& dir);

}  // namespace scenenov::eval
