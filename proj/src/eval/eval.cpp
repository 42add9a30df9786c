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

#include "scenenov/eval/eval.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>

#include "json.hpp"
#include "scenenov/errors.hpp"

namespace scenenov::eval {

using nlohmann::json;

Matrix image_rows(const std::vector<const raster::Image*>& images) {
  Matrix out;
  out.reserve(images.size());
  for (const auto* img : images) out.emplace_back(img->pixels.begin(), img->pixels.end());
  return out;
}

namespace {

double dist2(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return s;
}

void check_pair(const Matrix& z, const Matrix& x) {
  if (z.size() != x.size())
    throw ShapeError("latent and input sets differ in size: " + std::to_string(z.size()) + " vs " +
                     std::to_string(x.size()));
  for (const Matrix* m : {&z, &x})
    for (const auto& r : *m)
      if (r.size() != m->front().size()) throw ShapeError("rows differ in length");
}

}  // namespace

std::vector<double> d_local_curve(const Matrix& z, const Matrix& x, std::size_t k_max) {
  check_pair(z, x);
  const std::size_t m = z.size();
  if (k_max < 1 || k_max + 1 > m)
    throw ParameterError("k must lie in [1, M-1] with M = " + std::to_string(m) + ", got " + std::to_string(k_max));
  std::vector<double> total(k_max, 0.0);
  std::vector<std::pair<double, std::size_t>> row;
  for (std::size_t i = 0; i < m; ++i) {
    row.clear();
    for (std::size_t j = 0; j < m; ++j)
      if (j != i) row.emplace_back(std::sqrt(dist2(z[i], z[j])), j);
    std::partial_sort(row.begin(), row.begin() + long(k_max), row.end());
    double s = 0.0;
    for (std::size_t t = 0; t < k_max; ++t) {
      s += std::sqrt(dist2(x[i], x[row[t].second]));
      total[t] += s / double(t + 1);
    }
  }
  for (double& v : total) v /= double(m);
  return total;
}

double d_local(const Matrix& z, const Matrix& x, std::size_t k) {
  check_pair(z, x);
  if (k < 1 || k + 1 > z.size())
    throw ParameterError("k must lie in [1, M-1] with M = " + std::to_string(z.size()) + ", got " + std::to_string(k));
  return d_local_curve(z, x, k).back();
}

// ---------------------------------------------------------------------------

void EvalSplit::check(std::size_t n) const {
  if (base.empty() || anomaly.empty()) throw ParameterError("base and anomaly sets must both be nonempty");
  std::set<std::size_t> seen;
  for (const auto* ids : {&base, &anomaly})
    for (std::size_t id : *ids) {
      if (id >= n) throw ParameterError("split id " + std::to_string(id) + " is out of range");
      if (!seen.insert(id).second) throw ParameterError("split id " + std::to_string(id) + " appears twice");
    }
}

EvalSplit split_by_tag(const std::vector<std::string>& tags, const std::string& base_tag) {
  EvalSplit s;
  for (std::size_t i = 0; i < tags.size(); ++i) (tags[i] == base_tag ? s.base : s.anomaly).push_back(i);
  s.check(tags.size());
  return s;
}

std::string space_name(Space s) { return s == Space::kLatent ? "latent" : "input"; }

Space parse_space(const std::string& name) {
  if (name == "latent") return Space::kLatent;
  if (name == "input") return Space::kInput;
  throw ParameterError("unknown space '" + name + "' (expected latent or input)");
}

namespace {

AucResult assemble(const EvalSplit& split, const std::vector<double>& base_scores,
                   const std::vector<double>& anomaly_scores) {
  AucResult r;
  for (std::size_t i = 0; i < split.base.size(); ++i) {
    r.scored.ids.push_back(split.base[i]);
    r.scored.scores.push_back(base_scores[i]);
    r.scored.labels.push_back(0);
  }
  for (std::size_t i = 0; i < split.anomaly.size(); ++i) {
    r.scored.ids.push_back(split.anomaly[i]);
    r.scored.scores.push_back(anomaly_scores[i]);
    r.scored.labels.push_back(1);
  }
  r.auc = outlier::auc(r.scored);
  return r;
}

Matrix pick(const Matrix& points, const std::vector<std::size_t>& ids) {
  Matrix out;
  out.reserve(ids.size());
  for (std::size_t id : ids) out.push_back(points[id]);
  return out;
}

}  // namespace

AucResult run_auc_experiment(const Matrix& points, const EvalSplit& split, outlier::DetectorKind kind,
                             const outlier::DetectorParams& params) {
  split.check(points.size());
  const Matrix base = pick(points, split.base);
  const auto detector = outlier::fit(kind, base, params);
  return assemble(split, detector->score(base), detector->score(pick(points, split.anomaly)));
}

AucResult run_recon_experiment(const models::Checkpoint& ckpt, const std::vector<const raster::Image*>& images,
                               const EvalSplit& split) {
  split.check(images.size());
  auto sub = [&](const std::vector<std::size_t>& ids) {
    std::vector<const raster::Image*> out;
    for (std::size_t id : ids) out.push_back(images[id]);
    return outlier::recon_scores(ckpt, out);
  };
  return assemble(split, sub(split.base), sub(split.anomaly));
}

// ---------------------------------------------------------------------------

Matrix pca_project(const Matrix& z, std::size_t dims) {
  if (z.size() < 2) throw ParameterError("projection needs at least two points");
  const std::size_t m = z.size(), l = z.front().size();
  if (dims == 0 || dims > l)
    throw ParameterError("cannot project " + std::to_string(l) + "-d points onto " + std::to_string(dims) + " axes");
  Eigen::MatrixXd a(m, l);
  for (std::size_t i = 0; i < m; ++i) {
    if (z[i].size() != l) throw ShapeError("rows differ in length");
    for (std::size_t j = 0; j < l; ++j) a(long(i), long(j)) = z[i][j];
  }
  a.rowwise() -= a.colwise().mean();
  if (a.squaredNorm() == 0.0) throw FitError("projection is degenerate: points have no variance");
  const Eigen::MatrixXd cov = a.transpose() * a;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
  if (solver.info() != Eigen::Success) throw SolverError("eigendecomposition failed");
  Eigen::MatrixXd axes(l, dims);
  for (std::size_t d = 0; d < dims; ++d) {
    Eigen::VectorXd v = solver.eigenvectors().col(long(l - 1 - d));  // ascending eigenvalues
    Eigen::Index arg = 0;
    v.cwiseAbs().maxCoeff(&arg);
    if (v(arg) < 0) v = -v;
    axes.col(long(d)) = v;
  }
  const Eigen::MatrixXd p = a * axes;
  Matrix out(m, std::vector<double>(dims));
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t d = 0; d < dims; ++d) out[i][d] = p(long(i), long(d));
  return out;
}

// ---------------------------------------------------------------------------

std::string report_json(const Report& r) {
  std::set<std::string> columns;
  for (const auto& row : r.auc)
    for (const auto& [k, v] : row.auc) columns.insert(k);
  json rows = json::array();
  for (const auto& row : r.auc) rows.push_back({{"name", row.name}, {"auc", row.auc}});
  json curves = json::array();
  for (const auto& c : r.d_local) {
    std::vector<std::size_t> ks(c.values.size());
    for (std::size_t i = 0; i < ks.size(); ++i) ks[i] = i + 1;
    curves.push_back({{"name", c.name}, {"k", ks}, {"values", c.values}});
  }
  json scores = json::array();
  for (const auto& [name, s] : r.scores) scores.push_back("scores_" + name + ".csv");
  json j = {{"format_version", 1},
            {"auc_table", {{"columns", columns}, {"rows", rows}}},
            {"d_local", curves},
            {"projection", r.projection.empty() ? json(nullptr) : json("projection.csv")},
            {"score_files", scores}};
  return j.dump(2) + "\n";
}

namespace {

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot write " + path.string());
  f << text;
  if (!f) throw IoError("write failed: " + path.string());
}

}  // namespace

std::string projection_to_csv(const std::vector<ProjectionPoint>& points) {
  std::string csv = "id,x,y,tag\n";
  char buf[128];
  for (const auto& p : points) {
    std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g,", p.id, p.x, p.y);
    csv += buf + p.tag + "\n";
  }
  return csv;
}

void export_report(const Report& r, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
  write_file(dir / "report.json", report_json(r));
  write_file(dir / "projection.csv", projection_to_csv(r.projection));
  for (const auto& [name, s] : r.scores) outlier::write_scores_csv(s, dir / ("scores_" + name + ".csv"));
}

}  // namespace scenenov::eval
