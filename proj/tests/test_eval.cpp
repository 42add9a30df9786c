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

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "doctest.h"
#include "json.hpp"
#include "oracles.hpp"
#include "scenenov/errors.hpp"
#include "scenenov/eval/eval.hpp"

using namespace scenenov;
using namespace scenenov::eval;
namespace fs = std::filesystem;

namespace {

Matrix gaussian(std::size_t n, std::size_t d, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  Matrix m(n, std::vector<double>(d));
  for (auto& r : m)
    for (double& v : r) v = g(rng);
  return m;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::stringstream s;
  s << f.rdbuf();
  return s.str();
}

double dist(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(s);
}

}  // namespace

TEST_CASE("d_local agrees with an exhaustive computation") {
  const Matrix z = gaussian(20, 5, 1), x = gaussian(20, 64, 2);
  for (std::size_t k : {1, 5, 19}) {
    CAPTURE(k);
    CHECK(std::abs(d_local(z, x, k) - test::exhaustive_d_local(z, x, k)) <= 1e-10);
  }
  const auto curve = d_local_curve(z, x, 19);
  REQUIRE(curve.size() == 19);
  for (std::size_t k = 1; k <= 19; ++k) CHECK(std::abs(curve[k - 1] - test::exhaustive_d_local(z, x, k)) <= 1e-10);
}

TEST_CASE("d_local special cases") {
  const Matrix z = gaussian(12, 3, 4);
  const Matrix same(12, std::vector<double>(16, 0.5));
  CHECK(d_local(z, same, 5) == 0.0);

  const Matrix z2 = {{0.0}, {1.0}}, x2 = {{0.0, 0.0}, {3.0, 4.0}};
  CHECK(d_local(z2, x2, 1) == doctest::Approx(5.0));

  Matrix z3 = z;
  for (auto& r : z3)
    for (double& v : r) v *= 3.0;
  const Matrix x = gaussian(12, 8, 5);
  CHECK(d_local(z3, x, 4) == d_local(z, x, 4));

  // Latent ties go to the lower index.
  const Matrix zt = {{0.0}, {1.0}, {-1.0}}, xt = {{0.0}, {10.0}, {20.0}};
  CHECK(d_local(zt, xt, 1) == doctest::Approx((10.0 + 10.0 + 20.0) / 3.0));

  CHECK_THROWS_AS(d_local(z, x, 0), ParameterError);
  CHECK_THROWS_AS(d_local(z, x, 12), ParameterError);
  CHECK_THROWS_AS(d_local(z, gaussian(11, 8, 5), 3), ShapeError);
}

TEST_CASE("image rows flatten pixels") {
  raster::Image a(8, 0.25f), b(8, 1.0f);
  b.at(1, 2) = 0.5f;
  const Matrix rows = image_rows({&a, &b});
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].size() == 64);
  CHECK(rows[0][5] == 0.25);
  CHECK(rows[1][10] == 0.5);
}

TEST_CASE("splits by tag") {
  const auto s = split_by_tag({"highway", "crossing4", "highway", "roundabout3"}, "highway");
  CHECK(s.base == std::vector<std::size_t>{0, 2});
  CHECK(s.anomaly == std::vector<std::size_t>{1, 3});
  CHECK_THROWS_AS(split_by_tag({"highway", "highway"}, "highway"), ParameterError);
  CHECK_THROWS_AS(split_by_tag({"a", "b"}, "highway"), ParameterError);
  EvalSplit bad{{0, 1}, {1}};
  CHECK_THROWS_AS(bad.check(3), ParameterError);
  EvalSplit range{{0}, {5}};
  CHECK_THROWS_AS(range.check(3), ParameterError);
  CHECK(parse_space(space_name(Space::kInput)) == Space::kInput);
  CHECK(parse_space("latent") == Space::kLatent);
  CHECK_THROWS_AS(parse_space("pixel"), ParameterError);
}

TEST_CASE("PCA projection") {
  SUBCASE("collinear points map to the line") {
    Matrix z;
    for (int i = 0; i < 5; ++i) z.push_back({double(i), 2.0 * i, -double(i)});
    const Matrix p = pca_project(z, 2);
    const double unit = std::sqrt(6.0);
    for (int i = 0; i < 5; ++i) {
      CHECK(p[i][0] == doctest::Approx((i - 2) * unit));
      CHECK(std::abs(p[i][1]) < 1e-9);
    }
  }
  SUBCASE("pairwise distances survive a rotation of the input") {
    Matrix z = gaussian(30, 2, 9);
    for (auto& r : z) r[0] *= 3.0;
    const double c = std::cos(0.7), s = std::sin(0.7);
    Matrix r = z;
    for (auto& v : r) v = {c * v[0] - s * v[1] + 4.0, s * v[0] + c * v[1] - 1.0};
    const Matrix a = pca_project(z), b = pca_project(r);
    for (std::size_t i = 0; i < 30; ++i)
      for (std::size_t j = 0; j < 30; ++j) CHECK(dist(a[i], a[j]) == doctest::Approx(dist(z[i], z[j])));
    for (std::size_t i = 0; i < 30; ++i) {
      CHECK(a[i][0] == doctest::Approx(b[i][0]));
      CHECK(a[i][1] == doctest::Approx(b[i][1]));
    }
  }
  SUBCASE("first axis carries the most variance") {
    const Matrix p = pca_project(gaussian(50, 6, 3), 3);
    double v[3] = {0, 0, 0};
    for (const auto& r : p)
      for (int d = 0; d < 3; ++d) v[d] += r[d] * r[d];
    CHECK(v[0] >= v[1]);
    CHECK(v[1] >= v[2]);
  }
  CHECK_THROWS_AS(pca_project(Matrix(4, {1.0, 2.0})), FitError);
  CHECK_THROWS_AS(pca_project({{1.0, 2.0}}), ParameterError);
  CHECK_THROWS_AS(pca_project(gaussian(5, 2, 1), 3), ParameterError);
}

TEST_CASE("AUC experiments list base rows first and ignore row order") {
  Matrix pts = gaussian(60, 4, 7);
  for (std::size_t i = 50; i < 60; ++i)
    for (double& v : pts[i]) v += 6.0;
  EvalSplit split;
  for (std::size_t i = 0; i < 60; ++i) (i < 50 ? split.base : split.anomaly).push_back(i);
  outlier::DetectorParams params;
  params.lof_k = 8;
  const auto r = run_auc_experiment(pts, split, outlier::DetectorKind::kLof, params);
  CHECK(r.auc == 1.0);
  REQUIRE(r.scored.ids.size() == 60);
  CHECK(r.scored.ids[0] == 0);
  CHECK(r.scored.labels[49] == 0);
  CHECK(r.scored.labels[50] == 1);

  EvalSplit reversed = split;
  std::reverse(reversed.base.begin(), reversed.base.end());
  const auto r2 = run_auc_experiment(pts, reversed, outlier::DetectorKind::kLof, params);
  CHECK(r2.auc == r.auc);
  for (std::size_t i = 0; i < 50; ++i) CHECK(r2.scored.scores[i] == r.scored.scores[49 - i]);
  CHECK(run_auc_experiment(pts, split, outlier::DetectorKind::kIForest, params).scored.scores ==
        run_auc_experiment(pts, split, outlier::DetectorKind::kIForest, params).scored.scores);
}

TEST_CASE("report JSON layout and export") {
  Report r;
  r.auc.push_back({"vit", {{"lof", 0.75}, {"abod", 1.0}}});
  r.auc.push_back({"res_small", {{"lof", 0.5}, {"ocsvm", 0.25}}});
  r.d_local.push_back({"vit", {1.0, 1.5, 2.0}});
  r.projection.push_back({3, 0.5, -1.0, "highway"});
  r.scores["vit_lof"] = outlier::ScoredSet{{0, 1}, {0.1, 0.9}, {0, 1}};

  const auto j = nlohmann::json::parse(report_json(r));
  CHECK(j["format_version"] == 1);
  CHECK(j["auc_table"]["columns"] == nlohmann::json({"abod", "lof", "ocsvm"}));
  CHECK(j["auc_table"]["rows"][1]["name"] == "res_small");
  CHECK(j["auc_table"]["rows"][1]["auc"]["ocsvm"] == 0.25);
  CHECK(j["d_local"][0]["k"] == nlohmann::json({1, 2, 3}));
  CHECK(j["d_local"][0]["values"][2] == 2.0);
  CHECK(j["projection"] == "projection.csv");
  CHECK(j["score_files"] == nlohmann::json({"scores_vit_lof.csv"}));
  CHECK(report_json(r) == report_json(r));

  const auto empty = nlohmann::json::parse(report_json(Report{}));
  CHECK(empty["auc_table"]["rows"].empty());
  CHECK(empty["projection"].is_null());

  const fs::path dir = fs::temp_directory_path() / "scenenov_eval_report";
  fs::remove_all(dir);
  export_report(r, dir);
  CHECK(slurp(dir / "report.json") == report_json(r));
  CHECK(slurp(dir / "projection.csv") == "id,x,y,tag\n3,0.5,-1,highway\n");
  CHECK(slurp(dir / "scores_vit_lof.csv") == outlier::scores_to_csv(r.scores["vit_lof"]));
  fs::remove_all(dir);
}
