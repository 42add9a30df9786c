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

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "doctest.h"
#include "oracles.hpp"
#include "scenenov/errors.hpp"
#include "scenenov/outlier/outlier.hpp"

using namespace scenenov;
using namespace scenenov::outlier;
namespace fs = std::filesystem;

namespace {

Matrix gaussian(std::size_t n, std::size_t d, std::uint64_t seed, double scale = 1.0) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g(0.0, scale);
  Matrix m(n, std::vector<double>(d));
  for (auto& r : m)
    for (double& v : r) v = g(rng);
  return m;
}

// Generated in lexicographic order so stored and given row order agree.
Matrix grid(std::size_t n) {
  Matrix m;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) m.push_back({double(i), double(j)});
  return m;
}

DetectorParams small_params() {
  DetectorParams p;
  p.lof_k = 10;
  p.abod_k = 10;
  p.trees = 50;
  p.subsample = 64;
  p.seed = 3;
  return p;
}

const DetectorKind kFitted[] = {DetectorKind::kLof, DetectorKind::kAbod, DetectorKind::kIForest, DetectorKind::kOcsvm};

}  // namespace

TEST_CASE("detector names round trip") {
  for (auto k : {DetectorKind::kLof, DetectorKind::kAbod, DetectorKind::kIForest, DetectorKind::kOcsvm,
                 DetectorKind::kRecon})
    CHECK(parse_detector(detector_name(k)) == k);
  CHECK_THROWS_AS(parse_detector("knn"), ParameterError);
}

TEST_CASE("LOF matches a direct evaluation and is near one inside a grid") {
  const Matrix base = grid(10);
  Lof lof(base, 4);
  const auto s = lof.score(base);
  for (std::size_t i = 0; i < base.size(); ++i) CHECK(s[i] == doctest::Approx(test::naive_lof(base, base[i], 4)).epsilon(1e-12));
  for (std::size_t i = 2; i < 8; ++i)
    for (std::size_t j = 2; j < 8; ++j) {
      const double v = s[i * 10 + j];
      CHECK(v >= 0.9);
      CHECK(v <= 1.2);
    }

  const Matrix rand = gaussian(60, 3, 11);
  Lof lof2(rand, 7);
  const Matrix q = gaussian(10, 3, 12, 2.0);
  const auto s2 = lof2.score(q);
  for (std::size_t i = 0; i < q.size(); ++i) CHECK(s2[i] == doctest::Approx(test::naive_lof(rand, q[i], 7)).epsilon(1e-12));
}

TEST_CASE("ABOF of a far point is below that of an interior point") {
  const Matrix base = gaussian(80, 4, 5);
  Abod abod(base, 15);
  const double inside = abod.abof({0.0, 0.0, 0.0, 0.0});
  const double outside = abod.abof({8.0, -8.0, 8.0, 0.0});
  CHECK(outside < inside);
  CHECK(outside > 0.0);
  CHECK(abod.score({{8.0, -8.0, 8.0, 0.0}})[0] == -outside);
}

TEST_CASE("ABOF agrees with a two-loop weighted variance") {
  const Matrix base = gaussian(30, 3, 21);
  const std::size_t k = 6;
  Abod abod(base, k);
  const std::vector<double> q = {0.3, -0.2, 1.1};
  std::vector<std::pair<double, std::size_t>> nn;
  for (std::size_t j = 0; j < base.size(); ++j) {
    double d = 0.0;
    for (std::size_t t = 0; t < 3; ++t) d += (base[j][t] - q[t]) * (base[j][t] - q[t]);
    nn.push_back({d, j});
  }
  std::sort(nn.begin(), nn.end());
  nn.resize(k);
  double sw = 0.0, swv = 0.0, swv2 = 0.0;
  for (std::size_t a = 0; a < k; ++a)
    for (std::size_t b = a + 1; b < k; ++b) {
      const auto& A = base[nn[a].second];
      const auto& B = base[nn[b].second];
      double dot = 0.0;
      for (std::size_t t = 0; t < 3; ++t) dot += (A[t] - q[t]) * (B[t] - q[t]);
      const double v = dot / (nn[a].first * nn[b].first);
      const double w = 1.0 / std::sqrt(nn[a].first * nn[b].first);
      sw += w;
      swv += w * v;
      swv2 += w * v * v;
    }
  const double expected = swv2 / sw - (swv / sw) * (swv / sw);
  CHECK(abod.abof(q) == doctest::Approx(expected).epsilon(1e-9));
}

TEST_CASE("iforest normalizer uses harmonic numbers") {
  CHECK(iforest_c(0) == 0.0);
  CHECK(iforest_c(1) == 0.0);
  CHECK(iforest_c(2) == doctest::Approx(1.0));
  double h = 0.0;
  for (int i = 1; i <= 9; ++i) h += 1.0 / i;
  CHECK(iforest_c(10) == doctest::Approx(2.0 * h - 2.0 * 9.0 / 10.0).epsilon(1e-14));
  const double n = 100000.0;
  CHECK(iforest_c(100000) == doctest::Approx(2.0 * (std::log(n - 1.0) + 0.5772156649015329) - 2.0 * (n - 1.0) / n).epsilon(1e-6));
}

TEST_CASE("isolation forest is seeded and bounded") {
  const Matrix base = gaussian(300, 5, 8);
  IForest a(base, 20, 256, 9), b(base, 20, 256, 9), c(base, 20, 256, 10);
  CHECK(a.sample_size() == 256);
  CHECK(a.trees() == b.trees());
  CHECK(a.trees() != c.trees());
  const auto sa = a.score(base), sb = b.score(base);
  CHECK(sa == sb);
  const std::size_t limit = 8;
  for (const auto& tree : a.trees()) {
    std::size_t leaves = 0, total = 0;
    std::vector<std::pair<std::int32_t, std::size_t>> stack = {{0, 0}};
    while (!stack.empty()) {
      const auto [n, depth] = stack.back();
      stack.pop_back();
      CHECK(depth <= limit);
      if (tree[n].feature < 0) {
        ++leaves;
        total += tree[n].size;
      } else {
        stack.push_back({tree[n].left, depth + 1});
        stack.push_back({tree[n].right, depth + 1});
      }
    }
    CHECK(total == 256);
    CHECK(leaves >= 2);
  }
  for (double v : sa) {
    CHECK(v > 0.0);
    CHECK(v < 1.0);
  }
  IForest small(gaussian(10, 2, 1), 5, 256, 0);
  CHECK(small.sample_size() == 10);
}

TEST_CASE("OCSVM satisfies its optimality conditions and the nu bounds") {
  const Matrix base = gaussian(200, 5, 13);
  for (double nu : {0.05, 0.1, 0.3}) {
    Ocsvm svm(base, nu, 0.0, 1e-6, 10'000'000);
    CHECK(svm.gamma() == doctest::Approx(0.2));
    CHECK(svm.upper_bound() == doctest::Approx(1.0 / (nu * 200.0)));
    double sum = 0.0;
    std::size_t sv = 0;
    for (double a : svm.alpha()) {
      CHECK(a >= 0.0);
      CHECK(a <= svm.upper_bound());
      sum += a;
      sv += a > 0.0;
    }
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(svm.kkt_residual() <= 1e-4);
    std::size_t outside = 0;
    for (const auto& r : base) outside += svm.decision(r) < -1e-4;
    CHECK(double(outside) / 200.0 <= nu + 0.02);
    CHECK(double(sv) / 200.0 >= nu - 0.02);
  }
  CHECK_THROWS_AS(Ocsvm(base, 0.0, 0.0, 1e-6, 100), ParameterError);
  CHECK_THROWS_AS(Ocsvm(base, 1.5, 0.0, 1e-6, 100), ParameterError);
  CHECK_THROWS_AS(Ocsvm(base, 0.1, 0.0, 1e-6, 1), SolverError);
}

TEST_CASE("every detector ranks a planted outlier above the center") {
  const Matrix base = gaussian(120, 6, 17);
  const Matrix q = {std::vector<double>(6, 0.0), std::vector<double>(6, 6.0)};
  for (auto kind : kFitted) {
    CAPTURE(detector_name(kind));
    const auto det = fit(kind, base, small_params());
    CHECK(det->kind() == kind);
    CHECK(det->dim() == 6);
    CHECK(det->base_size() == 120);
    const auto s = det->score(q);
    CHECK(std::isfinite(s[0]));
    CHECK(std::isfinite(s[1]));
    CHECK(s[1] > s[0]);
    CHECK(det->score(q) == s);
  }
}

TEST_CASE("fits do not depend on base row order") {
  Matrix base = gaussian(90, 4, 23);
  const Matrix q = gaussian(20, 4, 24, 1.5);
  std::mt19937_64 rng(1);
  Matrix shuffled = base;
  std::shuffle(shuffled.begin(), shuffled.end(), rng);
  for (auto kind : kFitted) {
    CAPTURE(detector_name(kind));
    CHECK(fit(kind, base, small_params())->score(q) == fit(kind, shuffled, small_params())->score(q));
  }
}

TEST_CASE("detectors separate well-separated outliers") {
  const Matrix base = gaussian(200, 10, 31);
  Matrix outliers = gaussian(20, 10, 32);
  for (auto& r : outliers) {
    double n = 0.0;
    for (double v : r) n += v * v;
    for (double& v : r) v *= 10.0 / std::sqrt(n);
  }
  for (auto kind : kFitted) {
    CAPTURE(detector_name(kind));
    const auto det = fit(kind, base, DetectorParams{});
    auto s = det->score(base);
    const auto so = det->score(outliers);
    std::vector<int> labels(s.size(), 0);
    s.insert(s.end(), so.begin(), so.end());
    labels.resize(s.size(), 1);
    CHECK(auc(s, labels) >= 0.95);
  }
}

TEST_CASE("detector input errors") {
  const Matrix base = gaussian(30, 3, 2);
  CHECK_THROWS_AS(Lof({}, 5), ParameterError);
  CHECK_THROWS_AS(Lof(gaussian(5, 3, 1), 5), ParameterError);
  CHECK_THROWS_AS(Lof(base, 0), ParameterError);
  CHECK_THROWS_AS(Abod(base, 1), ParameterError);
  CHECK_THROWS_AS(Lof(Matrix(10, {1.0, 2.0}), 3), FitError);
  CHECK_THROWS_AS(Abod(Matrix(10, {1.0, 2.0}), 3), FitError);
  CHECK_THROWS_AS(IForest(base, 0, 64, 0), ParameterError);
  Matrix ragged = base;
  ragged[4].pop_back();
  CHECK_THROWS_AS(Lof(ragged, 3), ShapeError);
  Matrix bad = base;
  bad[2][1] = NAN;
  CHECK_THROWS_AS(Abod(bad, 3), NumericError);
  Lof lof(base, 3);
  CHECK_THROWS_AS(lof.score({{1.0, 2.0}}), ShapeError);
  CHECK_THROWS_AS(fit(DetectorKind::kRecon, base, DetectorParams{}), ParameterError);
}

TEST_CASE("AUC equals the pair count") {
  std::mt19937_64 rng(99);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 2 + rng() % 60;
    std::vector<double> s(n);
    std::vector<int> y(n);
    for (std::size_t i = 0; i < n; ++i) {
      s[i] = double(rng() % 12) * 0.25;  // frequent ties
      y[i] = int(rng() % 2);
    }
    y[0] = 0;
    y[1] = 1;
    const double a = auc(s, y);
    CHECK(std::abs(a - test::pair_count_auc(s, y)) <= 1e-12);
    std::vector<double> t(n);
    for (std::size_t i = 0; i < n; ++i) t[i] = std::exp(3.0 * s[i]) - 7.0;
    CHECK(auc(t, y) == a);
  }
}

TEST_CASE("AUC examples and errors") {
  CHECK(auc({0.1, 0.2, 0.9, 0.8}, {0, 0, 1, 1}) == 1.0);
  CHECK(auc({0.9, 0.8, 0.1, 0.2}, {0, 0, 1, 1}) == 0.0);
  CHECK(auc({0.5, 0.5, 0.5}, {0, 1, 1}) == 0.5);
  CHECK(auc({0.1, 0.3, 0.2, 0.4}, {0, 1, 0, 1}) == 1.0);
  CHECK(auc({0.1, 0.3, 0.2, 0.4}, {1, 0, 0, 1}) == 0.5);
  CHECK_THROWS_AS(auc({0.1, 0.2}, {0, 0}), ParameterError);
  CHECK_THROWS_AS(auc({0.1, 0.2}, {0, 2}), ParameterError);
  CHECK_THROWS_AS(auc({0.1, NAN}, {0, 1}), NumericError);
  CHECK_THROWS_AS(auc({0.1}, {0, 1}), ShapeError);
}

TEST_CASE("score CSV") {
  ScoredSet s{{4, 7}, {0.5, 1.0 / 3.0}, {0, 1}};
  const std::string csv = scores_to_csv(s);
  std::istringstream in(csv);
  std::string line;
  std::getline(in, line);
  CHECK(line == "id,score,label");
  std::getline(in, line);
  CHECK(line == "4,0.5,0");
  std::getline(in, line);
  CHECK(line.rfind("7,", 0) == 0);
  CHECK(std::stod(line.substr(2, line.size() - 4)) == 1.0 / 3.0);
  CHECK(line.substr(line.size() - 2) == ",1");

  const fs::path p = fs::temp_directory_path() / "scenenov_scores_test.csv";
  write_scores_csv(s, p);
  std::ifstream f(p);
  std::stringstream back;
  back << f.rdbuf();
  CHECK(back.str() == csv);
  fs::remove(p);
  s.labels.pop_back();
  CHECK_THROWS_AS(scores_to_csv(s), ShapeError);
}
