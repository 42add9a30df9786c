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
#include <memory>
#include <string>
#include <vector>

#include "scenenov/models/models.hpp"

namespace scenenov::outlier {

// Row-major point set; every row has the same length.
using Matrix = std::vector<std::vector<double>>;

enum class DetectorKind { kLof, kAbod, kIForest, kOcsvm, kRecon };
std::string detector_name(DetectorKind k);       // "lof", "abod", ...
DetectorKind parse_detector(const std::string& name);

struct DetectorParams {
  std::size_t lof_k = 20;
  std::size_t abod_k = 15;
  std::size_t trees = 100;
  std::size_t subsample = 256;
  std::uint64_t seed = 0;
  double nu = 0.1;
  double gamma = 0.0;  // 0 selects 1 / L
  double tolerance = 1e-6;
  std::size_t max_iterations = 10'000'000;
};

// Fitted on base points; scores are oriented so that higher means more
// outlying. Immutable after construction.
class Detector {
 public:
  virtual ~Detector() = default;
  virtual DetectorKind kind() const = 0;
  std::size_t dim() const { return dim_; }
  std::size_t base_size() const { return m_; }
  // ShapeError when a row length differs from the base.
  std::vector<double> score(const Matrix& query) const;

 protected:
  // Rows are stored in lexicographic order, which makes every fit
  // independent of the order of the base rows.
  Detector(const Matrix& base, std::size_t min_rows);
  virtual double score_one(const double* q) const = 0;
  const double* row(std::size_t i) const { return base_.data() + i * dim_; }
  double distance2(const double* a, const double* b) const;
  // Up to k (squared distance, row) pairs with distance > 0, nearest first.
  std::vector<std::pair<double, std::size_t>> nearest(const double* q, std::size_t k) const;

  std::size_t dim_ = 0;
  std::size_t m_ = 0;
  std::vector<double> base_;  // m_ x dim_
};

// Neighbors exclude base points at distance zero from the query, so a base
// point scored against its own set is treated leave-one-out. Ties at equal
// distance go to the lower row index.
class Lof final : public Detector {
 public:
  Lof(const Matrix& base, std::size_t k);
  DetectorKind kind() const override { return DetectorKind::kLof; }
  std::size_t k() const { return k_; }

 private:
  double score_one(const double* q) const override;

  std::size_t k_;
  std::vector<double> k_distance_;
  std::vector<double> lrd_;
};

// Fast ABOD over the k nearest base points; score = -ABOF.
class Abod final : public Detector {
 public:
  Abod(const Matrix& base, std::size_t k);
  DetectorKind kind() const override { return DetectorKind::kAbod; }
  // Weighted angle variance; low values indicate outliers.
  double abof(const std::vector<double>& q) const;

 private:
  double score_one(const double* q) const override;
  std::size_t k_;
};

class IForest final : public Detector {
 public:
  struct Node {
    std::int32_t feature = -1;  // -1 for a leaf
    double threshold = 0.0;
    std::int32_t left = -1, right = -1;
    std::size_t size = 0;       // points reaching a leaf
    bool operator==(const Node&) const = default;
  };
  using Tree = std::vector<Node>;

  IForest(const Matrix& base, std::size_t trees, std::size_t subsample, std::uint64_t seed);
  DetectorKind kind() const override { return DetectorKind::kIForest; }
  const std::vector<Tree>& trees() const { return trees_; }
  std::size_t sample_size() const { return psi_; }

 private:
  double score_one(const double* q) const override;
  std::vector<Tree> trees_;
  std::size_t psi_ = 0;
};

// Average unsuccessful-search path length in a binary search tree of n
// points: 2 H(n-1) - 2 (n-1) / n.
double iforest_c(std::size_t n);

// nu-one-class SVM with an RBF kernel, solved by pairwise (SMO) updates.
class Ocsvm final : public Detector {
 public:
  Ocsvm(const Matrix& base, double nu, double gamma, double tolerance, std::size_t max_iterations);
  DetectorKind kind() const override { return DetectorKind::kOcsvm; }
  // f(x) = sum_i alpha_i k(x_i, x) - rho; the score is -f(x).
  double decision(const std::vector<double>& x) const;
  const std::vector<double>& alpha() const { return alpha_; }
  double rho() const { return rho_; }
  double gamma() const { return gamma_; }
  double upper_bound() const { return c_; }
  std::size_t iterations() const { return iterations_; }
  // Largest violation of the optimality conditions at the solution.
  double kkt_residual() const;

 private:
  double score_one(const double* q) const override;
  double kernel(const double* a, const double* b) const;

  double nu_, gamma_, c_ = 0.0, rho_ = 0.0;
  std::vector<double> alpha_;
  std::vector<double> gradient_;  // K alpha at the solution
  std::size_t iterations_ = 0;
};

// Any latent-space detector. RECON is not fitted on points; use
// recon_scores instead.
std::unique_ptr<Detector> fit(DetectorKind kind, const Matrix& base, const DetectorParams& params);

// Reconstruction-error baseline.
std::vector<double> recon_scores(const models::Checkpoint& ckpt, const std::vector<const raster::Image*>& images);

struct ScoredSet {
  std::vector<std::size_t> ids;
  std::vector<double> scores;
  std::vector<int> labels;  // 1 = outlier
};

// P(outlier score > inlier score) + 1/2 P(tie). ParameterError unless both
// labels occur; NumericError on non-finite scores.
double auc(const std::vector<double>& scores, const std::vector<int>& labels);
double auc(const ScoredSet& s);

// "id,score,label" rows.
std::string scores_to_csv(const ScoredSet& s);
void write_scores_csv(const ScoredSet& s, const std::filesystem::path& path);

}  // namespace scenenov::outlier
