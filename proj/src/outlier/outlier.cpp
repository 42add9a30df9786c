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

#include "scenenov/outlier/outlier.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <random>

#include "scenenov/errors.hpp"

namespace scenenov::outlier {

std::string detector_name(DetectorKind k) {
  switch (k) {
    case DetectorKind::kLof: return "lof";
    case DetectorKind::kAbod: return "abod";
    case DetectorKind::kIForest: return "iforest";
    case DetectorKind::kOcsvm: return "ocsvm";
    case DetectorKind::kRecon: return "recon";
  }
  return "?";
}

DetectorKind parse_detector(const std::string& name) {
  for (auto k : {DetectorKind::kLof, DetectorKind::kAbod, DetectorKind::kIForest, DetectorKind::kOcsvm,
                 DetectorKind::kRecon})
    if (detector_name(k) == name) return k;
  throw ParameterError("unknown detector '" + name + "' (expected lof, abod, iforest, ocsvm or recon)");
}

// ---------------------------------------------------------------------------

Detector::Detector(const Matrix& base, std::size_t min_rows) {
  if (base.empty()) throw ParameterError("detector needs at least one base point");
  if (base.size() < min_rows)
    throw ParameterError("detector needs at least " + std::to_string(min_rows) + " base points, got " +
                         std::to_string(base.size()));
  dim_ = base.front().size();
  if (dim_ == 0) throw ShapeError("base points have no coordinates");
  for (std::size_t i = 0; i < base.size(); ++i) {
    if (base[i].size() != dim_)
      throw ShapeError("base row " + std::to_string(i) + " has length " + std::to_string(base[i].size()) +
                       ", expected " + std::to_string(dim_));
    for (double v : base[i])
      if (!std::isfinite(v)) throw NumericError("base row " + std::to_string(i) + " is not finite");
  }
  std::vector<const std::vector<double>*> sorted;
  for (const auto& r : base) sorted.push_back(&r);
  std::stable_sort(sorted.begin(), sorted.end(), [](const auto* a, const auto* b) { return *a < *b; });
  m_ = base.size();
  base_.reserve(m_ * dim_);
  for (const auto* r : sorted) base_.insert(base_.end(), r->begin(), r->end());
}

double Detector::distance2(const double* a, const double* b) const {
  double s = 0.0;
  for (std::size_t k = 0; k < dim_; ++k) s += (a[k] - b[k]) * (a[k] - b[k]);
  return s;
}

std::vector<std::pair<double, std::size_t>> Detector::nearest(const double* q, std::size_t k) const {
  std::vector<std::pair<double, std::size_t>> d;
  d.reserve(m_);
  for (std::size_t i = 0; i < m_; ++i) {
    const double d2 = distance2(q, row(i));
    if (d2 > 0.0) d.emplace_back(d2, i);
  }
  k = std::min(k, d.size());
  std::partial_sort(d.begin(), d.begin() + long(k), d.end());
  d.resize(k);
  return d;
}

std::vector<double> Detector::score(const Matrix& query) const {
  std::vector<double> out;
  out.reserve(query.size());
  for (std::size_t i = 0; i < query.size(); ++i) {
    if (query[i].size() != dim_)
      throw ShapeError("query row " + std::to_string(i) + " has length " + std::to_string(query[i].size()) +
                       ", detector was fitted on " + std::to_string(dim_));
    out.push_back(score_one(query[i].data()));
  }
  return out;
}

namespace {

bool all_identical(const std::vector<double>& flat, std::size_t dim) {
  for (std::size_t i = dim; i < flat.size(); ++i)
    if (flat[i] != flat[i % dim]) return false;
  return true;
}

}  // namespace

// ---------------------------------------------------------------------------

Lof::Lof(const Matrix& base, std::size_t k) : Detector(base, k + 1), k_(k) {
  if (k == 0) throw ParameterError("LOF needs k >= 1");
  if (all_identical(base_, dim_)) throw FitError("LOF base points are all identical");
  k_distance_.resize(m_);
  std::vector<std::vector<std::pair<double, std::size_t>>> nn(m_);
  for (std::size_t i = 0; i < m_; ++i) {
    nn[i] = nearest(row(i), k_);
    k_distance_[i] = std::sqrt(nn[i].back().first);
  }
  lrd_.resize(m_);
  for (std::size_t i = 0; i < m_; ++i) {
    double reach = 0.0;
    for (const auto& [d2, o] : nn[i]) reach += std::max(k_distance_[o], std::sqrt(d2));
    lrd_[i] = double(nn[i].size()) / reach;
  }
}

double Lof::score_one(const double* q) const {
  const auto nn = nearest(q, k_);
  if (nn.empty()) throw FitError("query coincides with every base point");
  double reach = 0.0, lrd_sum = 0.0;
  for (const auto& [d2, o] : nn) {
    reach += std::max(k_distance_[o], std::sqrt(d2));
    lrd_sum += lrd_[o];
  }
  const double n = double(nn.size());
  const double lrd_q = n / reach;
  return (lrd_sum / n) / lrd_q;
}

// ---------------------------------------------------------------------------

Abod::Abod(const Matrix& base, std::size_t k) : Detector(base, k + 1), k_(k) {
  if (k < 2) throw ParameterError("ABOD needs k >= 2");
  if (all_identical(base_, dim_)) throw FitError("ABOD base points are all identical");
}

double Abod::abof(const std::vector<double>& q) const {
  if (q.size() != dim_) throw ShapeError("query has length " + std::to_string(q.size()) + ", expected " + std::to_string(dim_));
  return -score_one(q.data());
}

double Abod::score_one(const double* q) const {
  const auto nn = nearest(q, k_);
  if (nn.size() < 2) throw FitError("fewer than two distinct neighbors for ABOD");
  std::vector<double> diff(nn.size() * dim_);
  for (std::size_t a = 0; a < nn.size(); ++a)
    for (std::size_t t = 0; t < dim_; ++t) diff[a * dim_ + t] = row(nn[a].second)[t] - q[t];
  std::vector<double> values, weights;
  for (std::size_t a = 0; a < nn.size(); ++a) {
    for (std::size_t b = a + 1; b < nn.size(); ++b) {
      double dot = 0.0;
      for (std::size_t t = 0; t < dim_; ++t) dot += diff[a * dim_ + t] * diff[b * dim_ + t];
      const double na = nn[a].first, nb = nn[b].first;
      values.push_back(dot / (na * nb));
      weights.push_back(1.0 / std::sqrt(na * nb));
    }
  }
  double w_sum = 0.0, mean = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    w_sum += weights[i];
    mean += weights[i] * values[i];
  }
  mean /= w_sum;
  double var = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) var += weights[i] * (values[i] - mean) * (values[i] - mean);
  return -(var / w_sum);
}

// ---------------------------------------------------------------------------

double iforest_c(std::size_t n) {
  if (n <= 1) return 0.0;
  const double m = double(n - 1);
  double h;
  if (n - 1 <= 4096) {
    h = 0.0;
    for (std::size_t i = 1; i <= n - 1; ++i) h += 1.0 / double(i);
  } else {
    h = std::log(m) + 0.57721566490153286 + 1.0 / (2.0 * m);
  }
  return 2.0 * h - 2.0 * m / double(n);
}

namespace {

class TreeBuilder {
 public:
  TreeBuilder(const double* data, std::size_t dim, std::size_t limit, std::mt19937_64& rng)
      : data_(data), dim_(dim), limit_(limit), rng_(rng) {}

  IForest::Tree build(std::vector<std::size_t> rows) {
    tree_.clear();
    grow(rows, 0);
    return std::move(tree_);
  }

 private:
  std::int32_t grow(std::vector<std::size_t>& rows, std::size_t depth) {
    const auto id = std::int32_t(tree_.size());
    tree_.push_back({});
    tree_[id].size = rows.size();
    if (rows.size() <= 1 || depth >= limit_) return id;
    std::vector<std::size_t> features;
    std::vector<double> lo(dim_), hi(dim_);
    for (std::size_t f = 0; f < dim_; ++f) {
      lo[f] = hi[f] = data_[rows[0] * dim_ + f];
      for (std::size_t r : rows) {
        lo[f] = std::min(lo[f], data_[r * dim_ + f]);
        hi[f] = std::max(hi[f], data_[r * dim_ + f]);
      }
      if (lo[f] < hi[f]) features.push_back(f);
    }
    if (features.empty()) return id;
    const std::size_t f = features[std::uniform_int_distribution<std::size_t>(0, features.size() - 1)(rng_)];
    const double split = std::uniform_real_distribution<double>(lo[f], hi[f])(rng_);
    std::vector<std::size_t> left, right;
    for (std::size_t r : rows) (data_[r * dim_ + f] < split ? left : right).push_back(r);
    const std::int32_t l = grow(left, depth + 1);
    const std::int32_t rr = grow(right, depth + 1);
    tree_[id].feature = std::int32_t(f);
    tree_[id].threshold = split;
    tree_[id].left = l;
    tree_[id].right = rr;
    return id;
  }

  const double* data_;
  std::size_t dim_, limit_;
  std::mt19937_64& rng_;
  IForest::Tree tree_;
};

}  // namespace

IForest::IForest(const Matrix& base, std::size_t trees, std::size_t subsample, std::uint64_t seed)
    : Detector(base, 2) {
  if (trees == 0 || subsample < 2) throw ParameterError("isolation forest needs trees >= 1 and subsample >= 2");
  psi_ = std::min(subsample, m_);
  const auto limit = std::size_t(std::ceil(std::log2(double(psi_))));
  std::mt19937_64 rng(seed);
  TreeBuilder builder(base_.data(), dim_, limit, rng);
  std::vector<std::size_t> idx(m_);
  for (std::size_t t = 0; t < trees; ++t) {
    std::iota(idx.begin(), idx.end(), std::size_t(0));
    for (std::size_t i = 0; i < psi_; ++i)
      std::swap(idx[i], idx[std::uniform_int_distribution<std::size_t>(i, m_ - 1)(rng)]);
    trees_.push_back(builder.build(std::vector<std::size_t>(idx.begin(), idx.begin() + long(psi_))));
  }
}

double IForest::score_one(const double* q) const {
  double total = 0.0;
  for (const Tree& tree : trees_) {
    std::size_t depth = 0;
    std::int32_t n = 0;
    while (tree[n].feature >= 0) {
      n = q[tree[n].feature] < tree[n].threshold ? tree[n].left : tree[n].right;
      ++depth;
    }
    total += double(depth) + iforest_c(tree[n].size);
  }
  return std::exp2(-(total / double(trees_.size())) / iforest_c(psi_));
}

// ---------------------------------------------------------------------------

Ocsvm::Ocsvm(const Matrix& base, double nu, double gamma, double tolerance, std::size_t max_iterations)
    : Detector(base, 1), nu_(nu), gamma_(gamma > 0.0 ? gamma : 1.0 / double(base.front().size())) {
  if (!(nu > 0.0 && nu <= 1.0)) throw ParameterError("nu must lie in (0, 1]");
  if (!(tolerance > 0.0)) throw ParameterError("tolerance must be positive");
  const std::size_t m = m_;
  c_ = 1.0 / (nu_ * double(m));

  std::vector<double> K(m * m);
  for (std::size_t i = 0; i < m; ++i) {
    K[i * m + i] = 1.0;
    for (std::size_t j = 0; j < i; ++j) K[i * m + j] = K[j * m + i] = kernel(row(i), row(j));
  }

  // Feasible start: fill alphas at the bound until they sum to one.
  alpha_.assign(m, 0.0);
  double left = 1.0;
  for (std::size_t i = 0; i < m && left > 0.0; ++i) {
    alpha_[i] = std::min(c_, left);
    left -= alpha_[i];
  }
  gradient_.assign(m, 0.0);
  for (std::size_t j = 0; j < m; ++j)
    if (alpha_[j] > 0.0)
      for (std::size_t i = 0; i < m; ++i) gradient_[i] += alpha_[j] * K[i * m + j];

  for (;;) {
    std::size_t up = m, low = m;
    for (std::size_t t = 0; t < m; ++t) {
      if (alpha_[t] < c_ && (up == m || gradient_[t] < gradient_[up])) up = t;
      if (alpha_[t] > 0.0 && (low == m || gradient_[t] > gradient_[low])) low = t;
    }
    if (up == m || low == m || gradient_[low] - gradient_[up] < tolerance) break;
    if (++iterations_ > max_iterations)
      throw SolverError("one-class SVM did not converge within " + std::to_string(max_iterations) + " iterations");
    const std::size_t i = up, j = low;
    const double eta = std::max(K[i * m + i] + K[j * m + j] - 2.0 * K[i * m + j], 1e-12);
    double step = (gradient_[j] - gradient_[i]) / eta;
    step = std::min({step, c_ - alpha_[i], alpha_[j]});
    alpha_[i] = step == c_ - alpha_[i] ? c_ : alpha_[i] + step;
    alpha_[j] = step == alpha_[j] ? 0.0 : alpha_[j] - step;
    for (std::size_t t = 0; t < m; ++t) gradient_[t] += step * (K[t * m + i] - K[t * m + j]);
  }

  double free_sum = 0.0;
  std::size_t free_n = 0;
  double up_min = INFINITY, low_max = -INFINITY;
  for (std::size_t t = 0; t < m; ++t) {
    if (alpha_[t] > 0.0 && alpha_[t] < c_) {
      free_sum += gradient_[t];
      ++free_n;
    }
    if (alpha_[t] < c_) up_min = std::min(up_min, gradient_[t]);
    if (alpha_[t] > 0.0) low_max = std::max(low_max, gradient_[t]);
  }
  if (free_n > 0) rho_ = free_sum / double(free_n);
  else if (std::isfinite(up_min)) rho_ = 0.5 * (up_min + low_max);
  else rho_ = low_max;
}

double Ocsvm::kernel(const double* a, const double* b) const { return std::exp(-gamma_ * distance2(a, b)); }

double Ocsvm::score_one(const double* q) const {
  double f = 0.0;
  for (std::size_t i = 0; i < m_; ++i)
    if (alpha_[i] > 0.0) f += alpha_[i] * kernel(row(i), q);
  return -(f - rho_);
}

double Ocsvm::decision(const std::vector<double>& x) const {
  if (x.size() != dim_) throw ShapeError("query has length " + std::to_string(x.size()) + ", expected " + std::to_string(dim_));
  return -score_one(x.data());
}

double Ocsvm::kkt_residual() const {
  double worst = 0.0;
  for (std::size_t t = 0; t < m_; ++t) {
    const double g = gradient_[t] - rho_;
    if (alpha_[t] <= 0.0) worst = std::max(worst, -g);
    else if (alpha_[t] >= c_) worst = std::max(worst, g);
    else worst = std::max(worst, std::abs(g));
  }
  return worst;
}

// ---------------------------------------------------------------------------

std::unique_ptr<Detector> fit(DetectorKind kind, const Matrix& base, const DetectorParams& p) {
  switch (kind) {
    case DetectorKind::kLof: return std::make_unique<Lof>(base, p.lof_k);
    case DetectorKind::kAbod: return std::make_unique<Abod>(base, p.abod_k);
    case DetectorKind::kIForest: return std::make_unique<IForest>(base, p.trees, p.subsample, p.seed);
    case DetectorKind::kOcsvm: return std::make_unique<Ocsvm>(base, p.nu, p.gamma, p.tolerance, p.max_iterations);
    case DetectorKind::kRecon: break;
  }
  throw ParameterError("recon is scored from images, not fitted on points");
}

std::vector<double> recon_scores(const models::Checkpoint& ckpt, const std::vector<const raster::Image*>& images) {
  return models::reconstruction_errors(ckpt, images);
}

// ---------------------------------------------------------------------------

double auc(const std::vector<double>& scores, const std::vector<int>& labels) {
  if (scores.size() != labels.size()) throw ShapeError("scores and labels differ in length");
  std::vector<double> neg;
  std::size_t pos = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (!std::isfinite(scores[i])) throw NumericError("score " + std::to_string(i) + " is not finite");
    if (labels[i] == 0) neg.push_back(scores[i]);
    else if (labels[i] == 1) ++pos;
    else throw ParameterError("labels must be 0 or 1");
  }
  if (pos == 0 || neg.empty()) throw ParameterError("AUC is undefined unless both labels occur");
  std::sort(neg.begin(), neg.end());
  double wins = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (labels[i] != 1) continue;
    const auto lo = std::lower_bound(neg.begin(), neg.end(), scores[i]);
    const auto hi = std::upper_bound(lo, neg.end(), scores[i]);
    wins += double(lo - neg.begin()) + 0.5 * double(hi - lo);
  }
  return wins / (double(pos) * double(neg.size()));
}

double auc(const ScoredSet& s) { return auc(s.scores, s.labels); }

std::string scores_to_csv(const ScoredSet& s) {
  if (s.ids.size() != s.scores.size() || s.labels.size() != s.scores.size())
    throw ShapeError("scored set columns differ in length");
  std::string out = "id,score,label\n";
  char buf[96];
  for (std::size_t i = 0; i < s.ids.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%zu,%.17g,%d\n", s.ids[i], s.scores[i], s.labels[i]);
    out += buf;
  }
  return out;
}

void write_scores_csv(const ScoredSet& s, const std::filesystem::path& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot write " + path.string());
  f << scores_to_csv(s);
  if (!f) throw IoError("write failed: " + path.string());
}

}  // namespace scenenov::outlier
