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

// Acceptance runner: one PASS/FAIL line per criterion on stdout, progress on
// stderr. Exit status is nonzero when any criterion fails, except those listed
// with --known-unattainable, which are still reported as FAIL.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <random>
#include <set>
#include <sstream>

#include "CLI11.hpp"
#include "oracles.hpp"
#include "scenenov/autodiff/grad_check.hpp"
#include "scenenov/autodiff/ops.hpp"
#include "scenenov/cli/cli.hpp"
#include "scenenov/cli/experiment.hpp"
#include "scenenov/congraph/congraph.hpp"
#include "scenenov/errors.hpp"

using namespace scenenov;
namespace fs = std::filesystem;
using ad::Tape;
using ad::Tensor;
using ad::Var;
using outlier::DetectorKind;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
  std::string part;  // sub-criterion that failed, e.g. "7a"
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

void progress(const std::string& s) {
  std::fprintf(stderr, "  %s\n", s.c_str());
  std::fflush(stderr);
}

// ---------------------------------------------------------------------------
// 1. gradients

Tensor<double> randn(ad::Shape shape, std::mt19937_64& rng, double s = 1.0) {
  Tensor<double> t(shape);
  std::normal_distribution<double> n(0.0, s);
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = n(rng);
  return t;
}

// Values bounded away from zero so ReLU is probed off its kink.
Tensor<double> off_kink(ad::Shape shape, std::mt19937_64& rng) {
  Tensor<double> t = randn(shape, rng);
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = (t[i] < 0 ? -0.2 : 0.2) + t[i];
  return t;
}

// Scalar readout with distinct weights so every output element matters.
Var<double> readout(Var<double> v, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  Tensor<double> w = randn(v.value().shape(), rng);
  return ad::sum(ad::mul(v, v.tape->constant(w)));
}

Outcome criterion_gradients() {
  using In = std::vector<Var<double>>;
  using namespace ad;
  std::mt19937_64 rng(101);
  struct Case {
    const char* name;
    std::function<Var<double>(Tape<double>&, const In&)> fn;
    std::vector<Tensor<double>> inputs;
  };
  std::vector<Case> cases = {
      {"matmul", [](Tape<double>&, const In& v) { return readout(matmul(v[0], v[1]), 1); },
       {randn({2, 3, 4}, rng), randn({4, 5}, rng)}},
      {"matmul_tt", [](Tape<double>&, const In& v) { return readout(matmul(v[0], v[1], true, true), 2); },
       {randn({2, 4, 3}, rng), randn({2, 5, 4}, rng)}},
      {"linear", [](Tape<double>&, const In& v) { return readout(linear(v[0], v[1], v[2]), 3); },
       {randn({3, 4}, rng), randn({4, 2}, rng), randn({2}, rng)}},
      {"add", [](Tape<double>&, const In& v) { return readout(add(v[0], v[1]), 4); },
       {randn({3, 4}, rng), randn({4}, rng)}},
      {"sub", [](Tape<double>&, const In& v) { return readout(sub(v[0], v[1]), 5); },
       {randn({3, 4}, rng), randn({3, 4}, rng)}},
      {"mul", [](Tape<double>&, const In& v) { return readout(mul(v[0], v[1]), 6); },
       {randn({3, 4}, rng), randn({4}, rng)}},
      {"scale", [](Tape<double>&, const In& v) { return readout(scale(v[0], 0.7), 7); }, {randn({5}, rng)}},
      {"add_scalar", [](Tape<double>&, const In& v) { return readout(add_scalar(v[0], -0.4), 8); },
       {randn({5}, rng)}},
      {"relu", [](Tape<double>&, const In& v) { return readout(relu(v[0]), 9); }, {off_kink({3, 5}, rng)}},
      {"gelu", [](Tape<double>&, const In& v) { return readout(gelu(v[0]), 10); }, {randn({3, 5}, rng, 2.0)}},
      {"sigmoid", [](Tape<double>&, const In& v) { return readout(sigmoid(v[0]), 11); },
       {randn({3, 5}, rng, 3.0)}},
      {"softmax", [](Tape<double>&, const In& v) { return readout(softmax(v[0]), 12); }, {randn({3, 5}, rng)}},
      {"layernorm", [](Tape<double>&, const In& v) { return readout(layernorm(v[0], v[1], v[2]), 13); },
       {randn({3, 6}, rng), randn({6}, rng), randn({6}, rng)}},
      {"sum_all", [](Tape<double>&, const In& v) { return sum(mul(v[0], v[0])); }, {randn({2, 3}, rng)}},
      {"mean_all", [](Tape<double>&, const In& v) { return mean(mul(v[0], v[0])); }, {randn({2, 3}, rng)}},
      {"sum_axis", [](Tape<double>&, const In& v) { return readout(sum(v[0], 1), 14); }, {randn({2, 3, 4}, rng)}},
      {"mean_axis", [](Tape<double>&, const In& v) { return readout(mean(v[0], 2), 15); },
       {randn({2, 3, 4}, rng)}},
      {"reshape", [](Tape<double>&, const In& v) { return readout(reshape(v[0], {3, 4}), 16); },
       {randn({2, 6}, rng)}},
      {"permute", [](Tape<double>&, const In& v) { return readout(permute(v[0], {3, 1, 0, 2}), 17); },
       {randn({2, 3, 2, 4}, rng)}},
      {"concat", [](Tape<double>&, const In& v) { return readout(concat<double>({v[0], v[1]}, 0), 18); },
       {randn({2, 3}, rng), randn({1, 3}, rng)}},
      {"slice", [](Tape<double>&, const In& v) { return readout(slice(v[0], 2, 1, 3), 19); },
       {randn({2, 2, 4}, rng)}},
      {"repeat_leading", [](Tape<double>&, const In& v) { return readout(repeat_leading(v[0], 2), 20); },
       {randn({2, 3}, rng)}},
      {"squared_difference",
       [](Tape<double>&, const In& v) { return readout(squared_difference(v[0], v[1]), 21); },
       {randn({4, 3}, rng), randn({4, 3}, rng)}},
      {"conv2d", [](Tape<double>&, const In& v) { return readout(conv2d(v[0], v[1], v[2], 2, 1), 22); },
       {randn({2, 6, 6, 2}, rng), randn({3, 3, 2, 3}, rng), randn({3}, rng)}},
      {"upsample", [](Tape<double>&, const In& v) { return readout(upsample_nearest2x(v[0]), 23); },
       {randn({1, 2, 3, 2}, rng)}},
  };
  double worst = 0.0;
  std::string worst_name;
  for (auto& c : cases) {
    const double e = ad::grad_check(c.fn, c.inputs).max_rel_error;
    if (e > worst) {
      worst = e;
      worst_name = c.name;
    }
  }

  auto tiny = [](models::EncoderKind kind) {
    models::EncoderConfig c = kind == models::EncoderKind::kViT ? models::EncoderConfig::vit_s()
                                                                : models::EncoderConfig::res_small();
    c.image_size = 8;
    c.latent_dim = 4;
    c.patch_size = 4;
    c.n_layers = 1;
    c.embed_dim = 8;
    c.mlp_dim = 8;
    c.n_heads = 2;
    c.channels = {4, 8};
    c.decoder_base = 4;
    return c;
  };
  std::string model_detail;
  for (auto kind : {models::EncoderKind::kViT, models::EncoderKind::kResSmall}) {
    models::Model<double> model(tiny(kind), 3);
    std::mt19937_64 brng(7);
    std::normal_distribution<double> bn(0.0, 0.1);
    std::vector<ad::Parameter<double>*> params;
    for (auto& p : model.parameters()) {
      if (p.name.size() > 2 && p.name.substr(p.name.size() - 2) == ".b")
        for (std::size_t i = 0; i < p.value.size(); ++i) p.value[i] = bn(brng);
      params.push_back(&p);
    }
    std::mt19937_64 xr(11);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Tensor<double> x({3, 8, 8, 1});
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = u(xr);
    auto fn = [&](Tape<double>& tape) {
      Var<double> xs = tape.constant(x);
      Var<double> z = model.encode(tape, xs);
      Var<double> za = ad::slice(z, 0, 0, 1);
      Var<double> tri = models::triplet_loss(za, ad::slice(z, 0, 1, 2), ad::slice(z, 0, 2, 3), 50.0);
      Var<double> rec = models::recon_loss(ad::slice(xs, 0, 0, 1), model.decode(tape, za));
      return ad::add(ad::mean(tri), ad::scale(ad::mean(rec), 1.0));
    };
    const double e = ad::grad_check_params(fn, params).max_rel_error;
    model_detail += fmt(" %s=%.2e", models::encoder_name(kind).c_str(), e);
    if (e > worst) {
      worst = e;
      worst_name = models::encoder_name(kind) + " total_loss";
    }
  }
  return {worst < 1e-4,
          fmt("max rel error %.2e over %zu primitives and total_loss (worst: %s);%s", worst, cases.size(),
              worst_name.c_str(), model_detail.c_str())};
}

// ---------------------------------------------------------------------------
// 2. isomorphism

Outcome criterion_isomorphism() {
  std::mt19937_64 rng(2024);
  std::size_t agree = 0, iso = 0, key_split = 0;
  const std::size_t n_pairs = 200;
  for (std::size_t t = 0; t < n_pairs; ++t) {
    const std::size_t n = 1 + rng() % 7;
    const double density = 0.15 + 0.5 * double(rng() % 100) / 100.0;
    const congraph::ConnGraph a = test::random_digraph(rng, n, density);
    congraph::ConnGraph b;
    switch (t % 3) {
      case 0: b = congraph::relabeled(a, test::random_permutation(rng, n)); break;
      case 1: b = test::random_digraph(rng, n, density); break;
      default: {
        // Same size and edge count, one edge moved.
        auto edges = a.edges();
        b = congraph::relabeled(a, test::random_permutation(rng, n));
        if (!edges.empty() && n > 2) {
          std::vector<congraph::Edge> e = b.edges();
          std::set<std::pair<std::uint32_t, std::uint32_t>> have;
          for (auto& x : e) have.insert({x.first, x.second});
          for (int tries = 0; tries < 20; ++tries) {
            const std::uint32_t u = std::uint32_t(rng() % n), v = std::uint32_t(rng() % n);
            if (u == v || have.count({u, v})) continue;
            e[rng() % e.size()] = {u, v};
            break;
          }
          b = congraph::ConnGraph(n, e);
        }
      }
    }
    const bool expected = test::brute_force_isomorphic(a, b);
    const bool got = congraph::is_isomorphic(a, b);
    agree += expected == got;
    if (expected) {
      ++iso;
      key_split += congraph::canonical_key(a) != congraph::canonical_key(b);
    }
  }
  return {agree == n_pairs && key_split == 0,
          fmt("%zu/%zu pairs agree with brute force (%zu isomorphic); canonical_key separated %zu isomorphic pairs",
              agree, n_pairs, iso, key_split)};
}

// ---------------------------------------------------------------------------
// 3. loss unit values

Outcome criterion_losses() {
  using namespace models;
  std::vector<std::string> bad;
  auto expect = [&](const char* what, double got, double want) {
    if (!(got == want)) bad.push_back(fmt("%s: got %.17g want %.17g", what, got, want));
  };
  expect("triplet easy", triplet_loss_from_distances(0.5, 1.0, 0.2), 0.0);
  const std::vector<double> za = {0.3, -1.2, 0.5}, zp = {1.0, 0.25, -0.75};
  expect("triplet z_p = z_n", triplet_loss(std::span(za), std::span(zp), std::span(zp), 0.2), 0.2);
  expect("triplet arithmetic", triplet_loss_from_distances(1.0, 0.9, 0.2), 0.3);
  const std::vector<double> ones(64, 1.0), zeros(64, 0.0), img = {0.1, 0.7, 0.3, 0.9};
  expect("recon identical", recon_loss(std::span(img), std::span(img)), 0.0);
  expect("recon ones vs zeros", recon_loss(std::span(ones), std::span(zeros)), 64.0);
  const std::vector<double> other = {0.4, 0.2, 0.35, 0.0};
  expect("recon symmetric", recon_loss(std::span(img), std::span(other)), recon_loss(std::span(other), std::span(img)));
  expect("total both zero", total_loss(0.0, 0.0, 1.0), 0.0);
  expect("total no triplet", total_loss(0.7, 3.5, 0.25, false, true), 0.25 * 3.5);
  expect("total lambda 1", total_loss(0.7, 3.5, 1.0), 0.7 + 3.5);
  auto expect_index = [&](const char* what, std::size_t got, std::size_t want) {
    if (got != want) bad.push_back(fmt("%s: got %zu want %zu", what, got, want));
  };
  expect_index("select semi-hard", select_negative(0.5, std::vector<double>{0.4, 0.7, 2.0}, 0.3), 1);
  expect_index("select all easy", select_negative(0.5, std::vector<double>{2.0, 3.0}, 0.3), 0);
  expect_index("select all hard", select_negative(0.5, std::vector<double>{0.1, 0.3}, 0.3), 1);
  return {bad.empty(), bad.empty() ? "12 examples bit-exact" : bad.front()};
}

// ---------------------------------------------------------------------------
// 4. AUC

Outcome criterion_auc() {
  std::mt19937_64 rng(4);
  double worst = 0.0;
  std::size_t transform_mismatch = 0;
  for (int t = 0; t < 100; ++t) {
    const std::size_t n = 2 + rng() % 49;
    std::vector<double> s(n);
    std::vector<int> y(n);
    for (std::size_t i = 0; i < n; ++i) {
      s[i] = double(rng() % 10) / 4.0 - 1.0;
      y[i] = int(rng() % 2);
    }
    y[0] = 0;
    y[n - 1] = 1;
    const double a = outlier::auc(s, y);
    worst = std::max(worst, std::abs(a - test::pair_count_auc(s, y)));
    std::vector<double> t1(n), t2(n);
    for (std::size_t i = 0; i < n; ++i) {
      t1[i] = std::exp(s[i]);
      t2[i] = 5.0 * s[i] * s[i] * s[i] + s[i] + 2.0;
    }
    transform_mismatch += outlier::auc(t1, y) != a;
    transform_mismatch += outlier::auc(t2, y) != a;
  }
  return {worst <= 1e-12 && transform_mismatch == 0,
          fmt("max |auc - pair count| = %.1e over 100 sets; %zu monotone-transform mismatches", worst,
              transform_mismatch)};
}

// ---------------------------------------------------------------------------
// 5. planted outliers

Outcome criterion_planted() {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> g;
  std::uniform_real_distribution<double> radius(10.0, 12.0);
  outlier::Matrix base(200, std::vector<double>(50)), out(20, std::vector<double>(50));
  for (auto& r : base)
    for (double& v : r) v = g(rng);
  for (auto& r : out) {
    double norm = 0.0;
    for (double& v : r) {
      v = g(rng);
      norm += v * v;
    }
    const double scale = radius(rng) / std::sqrt(norm);
    for (double& v : r) v *= scale;
  }
  std::vector<int> labels(200, 0);
  labels.resize(220, 1);
  bool ok = true;
  std::string detail;
  const outlier::DetectorParams params;
  for (auto kind : {DetectorKind::kLof, DetectorKind::kAbod, DetectorKind::kIForest, DetectorKind::kOcsvm}) {
    const auto det = outlier::fit(kind, base, params);
    auto s = det->score(base);
    const auto so = det->score(out);
    s.insert(s.end(), so.begin(), so.end());
    const double a = outlier::auc(s, labels);
    ok = ok && a >= 0.95;
    detail += fmt("%s %.3f, ", outlier::detector_name(kind).c_str(), a);
  }
  outlier::Ocsvm svm(base, params.nu, params.gamma, params.tolerance, params.max_iterations);
  std::size_t outside = 0, sv = 0;
  for (const auto& r : base) outside += svm.decision(r) < -1e-4;
  for (double a : svm.alpha()) sv += a > 0.0;
  const double frac_out = double(outside) / 200.0, frac_sv = double(sv) / 200.0;
  ok = ok && frac_out <= params.nu + 0.02 && frac_sv >= params.nu - 0.02;
  detail += fmt("OCSVM outlier fraction %.3f, support fraction %.3f (nu %.2f)", frac_out, frac_sv, params.nu);
  return {ok, detail};
}

// ---------------------------------------------------------------------------
// 8. d_local

Outcome criterion_d_local() {
  std::mt19937_64 rng(8);
  std::normal_distribution<double> g;
  double worst = 0.0;
  for (int t = 0; t < 10; ++t) {
    outlier::Matrix z(20, std::vector<double>(6)), x(20, std::vector<double>(64));
    for (auto& r : z)
      for (double& v : r) v = g(rng);
    for (auto& r : x)
      for (double& v : r) v = g(rng);
    for (std::size_t k : {1, 5, 19}) worst = std::max(worst, std::abs(eval::d_local(z, x, k) - test::exhaustive_d_local(z, x, k)));
  }
  outlier::Matrix z(20, std::vector<double>(6)), same(20, std::vector<double>(64, 0.25));
  for (auto& r : z)
    for (double& v : r) v = g(rng);
  double identical = 0.0;
  for (std::size_t k : {1, 5, 19}) identical = std::max(identical, eval::d_local(z, same, k));
  return {worst <= 1e-10 && identical == 0.0,
          fmt("max |d_local - oracle| = %.1e for k in {1,5,19}; identical images give %.1f", worst, identical)};
}

// ---------------------------------------------------------------------------
// 9. determinism through the command line

std::string slurp(const fs::path& p) {
  std::ifstream f(p, std::ios::binary);
  std::stringstream s;
  s << f.rdbuf();
  return s.str();
}

int run_cli(std::vector<std::string> args) {
  args.insert(args.begin(), "scenenov");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  return cli::run(int(argv.size()), argv.data());
}

Outcome criterion_determinism(const fs::path& work) {
  const fs::path dir = work / "determinism";
  fs::remove_all(dir);
  fs::create_directories(dir);
  nlohmann::json cfg = cli::to_json(cli::ExperimentConfig::desk());
  cfg["architectures"] = nlohmann::json::array({cfg["architectures"][1]});  // res_small
  cfg["train"]["epochs"] = 2;
  cfg["out"] = (dir / "run").string();
  std::ofstream(dir / "c.json") << cfg.dump(2);
  const std::string c = (dir / "c.json").string();
  std::string manifest[2], images[2], log[2];
  for (int r = 0; r < 2; ++r) {
    const std::string data = (dir / ("data" + std::to_string(r))).string();
    const std::string train = (dir / ("train" + std::to_string(r))).string();
    if (run_cli({"generate", "--config", c, "--seed", "3", "--threads", "1", "--out", data}) != 0 ||
        run_cli({"train", "--config", c, "--seed", "7", "--threads", "1", "--data", data, "--out", train}) != 0)
      return {false, "command failed"};
    manifest[r] = slurp(fs::path(data) / "manifest.json");
    for (const auto& e : fs::directory_iterator(fs::path(data) / "images")) images[r] += slurp(e.path());
    log[r] = slurp(fs::path(train) / "res_small.metrics.jsonl");
  }
  const bool ok = !manifest[0].empty() && manifest[0] == manifest[1] && images[0] == images[1] && !log[0].empty() &&
                  log[0] == log[1];
  return {ok, fmt("manifest %s, images %s, loss log %s (600 scenes, 2 epochs)",
                  manifest[0] == manifest[1] ? "identical" : "DIFFERS", images[0] == images[1] ? "identical" : "DIFFER",
                  log[0] == log[1] ? "identical" : "DIFFERS")};
}

// ---------------------------------------------------------------------------
// 6 and 7. desk-scale runs

class Desk {
 public:
  explicit Desk(const fs::path& work) : dir_(work / "desk"), cfg_(cli::ExperimentConfig::desk()) {}

  const dataset::Dataset& data() {
    if (!data_) {
      progress("generating desk dataset");
      data_ = cli::generate_dataset(cfg_.dataset, dir_ / "data");
    }
    return *data_;
  }

  struct Run {
    std::map<std::string, double> latent_auc;
    double d_local5 = 0.0;
  };

  const Run& run(models::EncoderKind kind, const std::string& variant, std::uint64_t seed) {
    const std::string key = models::encoder_name(kind) + "_" + variant + "_s" + std::to_string(seed);
    if (auto it = runs_.find(key); it != runs_.end()) return it->second;
    models::EncoderConfig enc = kind == models::EncoderKind::kViT ? cfg_.architectures[0] : cfg_.architectures[1];
    const auto v = std::find_if(cfg_.ablation.begin(), cfg_.ablation.end(), [&](auto& a) { return a.name == variant; });
    enc = cli::apply_variant(enc, *v);
    models::TrainConfig tc = cfg_.train;
    tc.seed = seed;
    const auto t0 = std::chrono::steady_clock::now();
    const auto ckpt = models::train(data(), enc, tc);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    Run r;
    const auto images = cli::image_pointers(data());
    const auto z = models::embed(ckpt, images);
    const auto split = cli::make_split(data(), cfg_.split);
    for (auto det : {DetectorKind::kLof, DetectorKind::kAbod, DetectorKind::kIForest, DetectorKind::kOcsvm})
      r.latent_auc[outlier::detector_name(det)] = eval::run_auc_experiment(z, split, det, cfg_.detector).auc;
    r.d_local5 = eval::d_local(z, eval::image_rows(images), 5);
    std::string line = fmt("%s: trained %.0f s;", key.c_str(), secs);
    for (const auto& [k, a] : r.latent_auc) line += fmt(" %s %.4f", k.c_str(), a);
    progress(line + fmt(" d_local(5) %.3f", r.d_local5));
    return runs_.emplace(key, r).first->second;
  }

  const std::map<std::string, double>& input_auc() {
    if (input_.empty()) {
      const auto x = eval::image_rows(cli::image_pointers(data()));
      const auto split = cli::make_split(data(), cfg_.split);
      for (auto det : {DetectorKind::kLof, DetectorKind::kAbod, DetectorKind::kIForest, DetectorKind::kOcsvm})
        input_[outlier::detector_name(det)] = eval::run_auc_experiment(x, split, det, cfg_.detector).auc;
    }
    return input_;
  }

  std::uint64_t seed() const { return cfg_.train.seed; }

 private:
  fs::path dir_;
  cli::ExperimentConfig cfg_;
  std::optional<dataset::Dataset> data_;
  std::map<std::string, Run> runs_;
  std::map<std::string, double> input_;
};

Outcome criterion_desk(Desk& desk) {
  const auto t0 = std::chrono::steady_clock::now();
  bool ok = true;
  std::string detail;
  const auto& input = desk.input_auc();
  for (auto kind : {models::EncoderKind::kViT, models::EncoderKind::kResSmall}) {
    const auto& r = desk.run(kind, "full", desk.seed());
    const double abod = r.latent_auc.at("abod");
    bool better = true;
    for (const auto& [det, a] : r.latent_auc) better = better && a > input.at(det);
    ok = ok && abod >= 0.85 && better;
    detail += fmt("%s ABOD %.3f, latent>input %s; ", models::encoder_name(kind).c_str(), abod, better ? "all" : "NOT all");
  }
  detail += "input:";
  for (const auto& [det, a] : input) detail += fmt(" %s %.3f", det.c_str(), a);
  const double minutes = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count() / 60.0;
  detail += fmt("; %.1f min", minutes);
  return {ok && minutes <= 60.0, detail};
}

Outcome criterion_ablation(Desk& desk) {
  std::size_t tri_wins = 0, tri_ties = 0, dec_wins = 0;
  std::string per_seed;
  for (std::uint64_t s = 0; s < 5; ++s) {
    const auto& full = desk.run(models::EncoderKind::kResSmall, "full", s);
    const auto& no_tri = desk.run(models::EncoderKind::kResSmall, "no_triplet", s);
    const auto& no_dec = desk.run(models::EncoderKind::kResSmall, "no_decoder", s);
    const double a_on = full.latent_auc.at("abod"), a_off = no_tri.latent_auc.at("abod");
    tri_wins += a_on > a_off;
    tri_ties += a_on == a_off;
    dec_wins += full.d_local5 < no_dec.d_local5;
    per_seed += fmt(" [seed %llu: ABOD %.4f vs %.4f, d_local(5) %.2f vs %.2f]", (unsigned long long)s, a_on, a_off,
                    full.d_local5, no_dec.d_local5);
  }
  const bool a_ok = tri_wins >= 4, b_ok = dec_wins >= 4;
  Outcome o{a_ok && b_ok,
            fmt("(a) triplet-on ABOD > off in %zu/5 seeds (%zu ties); (b) d_local(5) with decoder < without in %zu/5;",
                tri_wins, tri_ties, dec_wins) +
                per_seed};
  if (!a_ok && b_ok) o.part = "7a";
  else if (a_ok && !b_ok) o.part = "7b";
  else if (!a_ok && !b_ok) o.part = "7";
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance criteria"};
  std::vector<int> only;
  std::vector<std::string> known;
  std::string work = (fs::temp_directory_path() / "scenenov_acceptance").string();
  app.add_option("--criteria", only, "Subset to run (default all)")->delimiter(',')->check(CLI::Range(1, 9));
  app.add_option("--work", work, "Scratch directory");
  app.add_option("--known-unattainable", known,
                 "Criteria (e.g. 7a) reported as FAIL without failing the exit status")
      ->delimiter(',');
  CLI11_PARSE(app, argc, argv);
  if (only.empty()) only = {1, 2, 3, 4, 5, 6, 7, 8, 9};
  fs::create_directories(work);

  Desk desk(work);
  const std::map<int, std::function<Outcome()>> criteria = {
      {1, criterion_gradients},
      {2, criterion_isomorphism},
      {3, criterion_losses},
      {4, criterion_auc},
      {5, criterion_planted},
      {6, [&] { return criterion_desk(desk); }},
      {7, [&] { return criterion_ablation(desk); }},
      {8, criterion_d_local},
      {9, [&] { return criterion_determinism(work); }},
  };
  const std::set<std::string> allowed(known.begin(), known.end());
  int blocking = 0;
  for (int id : std::set<int>(only.begin(), only.end())) {
    std::fprintf(stderr, "criterion %d ...\n", id);
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria.at(id)();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const std::string part = o.part.empty() ? std::to_string(id) : o.part;
    const bool excused = !o.pass && allowed.count(part);
    const std::string note = excused ? " [known unattainable: " + part + "]" : "";
    std::printf("criterion %d: %s  %s (%.1f s)%s\n", id, o.pass ? "PASS" : "FAIL", o.detail.c_str(), secs,
                note.c_str());
    std::fflush(stdout);
    if (!o.pass && !excused) ++blocking;
  }
  return blocking == 0 ? 0 : 1;
}
