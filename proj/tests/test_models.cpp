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
#include <filesystem>
#include <fstream>
#include <random>

#include "doctest.h"
#include "scenenov/autodiff/grad_check.hpp"
#include "scenenov/errors.hpp"
#include "scenenov/models/models.hpp"

using namespace scenenov;
using namespace scenenov::models;
namespace fs = std::filesystem;

namespace {

EncoderConfig tiny_vit() {
  EncoderConfig c;
  c.image_size = 8;
  c.latent_dim = 4;
  c.patch_size = 4;
  c.n_layers = 1;
  c.embed_dim = 8;
  c.mlp_dim = 8;
  c.n_heads = 2;
  c.decoder_base = 4;
  return c;
}

EncoderConfig tiny_res(std::size_t size = 8) {
  EncoderConfig c = EncoderConfig::res_small();
  c.image_size = size;
  c.latent_dim = 4;
  c.channels = {4, 8};
  c.decoder_base = 4;
  return c;
}

template <class T>
Tensor<T> random_images(std::size_t n, std::size_t s, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Tensor<T> x({n, s, s, 1});
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = T(u(rng));
  return x;
}

std::vector<Parameter<double>*> all_params(Model<double>& m) {
  std::vector<Parameter<double>*> out;
  for (auto& p : m.parameters()) out.push_back(&p);
  return out;
}

// Zero-initialized biases put ReLU inputs exactly on the kink; move them off.
template <class T>
void jitter_biases(Model<T>& m, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, 0.1);
  for (auto& p : m.parameters())
    if (p.name.size() > 2 && p.name.substr(p.name.size() - 2) == ".b")
      for (std::size_t i = 0; i < p.value.size(); ++i) p.value[i] = T(n(rng));
}

fs::path temp_dir(const std::string& name) {
  fs::path p = fs::temp_directory_path() / ("scenenov_models_" + name);
  fs::remove_all(p);
  return p;
}

// Three small scene families at 16 px.
dataset::Dataset small_dataset(const fs::path& root) {
  std::vector<roadnet::RoadNetwork> scenes;
  std::vector<std::string> tags;
  std::uint64_t seed = 1;
  for (auto kind : {roadnet::SceneKind::highway(), roadnet::SceneKind::roundabout(3), roadnet::SceneKind::crossing(4)})
    for (int i = 0; i < 8; ++i) {
      scenes.push_back(roadnet::generate_scene(kind, {}, seed++));
      tags.push_back(kind.name());
    }
  dataset::BuildParams p;
  p.render.size = 16;
  return dataset::build_dataset(scenes, tags, p, root);
}

TrainConfig quick_train(std::size_t epochs) {
  TrainConfig t;
  t.epochs = epochs;
  t.batch_size = 8;
  t.pool_size = 4;
  t.seed = 5;
  return t;
}

}  // namespace

TEST_CASE("total loss gradient through tiny encoders and decoder") {
  for (const EncoderConfig& cfg : {tiny_vit(), tiny_res()}) {
    CAPTURE(encoder_name(cfg.kind));
    Model<double> model(cfg, 3);
    jitter_biases(model, 7);
    const Tensor<double> x = random_images<double>(3, 8, 11);
    auto fn = [&](Tape<double>& tape) {
      Var<double> xs = tape.constant(x);
      Var<double> z = model.encode(tape, xs);
      // Margin large enough that the triplet hinge stays active.
      Var<double> tri = triplet_loss(ad::slice(z, 0, 0, 1), ad::slice(z, 0, 1, 2), ad::slice(z, 0, 2, 3), 50.0);
      Var<double> za = ad::slice(z, 0, 0, 1);
      Var<double> rec = recon_loss(ad::slice(xs, 0, 0, 1), model.decode(tape, za));
      return ad::add(ad::mean(tri), ad::scale(ad::mean(rec), 0.5));
    };
    const auto r = ad::grad_check_params(fn, all_params(model));
    CHECK(r.max_rel_error < 1e-4);
  }
}

TEST_CASE("batch encode equals per-sample encode") {
  for (const EncoderConfig& cfg : {EncoderConfig::vit_s(), EncoderConfig::res_small()}) {
    Model<float> model(cfg, 1);
    const Tensor<float> x = random_images<float>(3, 64, 2);
    Tape<float> tape(false);
    const Tensor<float> batch = model.encode(tape, tape.constant(x)).value();
    const std::size_t px = 64 * 64, L = cfg.latent_dim;
    for (std::size_t i = 0; i < 3; ++i) {
      Tensor<float> one({1, 64, 64, 1}, std::vector<float>(x.data() + i * px, x.data() + (i + 1) * px));
      Tape<float> t1(false);
      const Tensor<float> z = model.encode(t1, t1.constant(one)).value();
      CHECK(std::equal(z.data(), z.data() + L, batch.data() + i * L));
      Tape<float> t2(false);
      CHECK(model.encode(t2, t2.constant(one)).value() == z);
    }
  }
}

TEST_CASE("zero final layer makes z equal the bias") {
  for (auto [cfg, head] : {std::pair{tiny_vit(), "vit.head2"}, std::pair{tiny_res(), "res.head"}}) {
    Model<double> model(cfg, 4);
    model.parameter(std::string(head) + ".w").value.fill(0.0);
    auto& b = model.parameter(std::string(head) + ".b").value;
    for (std::size_t i = 0; i < b.size(); ++i) b[i] = 0.25 * double(i) - 0.3;
    Tape<double> tape(false);
    const Tensor<double> z = model.encode(tape, tape.constant(random_images<double>(2, 8, 9))).value();
    for (std::size_t r = 0; r < 2; ++r)
      for (std::size_t i = 0; i < b.size(); ++i) CHECK(z[r * b.size() + i] == b[i]);
  }
}

TEST_CASE("decoder output range, determinism and shared architecture") {
  Model<float> vit(EncoderConfig::vit_s(), 0);
  Model<float> res(EncoderConfig::res_small(), 0);
  CHECK(vit.decoder_parameter_count() == res.decoder_parameter_count());
  std::vector<std::pair<std::string, Shape>> dv, dr;
  for (const auto& p : vit.parameters())
    if (p.name.rfind("dec.", 0) == 0) dv.emplace_back(p.name, p.value.shape());
  for (const auto& p : res.parameters())
    if (p.name.rfind("dec.", 0) == 0) dr.emplace_back(p.name, p.value.shape());
  CHECK(dv == dr);
  CHECK(!dv.empty());

  std::mt19937_64 rng(1);
  std::normal_distribution<float> n(0.0f, 5.0f);
  Tensor<float> z({4, 50});
  for (std::size_t i = 0; i < z.size(); ++i) z[i] = n(rng);
  Tape<float> t1(false), t2(false);
  const Tensor<float> a = vit.decode(t1, t1.constant(z)).value();
  const Tensor<float> b = vit.decode(t2, t2.constant(z)).value();
  CHECK(a == b);
  CHECK(a.shape() == Shape{4, 64, 64, 1});
  for (float v : a.values()) CHECK((v >= 0.0f && v <= 1.0f));
}

TEST_CASE("shape errors") {
  Model<float> model(EncoderConfig::res_small(), 0);
  Tape<float> tape(false);
  CHECK_THROWS_AS(model.encode(tape, tape.constant(Tensor<float>({1, 32, 32, 1}))), ShapeError);
  CHECK_THROWS_AS(model.decode(tape, tape.constant(Tensor<float>({1, 49}))), ShapeError);
}

TEST_CASE("config validation") {
  EncoderConfig c = EncoderConfig::vit_s();
  c.patch_size = 7;
  CHECK_THROWS_AS(c.check(), ParameterError);
  c = EncoderConfig::vit_s();
  c.n_heads = 3;
  CHECK_THROWS_AS(c.check(), ParameterError);
  c = EncoderConfig::vit_s();
  c.use_decoder = c.use_triplet = false;
  CHECK_THROWS_AS(c.check(), ParameterError);
  c = EncoderConfig::vit_s();
  c.image_size = 48;
  CHECK_THROWS_AS(c.check(), ParameterError);
  TrainConfig t;
  t.margin = 0.0;
  CHECK_THROWS_AS(t.check(), ParameterError);
  t = TrainConfig{};
  t.lambda_rec = -1.0;
  CHECK_THROWS_AS(t.check(), ParameterError);
  CHECK_THROWS_AS(parse_encoder("resnet"), ParameterError);
}

TEST_CASE("loss unit values") {
  CHECK(triplet_loss_from_distances(0.5, 1.0, 0.2) == 0.0);
  CHECK(triplet_loss_from_distances(1.0, 0.9, 0.2) == 0.3);
  const std::vector<double> za{0.1, -2.0, 3.5}, zp{1.0, 0.5, -0.25};
  CHECK(triplet_loss(za, zp, zp, 0.2) == 0.2);

  const std::vector<double> ones(64, 1.0), zeros(64, 0.0);
  CHECK(recon_loss(ones, ones) == 0.0);
  CHECK(recon_loss(ones, zeros) == 64.0);
  CHECK(recon_loss(za, zp) == recon_loss(zp, za));

  CHECK(total_loss(0.0, 0.0, 1.0) == 0.0);
  CHECK(total_loss(0.7, 3.0, 0.5, false, true) == 1.5);
  CHECK(total_loss(0.7, 3.0, 1.0) == 0.7 + 3.0);
  CHECK(total_loss(0.7, 3.0, 1.0, true, false) == 0.7);

  CHECK(select_negative(0.5, std::vector<double>{0.4, 0.7, 2.0}, 0.3) == 1);
  CHECK(select_negative(0.5, std::vector<double>{2.0, 3.0}, 0.3) == 0);
  CHECK(select_negative(0.5, std::vector<double>{0.1, 0.3}, 0.3) == 1);
  CHECK_THROWS_AS(select_negative(0.5, std::vector<double>{}, 0.3), ParameterError);
}

TEST_CASE("batched losses agree with the scalar forms") {
  std::mt19937_64 rng(8);
  std::normal_distribution<double> n(0.0, 1.0);
  const std::size_t N = 5, L = 6;
  Tensor<double> a({N, L}), p({N, L}), q({N, L});
  for (auto* t : {&a, &p, &q})
    for (std::size_t i = 0; i < t->size(); ++i) (*t)[i] = n(rng);
  Tape<double> tape(false);
  const Tensor<double> tri = triplet_loss(tape.constant(a), tape.constant(p), tape.constant(q), 1.5).value();
  const Tensor<double> rec = recon_loss(tape.constant(a), tape.constant(p)).value();
  for (std::size_t r = 0; r < N; ++r) {
    auto row = [&](const Tensor<double>& t) { return std::span<const double>(t.data() + r * L, L); };
    CHECK(tri[r] == doctest::Approx(triplet_loss(row(a), row(p), row(q), 1.5)).epsilon(1e-14));
    CHECK(rec[r] == doctest::Approx(recon_loss(row(a), row(p))).epsilon(1e-14));
  }
}

TEST_CASE("triplet gradient: flows when active, zero when easy") {
  auto grads = [](const Tensor<double>& za, const Tensor<double>& zp, const Tensor<double>& zn) {
    Tape<double> tape;
    Var<double> a = tape.leaf(za), p = tape.leaf(zp), n = tape.leaf(zn);
    tape.backward(ad::sum(triplet_loss(a, p, n, 0.2)));
    return std::vector<Tensor<double>>{tape.grad(a), tape.grad(p), tape.grad(n)};
  };
  auto nonzero = [](const Tensor<double>& t) {
    return std::any_of(t.values().begin(), t.values().end(), [](double v) { return v != 0.0; });
  };
  // d_ap = 1, d_an = 0.25: active.
  auto g = grads(Tensor<double>({1, 2}, {0.0, 0.0}), Tensor<double>({1, 2}, {1.0, 0.0}),
                 Tensor<double>({1, 2}, {0.0, 0.5}));
  for (const auto& t : g) CHECK(nonzero(t));
  // d_ap = 0.25, d_an = 4: easy.
  g = grads(Tensor<double>({1, 2}, {0.0, 0.0}), Tensor<double>({1, 2}, {0.5, 0.0}), Tensor<double>({1, 2}, {0.0, 2.0}));
  for (const auto& t : g) CHECK_FALSE(nonzero(t));
}

TEST_CASE("select_negative is invariant to pool order") {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(0.0, 2.0);
  for (int t = 0; t < 200; ++t) {
    std::vector<double> pool(1 + rng() % 12);
    for (double& d : pool) d = u(rng);
    const double d_ap = u(rng);
    const double chosen = pool[select_negative(d_ap, pool, 0.3)];
    std::shuffle(pool.begin(), pool.end(), rng);
    CHECK(pool[select_negative(d_ap, pool, 0.3)] == chosen);
  }
}

TEST_CASE("an all-easy batch without reconstruction leaves parameters unchanged") {
  Model<double> model(tiny_res(), 2);
  jitter_biases(model, 1);
  const Tensor<double> x = random_images<double>(2, 8, 3);
  const std::vector<Tensor<double>> before = [&] {
    std::vector<Tensor<double>> v;
    for (const auto& p : model.parameters()) v.push_back(p.value);
    return v;
  }();
  Tape<double> tape;
  Var<double> xs = tape.constant(x);
  Var<double> z = model.encode(tape, xs);
  Var<double> za = ad::slice(z, 0, 0, 1), zn = ad::slice(z, 0, 1, 2);
  // Anchor doubles as its own positive (d_ap = 0); margin far below d_an.
  const std::vector<double> zv(z.value().values().begin(), z.value().values().end());
  const double d_an = squared_distance(std::span(zv).subspan(0, 4), std::span(zv).subspan(4, 4));
  REQUIRE(d_an > 0.0);
  Var<double> tri = ad::mean(triplet_loss(za, za, zn, d_an * 1e-3));
  Var<double> rec = ad::mean(recon_loss(ad::slice(xs, 0, 0, 1), model.decode(tape, za)));
  Var<double> loss = ad::add(tri, ad::scale(rec, 0.0));
  REQUIRE(loss.value().item() == 0.0);
  for (auto& p : model.parameters()) p.zero_grad();
  tape.backward(loss);
  ad::AdamState<double> state;
  ad::adam_step(model.trainable(), state, {});
  for (std::size_t i = 0; i < before.size(); ++i) CHECK(model.parameters()[i].value == before[i]);
}

TEST_CASE("training: deterministic, reconstruction improves, checkpoint round trip") {
  const fs::path root = temp_dir("train");
  const dataset::Dataset data = small_dataset(root / "data");
  const EncoderConfig cfg = tiny_res(16);
  for (Precision prec : {Precision::kFloat32, Precision::kFloat64}) {
    TrainConfig tc = quick_train(12);
    tc.precision = prec;
    std::vector<EpochMetrics> seen;
    const Checkpoint a = train(data, cfg, tc, [&](const EpochMetrics& m) { seen.push_back(m); });
    const Checkpoint b = train(data, cfg, tc);
    REQUIRE(a.history.size() == 12);
    CHECK(seen.size() == 12);
    for (std::size_t e = 0; e < 12; ++e) CHECK(a.history[e].same_values(b.history[e]));
    CHECK(a.tensors == b.tensors);
    CHECK(metrics_to_json_lines(a.history) == metrics_to_json_lines(b.history));
    CHECK(a.history.back().recon < a.history.front().recon);
    CHECK(a.history.front().triplets == 24);
    CHECK(a.history.front().skipped_anchors == 0);

    std::vector<const raster::Image*> imgs;
    for (const auto& img : data.images) imgs.push_back(&img);
    const auto z = embed(a, imgs);
    REQUIRE(z.size() == 24);
    CHECK(z[0].size() == 4);
    save_checkpoint(a, root / "model.ckpt");
    const Checkpoint back = load_checkpoint(root / "model.ckpt");
    CHECK(embed(back, imgs) == z);
    CHECK(reconstruction_errors(back, imgs) == reconstruction_errors(a, imgs));
    CHECK(metrics_to_json_lines(back.history) == metrics_to_json_lines(a.history));
    CHECK(embed(back, {}).empty());

    // Row i is the single-image encoding.
    const auto single = embed(back, {imgs[5]});
    CHECK(single[0] == z[5]);
  }
  fs::remove_all(root);
}

TEST_CASE("training without the triplet term is a plain autoencoder") {
  const fs::path root = temp_dir("ae");
  const dataset::Dataset data = small_dataset(root / "data");
  EncoderConfig cfg = tiny_res(16);
  cfg.use_triplet = false;
  const Checkpoint c = train(data, cfg, quick_train(3));
  for (const auto& m : c.history) {
    CHECK(m.triplets == 0);
    CHECK(m.triplet == 0.0);
    CHECK(m.recon > 0.0);
  }
  cfg = tiny_res(16);
  cfg.use_decoder = false;
  const Checkpoint d = train(data, cfg, quick_train(2));
  CHECK(d.history.back().recon == 0.0);
  CHECK_THROWS_AS(reconstruction_errors(d, {&data.images[0]}), ParameterError);
  fs::remove_all(root);
}

TEST_CASE("training preconditions") {
  const fs::path root = temp_dir("pre");
  std::vector<roadnet::RoadNetwork> same;
  for (std::uint64_t s = 1; s <= 4; ++s) same.push_back(roadnet::generate_scene(roadnet::SceneKind::highway(), {}, s));
  dataset::BuildParams p;
  p.render.size = 16;
  const dataset::Dataset one_class = dataset::build_dataset(same, {}, p, root / "one");
  CHECK_THROWS_AS(train(one_class, tiny_res(16), quick_train(1)), NoNegativeError);

  const dataset::Dataset singletons = dataset::build_dataset(
      {roadnet::generate_scene(roadnet::SceneKind::highway(), {}, 1),
       roadnet::generate_scene(roadnet::SceneKind::crossing(3), {}, 1)},
      {}, p, root / "single");
  CHECK_THROWS_AS(train(singletons, tiny_res(16), quick_train(1)), NoPositiveError);
  CHECK_THROWS_AS(train(singletons, tiny_res(8), quick_train(1)), ShapeError);
  fs::remove_all(root);
}

TEST_CASE("checkpoint format errors") {
  const fs::path root = temp_dir("ckpt");
  fs::create_directories(root);
  Checkpoint c;
  c.encoder = tiny_res();
  c.store(Model<float>(c.encoder, 1));
  save_checkpoint(c, root / "ok.ckpt");
  std::ifstream f(root / "ok.ckpt", std::ios::binary);
  const std::string bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  CHECK(bytes.substr(0, 4) == "SNVL");
  auto write = [&](const std::string& name, const std::string& content) {
    std::ofstream(root / name, std::ios::binary) << content;
    return root / name;
  };
  CHECK_THROWS_AS(load_checkpoint(write("magic.ckpt", "XXXX" + bytes.substr(4))), FormatError);
  CHECK_THROWS_AS(load_checkpoint(write("short.ckpt", bytes.substr(0, bytes.size() - 3))), FormatError);
  CHECK_THROWS_AS(load_checkpoint(write("long.ckpt", bytes + "x")), FormatError);
  CHECK_THROWS_AS(load_checkpoint(root / "missing.ckpt"), IoError);
  CHECK_NOTHROW(load_checkpoint(root / "ok.ckpt"));

  // A checkpoint whose tensors do not fit its configuration.
  Checkpoint wrong = c;
  wrong.tensors.pop_back();
  save_checkpoint(wrong, root / "wrong.ckpt");
  CHECK_THROWS_AS(load_checkpoint(root / "wrong.ckpt"), FormatError);
  fs::remove_all(root);
}
