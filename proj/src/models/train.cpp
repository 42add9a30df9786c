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
#include <bit>
#include <chrono>
#include <cstring>
#include <fstream>
#include <iterator>
#include <numeric>
#include <sstream>

#include "scenenov/errors.hpp"
#include "scenenov/models/config_json.hpp"
#include "scenenov/models/models.hpp"

namespace scenenov::models {

using nlohmann::json;

namespace {

template <class T>
Tensor<T> gather_rows(const Tensor<T>& all, const std::vector<std::size_t>& rows) {
  Shape shape = all.shape();
  const std::size_t stride = all.size() / shape[0];
  shape[0] = rows.size();
  Tensor<T> out(shape);
  for (std::size_t i = 0; i < rows.size(); ++i)
    std::copy_n(all.data() + rows[i] * stride, stride, out.data() + i * stride);
  return out;
}

std::vector<const raster::Image*> image_pointers(const dataset::Dataset& data) {
  std::vector<const raster::Image*> out;
  for (const auto& img : data.images) out.push_back(&img);
  return out;
}

template <class T>
double row_distance(const Tensor<T>& z, std::size_t a, std::size_t b) {
  const std::size_t L = z.dim(1);
  double s = 0.0;
  for (std::size_t k = 0; k < L; ++k) {
    const double d = double(z[a * L + k]) - double(z[b * L + k]);
    s += d * d;
  }
  return s;
}

// Anchors used in every epoch: entries whose class has a second member when
// the triplet term is on, every entry otherwise.
std::vector<std::size_t> eligible_anchors(const dataset::ClassIndex& index, bool triplet) {
  std::vector<std::size_t> out;
  if (!triplet) {
    out.resize(index.size());
    std::iota(out.begin(), out.end(), std::size_t(0));
    return out;
  }
  for (std::size_t i = 0; i < index.size(); ++i)
    if (index.members[index.class_of[i]].size() >= 2) out.push_back(i);
  if (out.empty()) throw NoPositiveError("no isomorphism class has two members");
  if (index.num_classes() < 2) throw NoNegativeError("dataset has a single isomorphism class");
  return out;
}

template <class T>
void fit(const dataset::Dataset& data, Model<T>& model, const TrainConfig& tc, std::vector<EpochMetrics>& history,
         const EpochCallback& on_epoch) {
  const EncoderConfig& cfg = model.config();
  if (data.size() == 0) throw ParameterError("cannot train on an empty dataset");
  if (data.image_size() != cfg.image_size)
    throw ShapeError("dataset images are " + std::to_string(data.image_size()) + " px, model expects " +
                     std::to_string(cfg.image_size));
  const auto pointers = image_pointers(data);
  const Tensor<T> all = stack_images<T>(pointers);
  const std::vector<std::size_t> eligible = eligible_anchors(data.index, cfg.use_triplet);
  const std::size_t skipped = data.size() - eligible.size();
  const std::size_t L = cfg.latent_dim;

  dataset::Rng rng(tc.seed ^ 0x2545f4914f6cdd1dull);
  ad::AdamState<T> adam;
  const ad::AdamConfig adam_cfg{tc.learning_rate};
  const auto params = model.trainable();
  Tensor<T> cache;

  for (std::size_t epoch = 1; epoch <= tc.epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    // Negatives are chosen with embeddings refreshed once per epoch and
    // updated for every image encoded since.
    if (cfg.use_triplet) cache = embed_images(model, pointers);
    std::vector<std::size_t> order = eligible;
    std::shuffle(order.begin(), order.end(), rng);

    double tri_sum = 0.0, rec_sum = 0.0;
    std::size_t zero = 0;
    for (std::size_t b = 0; b < order.size(); b += tc.batch_size) {
      const std::size_t B = std::min(tc.batch_size, order.size() - b);
      std::vector<std::size_t> rows(order.begin() + long(b), order.begin() + long(b + B));
      if (cfg.use_triplet) {
        std::vector<std::size_t> pos(B), neg(B);
        std::vector<double> d_an;
        for (std::size_t i = 0; i < B; ++i) {
          const auto cand = dataset::sample_triplet_candidates(data.index, rows[i], tc.pool_size, rng);
          pos[i] = cand.positive;
          d_an.clear();
          for (std::size_t n : cand.pool) d_an.push_back(row_distance(cache, rows[i], n));
          neg[i] = cand.pool[select_negative(row_distance(cache, rows[i], pos[i]), d_an, tc.margin)];
        }
        rows.insert(rows.end(), pos.begin(), pos.end());
        rows.insert(rows.end(), neg.begin(), neg.end());
      }

      Tape<T> tape;
      Var<T> x = tape.constant(gather_rows(all, rows));
      Var<T> z = model.encode(tape, x);
      Var<T> z_a = cfg.use_triplet ? ad::slice(z, 0, 0, B) : z;
      std::vector<Var<T>> terms;
      Var<T> tri{}, rec{};
      if (cfg.use_triplet) {
        tri = triplet_loss(z_a, ad::slice(z, 0, B, 2 * B), ad::slice(z, 0, 2 * B, 3 * B), T(tc.margin));
        terms.push_back(ad::mean(tri));
      }
      if (cfg.use_decoder) {
        Var<T> x_a = cfg.use_triplet ? ad::slice(x, 0, 0, B) : x;
        rec = recon_loss(x_a, model.decode(tape, z_a));
        terms.push_back(ad::scale(ad::mean(rec), T(tc.lambda_rec)));
      }
      Var<T> loss = terms.size() == 2 ? ad::add(terms[0], terms[1]) : terms[0];
      for (auto* p : params) p->zero_grad();
      tape.backward(loss);
      ad::adam_step(params, adam, adam_cfg);

      if (cfg.use_triplet) {
        for (std::size_t i = 0; i < B; ++i) {
          const double v = double(tri.value()[i]);
          tri_sum += v;
          zero += v == 0.0;
        }
        for (std::size_t r = 0; r < rows.size(); ++r)
          std::copy_n(z.value().data() + r * L, L, cache.data() + rows[r] * L);
      }
      if (cfg.use_decoder)
        for (std::size_t i = 0; i < B; ++i) rec_sum += double(rec.value()[i]);
    }

    EpochMetrics m;
    m.epoch = epoch;
    m.skipped_anchors = skipped;
    m.triplets = cfg.use_triplet ? order.size() : 0;
    m.triplet = m.triplets ? tri_sum / double(m.triplets) : 0.0;
    m.zero_fraction = m.triplets ? double(zero) / double(m.triplets) : 0.0;
    m.recon = cfg.use_decoder ? rec_sum / double(order.size()) : 0.0;
    m.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    history.push_back(m);
    if (on_epoch) on_epoch(m);
  }
}

}  // namespace

template <class T>
void Checkpoint::store(const Model<T>& model) {
  encoder = model.config();
  tensors.clear();
  for (const auto& p : model.parameters()) tensors.emplace_back(p.name, ad::tensor_cast<double>(p.value));
}

template <class T>
Model<T> Checkpoint::restore() const {
  Model<T> model(encoder, 0);
  auto& params = model.parameters();
  if (params.size() != tensors.size())
    throw FormatError("checkpoint holds " + std::to_string(tensors.size()) + " tensors, model needs " +
                      std::to_string(params.size()));
  for (std::size_t i = 0; i < params.size(); ++i) {
    const auto& [name, value] = tensors[i];
    if (name != params[i].name) throw FormatError("checkpoint tensor '" + name + "' where '" + params[i].name + "' was expected");
    if (value.shape() != params[i].value.shape())
      throw FormatError("checkpoint tensor '" + name + "' has shape " + ad::shape_str(value.shape()) +
                        ", expected " + ad::shape_str(params[i].value.shape()));
    params[i].value = ad::tensor_cast<T>(value);
  }
  return model;
}

template void Checkpoint::store(const Model<float>&);
template void Checkpoint::store(const Model<double>&);
template Model<float> Checkpoint::restore() const;
template Model<double> Checkpoint::restore() const;

Checkpoint train(const dataset::Dataset& data, const EncoderConfig& encoder, const TrainConfig& config,
                 const EpochCallback& on_epoch) {
  encoder.check();
  config.check();
  Checkpoint ckpt;
  ckpt.encoder = encoder;
  ckpt.train = config;
  if (config.precision == Precision::kFloat64) {
    Model<double> model(encoder, config.seed);
    fit(data, model, config, ckpt.history, on_epoch);
    ckpt.store(model);
  } else {
    Model<float> model(encoder, config.seed);
    fit(data, model, config, ckpt.history, on_epoch);
    ckpt.store(model);
  }
  return ckpt;
}

// ---------------------------------------------------------------------------
// Checkpoint file: "SNVL", u32 version, u64 length + JSON, u32 tensor count,
// then per tensor u32 name length + name, u8 dtype (0 = f32, 1 = f64),
// u32 rank, u64 dims, little-endian values.

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

namespace {

constexpr char kMagic[4] = {'S', 'N', 'V', 'L'};

template <class V>
void put(std::string& out, V v) {
  char buf[sizeof(V)];
  std::memcpy(buf, &v, sizeof(V));
  out.append(buf, sizeof(V));
}

class Reader {
 public:
  explicit Reader(const std::string& s) : s_(s) {}
  template <class V>
  V get() {
    V v;
    std::memcpy(&v, take(sizeof(V)), sizeof(V));
    return v;
  }
  const char* take(std::size_t n) {
    if (n > s_.size() - pos_) throw FormatError("checkpoint is truncated");
    const char* p = s_.data() + pos_;
    pos_ += n;
    return p;
  }
  bool done() const { return pos_ == s_.size(); }

 private:
  const std::string& s_;
  std::size_t pos_ = 0;
};

json metrics_json(const EpochMetrics& m) {
  return {{"epoch", m.epoch},
          {"triplet", m.triplet},
          {"recon", m.recon},
          {"zero_fraction", m.zero_fraction},
          {"skipped_anchors", m.skipped_anchors},
          {"triplets", m.triplets}};
}

}  // namespace

std::string metrics_to_json_lines(const std::vector<EpochMetrics>& history) {
  std::string out;
  for (const auto& m : history) out += metrics_json(m).dump() + "\n";
  return out;
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  json meta = {{"encoder", to_json(ckpt.encoder)}, {"train", to_json(ckpt.train)}, {"history", json::array()}};
  for (const auto& m : ckpt.history) meta["history"].push_back(metrics_json(m));
  const std::string text = meta.dump();
  const bool f64 = ckpt.train.precision == Precision::kFloat64;

  std::string out(kMagic, 4);
  put<std::uint32_t>(out, Checkpoint::kVersion);
  put<std::uint64_t>(out, text.size());
  out += text;
  put<std::uint32_t>(out, std::uint32_t(ckpt.tensors.size()));
  for (const auto& [name, t] : ckpt.tensors) {
    put<std::uint32_t>(out, std::uint32_t(name.size()));
    out += name;
    put<std::uint8_t>(out, f64 ? 1 : 0);
    put<std::uint32_t>(out, std::uint32_t(t.rank()));
    for (std::size_t d : t.shape()) put<std::uint64_t>(out, d);
    for (std::size_t i = 0; i < t.size(); ++i) {
      if (f64) put<double>(out, t[i]);
      else put<float>(out, float(t[i]));
    }
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot write " + path.string());
  f << out;
  if (!f) throw IoError("write failed: " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot read " + path.string());
  const std::string bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  Reader r(bytes);
  if (std::memcmp(r.take(4), kMagic, 4) != 0) throw FormatError(path.string() + ": not a checkpoint (bad magic)");
  const auto version = r.get<std::uint32_t>();
  if (version != Checkpoint::kVersion)
    throw FormatError(path.string() + ": unsupported checkpoint version " + std::to_string(version));
  const auto len = r.get<std::uint64_t>();
  if (len > bytes.size()) throw FormatError("checkpoint is truncated");
  const json meta = json::parse(std::string(r.take(len), len), nullptr, false);
  if (meta.is_discarded() || !meta.is_object()) throw FormatError(path.string() + ": bad config block");

  Checkpoint ckpt;
  try {
    ckpt.encoder = encoder_from_json(meta.at("encoder"));
    ckpt.train = train_from_json(meta.at("train"));
    for (const json& m : meta.at("history")) {
      EpochMetrics e;
      e.epoch = m.at("epoch").get<std::size_t>();
      e.triplet = m.at("triplet").get<double>();
      e.recon = m.at("recon").get<double>();
      e.zero_fraction = m.at("zero_fraction").get<double>();
      e.skipped_anchors = m.at("skipped_anchors").get<std::size_t>();
      e.triplets = m.at("triplets").get<std::size_t>();
      ckpt.history.push_back(e);
    }
  } catch (const json::exception& e) {
    throw FormatError(path.string() + ": " + e.what());
  } catch (const ParseError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }

  const auto count = r.get<std::uint32_t>();
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto name_len = r.get<std::uint32_t>();
    std::string name(r.take(name_len), name_len);
    const auto dtype = r.get<std::uint8_t>();
    if (dtype > 1) throw FormatError("tensor '" + name + "' has unknown dtype " + std::to_string(dtype));
    const auto rank = r.get<std::uint32_t>();
    if (rank > 8) throw FormatError("tensor '" + name + "' has rank " + std::to_string(rank));
    Shape shape(rank);
    std::size_t n = 1;
    for (auto& d : shape) {
      d = r.get<std::uint64_t>();
      if (d != 0 && n > (bytes.size() / d)) throw FormatError("tensor '" + name + "' is larger than the file");
      n *= d;
    }
    const std::size_t width = dtype ? 8 : 4;
    if (n > bytes.size() / width) throw FormatError("tensor '" + name + "' is larger than the file");
    std::vector<double> values(n);
    for (auto& v : values) v = dtype ? r.get<double>() : double(r.get<float>());
    ckpt.tensors.emplace_back(std::move(name), Tensor<double>(std::move(shape), std::move(values)));
  }
  if (!r.done()) throw FormatError(path.string() + ": trailing bytes");
  // Validates tensor names and shapes against the stored configuration.
  try {
    (void)ckpt.restore<double>();
  } catch (const ParameterError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
  return ckpt;
}

// ---------------------------------------------------------------------------

namespace {

template <class T>
std::vector<std::vector<double>> embed_as(const Checkpoint& ckpt, const std::vector<const raster::Image*>& images) {
  Model<T> model = ckpt.restore<T>();
  const Tensor<T> z = embed_images(model, images);
  const std::size_t L = model.config().latent_dim;
  std::vector<std::vector<double>> out(images.size(), std::vector<double>(L));
  for (std::size_t i = 0; i < images.size(); ++i)
    for (std::size_t k = 0; k < L; ++k) out[i][k] = double(z[i * L + k]);
  return out;
}

template <class T>
std::vector<double> recon_as(const Checkpoint& ckpt, const std::vector<const raster::Image*>& images) {
  Model<T> model = ckpt.restore<T>();
  std::vector<double> out;
  for (std::size_t b = 0; b < images.size(); b += 64) {
    const std::size_t e = std::min(images.size(), b + 64);
    std::vector<const raster::Image*> part(images.begin() + long(b), images.begin() + long(e));
    Tape<T> tape(false);
    Var<T> x = tape.constant(stack_images<T>(part));
    Var<T> err = recon_loss(x, model.decode(tape, model.encode(tape, x)));
    for (std::size_t i = 0; i < part.size(); ++i) out.push_back(double(err.value()[i]));
  }
  return out;
}

}  // namespace

std::vector<std::vector<double>> embed(const Checkpoint& ckpt, const std::vector<const raster::Image*>& images) {
  return ckpt.train.precision == Precision::kFloat64 ? embed_as<double>(ckpt, images)
                                                     : embed_as<float>(ckpt, images);
}

std::vector<double> reconstruction_errors(const Checkpoint& ckpt, const std::vector<const raster::Image*>& images) {
  if (!ckpt.encoder.use_decoder) throw ParameterError("checkpoint was trained without a decoder");
  return ckpt.train.precision == Precision::kFloat64 ? recon_as<double>(ckpt, images)
                                                     : recon_as<float>(ckpt, images);
}

}  // namespace scenenov::models
