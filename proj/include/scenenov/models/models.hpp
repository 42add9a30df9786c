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
#include <functional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "scenenov/autodiff/adam.hpp"
#include "scenenov/autodiff/ops.hpp"
#include "scenenov/dataset/dataset.hpp"
#include "scenenov/raster/raster.hpp"

namespace scenenov::models {

using ad::Parameter;
using ad::Shape;
using ad::Tape;
using ad::Tensor;
using ad::Var;

enum class EncoderKind { kResSmall, kViT };
std::string encoder_name(EncoderKind k);
EncoderKind parse_encoder(const std::string& name);  // "res_small" | "vit"

struct EncoderConfig {
  EncoderKind kind = EncoderKind::kViT;
  std::size_t image_size = 64;
  std::size_t latent_dim = 50;
  // ViT
  std::size_t patch_size = 8;
  std::size_t n_layers = 6;
  std::size_t embed_dim = 64;
  std::size_t mlp_dim = 128;
  std::size_t n_heads = 4;
  // ResSmall
  std::vector<std::size_t> channels = {16, 32, 64};
  std::size_t n_blocks = 1;
  // Decoder: channels at 4x4, halved per upsampling block (floor 8).
  std::size_t decoder_base = 64;
  // Ablation switches.
  bool use_decoder = true;
  bool use_triplet = true;

  void check() const;  // ParameterError

  static EncoderConfig vit_s();
  static EncoderConfig res_small();
};

enum class Precision { kFloat32, kFloat64 };

struct TrainConfig {
  double margin = 0.2;
  std::size_t epochs = 200;
  std::size_t batch_size = 64;
  double learning_rate = 1e-3;
  std::size_t pool_size = 16;
  double lambda_rec = 1.0;
  std::uint64_t seed = 0;
  Precision precision = Precision::kFloat32;

  void check() const;  // ParameterError
};

// Encoder f, decoder g and their parameters. Parameter storage never moves
// after construction.
template <class T>
class Model {
 public:
  Model(const EncoderConfig& cfg, std::uint64_t seed);

  const EncoderConfig& config() const { return cfg_; }
  std::vector<Parameter<T>>& parameters() { return params_; }
  const std::vector<Parameter<T>>& parameters() const { return params_; }
  std::vector<Parameter<T>*> trainable();
  Parameter<T>& parameter(const std::string& name);
  std::size_t encoder_parameter_count() const;
  std::size_t decoder_parameter_count() const;

  // x: [N, S, S, 1] -> z: [N, L]
  Var<T> encode(Tape<T>& tape, Var<T> x);
  // z: [N, L] -> [N, S, S, 1] in (0, 1)
  Var<T> decode(Tape<T>& tape, Var<T> z);

 private:
  struct Linear {
    std::size_t w = 0, b = 0;
  };
  struct Norm {
    std::size_t gamma = 0, beta = 0;
  };
  struct Block {
    Norm ln1, ln2;
    Linear qkv, proj, fc1, fc2;
  };
  struct Conv {
    std::size_t w = 0, b = 0;
  };
  struct ResStage {
    Conv entry;
    std::vector<std::pair<Conv, Conv>> blocks;
  };

  using Rng = std::mt19937_64;
  std::size_t add(const std::string& name, Shape shape, double stddev, Rng& rng, bool decoder);
  Linear add_linear(const std::string& name, std::size_t in, std::size_t out, double gain, Rng& rng,
                    bool decoder = false);
  Conv add_conv(const std::string& name, std::size_t k, std::size_t in, std::size_t out, double gain, Rng& rng,
                bool decoder = false);
  Norm add_norm(const std::string& name, std::size_t dim);

  Var<T> p(Tape<T>& tape, std::size_t i) { return tape.param(params_[i]); }
  Var<T> apply(Tape<T>& tape, const Linear& l, Var<T> x) { return ad::linear(x, p(tape, l.w), p(tape, l.b)); }
  Var<T> apply(Tape<T>& tape, const Conv& c, Var<T> x, std::size_t stride, std::size_t pad) {
    return ad::conv2d(x, p(tape, c.w), p(tape, c.b), stride, pad);
  }
  Var<T> norm(Tape<T>& tape, const Norm& n, Var<T> x) { return ad::layernorm(x, p(tape, n.gamma), p(tape, n.beta)); }

  Var<T> encode_vit(Tape<T>& tape, Var<T> x);
  Var<T> encode_res(Tape<T>& tape, Var<T> x);

  EncoderConfig cfg_;
  std::vector<Parameter<T>> params_;
  std::vector<bool> is_decoder_;

  // ViT
  Linear patch_embed_;
  std::size_t cls_ = 0, pos_ = 0;
  std::vector<Block> blocks_;
  Norm final_norm_;
  Linear head1_, head2_;
  // ResSmall
  std::vector<ResStage> stages_;
  Linear res_head_;
  // Decoder
  Linear dec_in_;
  std::vector<Conv> dec_convs_;
  Conv dec_out_;
};

// Images to an [N, S, S, 1] tensor.
template <class T>
Tensor<T> stack_images(const std::vector<const raster::Image*>& images);

// Encodes without recording gradients, `batch` images at a time.
template <class T>
Tensor<T> embed_images(Model<T>& model, const std::vector<const raster::Image*>& images, std::size_t batch = 64);

// ---------------------------------------------------------------------------
// Losses

// max(alpha + d_ap - d_an, 0), evaluated as alpha + (d_ap - d_an).
double triplet_loss_from_distances(double d_ap, double d_an, double alpha);
double squared_distance(std::span<const double> a, std::span<const double> b);
double triplet_loss(std::span<const double> z_a, std::span<const double> z_p, std::span<const double> z_n,
                    double alpha);
// Sum of squared pixel differences.
double recon_loss(std::span<const double> x, std::span<const double> x_hat);
double total_loss(double l_tri, double l_rec, double lambda_rec, bool use_triplet = true, bool use_decoder = true);

// Batched differentiable forms; rows are samples. Return per-row losses [N].
template <class T>
Var<T> triplet_loss(Var<T> z_a, Var<T> z_p, Var<T> z_n, T alpha);
template <class T>
Var<T> recon_loss(Var<T> x, Var<T> x_hat);

// Semi-hard choice: smallest d_an inside (d_ap, d_ap + alpha); otherwise the
// largest hard one (d_an <= d_ap); otherwise the smallest easy one. Ties go to
// the lower index. ParameterError on an empty pool.
std::size_t select_negative(double d_ap, std::span<const double> d_an, double alpha);

// ---------------------------------------------------------------------------
// Training

struct EpochMetrics {
  std::size_t epoch = 0;
  double triplet = 0.0;       // mean L_tri over triplets
  double recon = 0.0;         // mean L_rec over anchors
  double zero_fraction = 0.0; // triplets with zero loss
  std::size_t skipped_anchors = 0;
  std::size_t triplets = 0;
  double seconds = 0.0;

  bool same_values(const EpochMetrics& o) const {
    return epoch == o.epoch && triplet == o.triplet && recon == o.recon && zero_fraction == o.zero_fraction &&
           skipped_anchors == o.skipped_anchors && triplets == o.triplets;
  }
};

struct Checkpoint {
  static constexpr std::uint32_t kVersion = 1;
  EncoderConfig encoder;
  TrainConfig train;
  std::vector<EpochMetrics> history;
  // Parameter values widened to double; written in train.precision.
  std::vector<std::pair<std::string, Tensor<double>>> tensors;

  template <class T>
  void store(const Model<T>& model);
  template <class T>
  Model<T> restore() const;
};

using EpochCallback = std::function<void(const EpochMetrics&)>;

Checkpoint train(const dataset::Dataset& data, const EncoderConfig& encoder, const TrainConfig& config,
                 const EpochCallback& on_epoch = {});

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);  // FormatError / IoError

// Rows are encoder outputs in input order, in the checkpoint's precision
// widened to double. ShapeError when an image size differs from the model's.
std::vector<std::vector<double>> embed(const Checkpoint& ckpt, const std::vector<const raster::Image*>& images);
// Reconstruction errors (sum of squared pixel differences) per image.
std::vector<double> reconstruction_errors(const Checkpoint& ckpt, const std::vector<const raster::Image*>& images);

std::string metrics_to_json_lines(const std::vector<EpochMetrics>& history);

}  // namespace scenenov::models
