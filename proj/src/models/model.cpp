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

#include <bit>
#include <cmath>

#include "scenenov/errors.hpp"
#include "scenenov/models/models.hpp"

namespace scenenov::models {

std::string encoder_name(EncoderKind k) { return k == EncoderKind::kViT ? "vit" : "res_small"; }

EncoderKind parse_encoder(const std::string& name) {
  if (name == "vit") return EncoderKind::kViT;
  if (name == "res_small") return EncoderKind::kResSmall;
  throw ParameterError("unknown encoder kind '" + name + "' (expected vit or res_small)");
}

EncoderConfig EncoderConfig::vit_s() { return EncoderConfig{}; }

EncoderConfig EncoderConfig::res_small() {
  EncoderConfig c;
  c.kind = EncoderKind::kResSmall;
  return c;
}

void EncoderConfig::check() const {
  if (image_size < 8) throw ParameterError("image_size must be at least 8");
  const std::size_t q = image_size / 4;
  if (image_size % 4 != 0 || !std::has_single_bit(q))
    throw ParameterError("image_size must be 4 * 2^k, got " + std::to_string(image_size));
  if (latent_dim == 0) throw ParameterError("latent_dim must be positive");
  if (decoder_base == 0) throw ParameterError("decoder_base must be positive");
  if (!use_decoder && !use_triplet) throw ParameterError("at least one of use_decoder and use_triplet must be set");
  if (kind == EncoderKind::kViT) {
    if (patch_size == 0 || image_size % patch_size != 0)
      throw ParameterError("image_size " + std::to_string(image_size) + " is not divisible by patch_size " +
                           std::to_string(patch_size));
    if (n_heads == 0 || embed_dim == 0 || embed_dim % n_heads != 0)
      throw ParameterError("embed_dim " + std::to_string(embed_dim) + " is not divisible by n_heads " +
                           std::to_string(n_heads));
    if (n_layers == 0 || mlp_dim == 0) throw ParameterError("n_layers and mlp_dim must be positive");
  } else {
    if (channels.empty()) throw ParameterError("res_small needs at least one stage");
    for (std::size_t c : channels)
      if (c == 0) throw ParameterError("channel widths must be positive");
    if (image_size >> channels.size() == 0) throw ParameterError("too many stride-2 stages for image_size");
  }
}

void TrainConfig::check() const {
  if (!(margin > 0.0) || !std::isfinite(margin)) throw ParameterError("margin must be positive");
  if (!(lambda_rec > 0.0) || !std::isfinite(lambda_rec)) throw ParameterError("lambda_rec must be positive");
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate))
    throw ParameterError("learning_rate must be positive");
  if (batch_size == 0) throw ParameterError("batch_size must be positive");
  if (pool_size == 0) throw ParameterError("pool_size must be positive");
}

// ---------------------------------------------------------------------------

template <class T>
std::size_t Model<T>::add(const std::string& name, Shape shape, double stddev, Rng& rng, bool decoder) {
  Tensor<T> v(std::move(shape));
  if (stddev > 0.0) {
    std::normal_distribution<double> n(0.0, stddev);
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = T(n(rng));
  }
  params_.emplace_back(name, std::move(v));
  is_decoder_.push_back(decoder);
  return params_.size() - 1;
}

template <class T>
typename Model<T>::Linear Model<T>::add_linear(const std::string& name, std::size_t in, std::size_t out, double gain,
                                               Rng& rng, bool decoder) {
  Linear l;
  l.w = add(name + ".w", {in, out}, gain / std::sqrt(double(in)), rng, decoder);
  l.b = add(name + ".b", {out}, 0.0, rng, decoder);
  return l;
}

template <class T>
typename Model<T>::Conv Model<T>::add_conv(const std::string& name, std::size_t k, std::size_t in, std::size_t out,
                                           double gain, Rng& rng, bool decoder) {
  Conv c;
  c.w = add(name + ".w", {k, k, in, out}, gain / std::sqrt(double(k * k * in)), rng, decoder);
  c.b = add(name + ".b", {out}, 0.0, rng, decoder);
  return c;
}

template <class T>
typename Model<T>::Norm Model<T>::add_norm(const std::string& name, std::size_t dim) {
  Norm n;
  params_.emplace_back(name + ".gamma", Tensor<T>({dim}, T(1)));
  is_decoder_.push_back(false);
  n.gamma = params_.size() - 1;
  params_.emplace_back(name + ".beta", Tensor<T>({dim}));
  is_decoder_.push_back(false);
  n.beta = params_.size() - 1;
  return n;
}

template <class T>
Model<T>::Model(const EncoderConfig& cfg, std::uint64_t seed) : cfg_(cfg) {
  cfg_.check();
  const double relu_gain = std::sqrt(2.0);
  const std::size_t S = cfg_.image_size, L = cfg_.latent_dim;
  // Separate streams keep the decoder's initial weights independent of the
  // encoder kind.
  Rng enc(seed);
  Rng dec(seed ^ 0xd1b54a32d192ed03ull);

  if (cfg_.kind == EncoderKind::kViT) {
    const std::size_t D = cfg_.embed_dim, ps = cfg_.patch_size;
    const std::size_t tokens = (S / ps) * (S / ps) + 1;
    patch_embed_ = add_linear("vit.patch", ps * ps, D, 1.0, enc);
    cls_ = add("vit.cls", {1, D}, 0.02, enc, false);
    pos_ = add("vit.pos", {tokens, D}, 0.02, enc, false);
    for (std::size_t i = 0; i < cfg_.n_layers; ++i) {
      const std::string b = "vit.block" + std::to_string(i);
      Block blk;
      blk.ln1 = add_norm(b + ".ln1", D);
      blk.qkv = add_linear(b + ".qkv", D, 3 * D, 1.0, enc);
      blk.proj = add_linear(b + ".proj", D, D, 1.0, enc);
      blk.ln2 = add_norm(b + ".ln2", D);
      blk.fc1 = add_linear(b + ".fc1", D, cfg_.mlp_dim, relu_gain, enc);
      blk.fc2 = add_linear(b + ".fc2", cfg_.mlp_dim, D, 1.0, enc);
      blocks_.push_back(blk);
    }
    final_norm_ = add_norm("vit.norm", D);
    head1_ = add_linear("vit.head1", D, D, relu_gain, enc);
    head2_ = add_linear("vit.head2", D, L, 1.0, enc);
  } else {
    std::size_t in = 1;
    for (std::size_t s = 0; s < cfg_.channels.size(); ++s) {
      const std::string name = "res.stage" + std::to_string(s);
      const std::size_t c = cfg_.channels[s];
      ResStage st;
      st.entry = add_conv(name + ".entry", 3, in, c, relu_gain, enc);
      for (std::size_t b = 0; b < cfg_.n_blocks; ++b) {
        const std::string bn = name + ".block" + std::to_string(b);
        Conv c1 = add_conv(bn + ".conv1", 3, c, c, relu_gain, enc);
        // Small residual branch at init keeps activations bounded.
        Conv c2 = add_conv(bn + ".conv2", 3, c, c, 0.5, enc);
        st.blocks.emplace_back(c1, c2);
      }
      stages_.push_back(std::move(st));
      in = c;
    }
    res_head_ = add_linear("res.head", in, L, 1.0, enc);
  }

  std::size_t c = cfg_.decoder_base;
  dec_in_ = add_linear("dec.in", L, 16 * c, relu_gain, dec, true);
  for (std::size_t i = 0, up = S / 4; up > 1; ++i, up /= 2) {
    const std::size_t out = std::max<std::size_t>(8, cfg_.decoder_base >> (i + 1));
    dec_convs_.push_back(add_conv("dec.up" + std::to_string(i), 3, c, out, relu_gain, dec, true));
    c = out;
  }
  dec_out_ = add_conv("dec.out", 1, c, 1, 1.0, dec, true);
  // Start near the mostly dark background instead of mid-gray.
  params_[dec_out_.b].value.fill(T(-2));
}

template <class T>
std::vector<Parameter<T>*> Model<T>::trainable() {
  std::vector<Parameter<T>*> out;
  for (std::size_t i = 0; i < params_.size(); ++i)
    if (cfg_.use_decoder || !is_decoder_[i]) out.push_back(&params_[i]);
  return out;
}

template <class T>
Parameter<T>& Model<T>::parameter(const std::string& name) {
  for (auto& p : params_)
    if (p.name == name) return p;
  throw ParameterError("model has no parameter '" + name + "'");
}

template <class T>
std::size_t Model<T>::encoder_parameter_count() const {
  std::size_t n = 0;
  for (std::size_t i = 0; i < params_.size(); ++i)
    if (!is_decoder_[i]) n += params_[i].value.size();
  return n;
}

template <class T>
std::size_t Model<T>::decoder_parameter_count() const {
  std::size_t n = 0;
  for (std::size_t i = 0; i < params_.size(); ++i)
    if (is_decoder_[i]) n += params_[i].value.size();
  return n;
}

template <class T>
Var<T> Model<T>::encode(Tape<T>& tape, Var<T> x) {
  const Shape& s = x.shape();
  const std::size_t S = cfg_.image_size;
  if (s.size() != 4 || s[1] != S || s[2] != S || s[3] != 1)
    throw ShapeError("encoder expects [N, " + std::to_string(S) + ", " + std::to_string(S) + ", 1], got " +
                     ad::shape_str(s));
  return cfg_.kind == EncoderKind::kViT ? encode_vit(tape, x) : encode_res(tape, x);
}

template <class T>
Var<T> Model<T>::encode_vit(Tape<T>& tape, Var<T> x) {
  const std::size_t N = x.shape()[0], S = cfg_.image_size, ps = cfg_.patch_size, g = S / ps;
  const std::size_t D = cfg_.embed_dim, H = cfg_.n_heads, dh = D / H, P = g * g, Tk = P + 1;

  Var<T> patches = ad::reshape(x, {N, g, ps, g, ps});
  patches = ad::reshape(ad::permute(patches, {0, 1, 3, 2, 4}), {N, P, ps * ps});
  Var<T> h = apply(tape, patch_embed_, patches);
  Var<T> cls = ad::repeat_leading(p(tape, cls_), N);  // [N, 1, D]
  h = ad::add(ad::concat<T>({cls, h}, 1), p(tape, pos_));

  const T inv_sqrt = T(1) / std::sqrt(T(dh));
  for (const Block& b : blocks_) {
    Var<T> qkv = apply(tape, b.qkv, norm(tape, b.ln1, h));  // [N, T, 3D]
    qkv = ad::permute(ad::reshape(qkv, {N, Tk, 3, H, dh}), {2, 0, 3, 1, 4});
    auto head = [&](std::size_t i) { return ad::reshape(ad::slice(qkv, 0, i, i + 1), {N * H, Tk, dh}); };
    Var<T> attn = ad::softmax(ad::scale(ad::matmul(head(0), head(1), false, true), inv_sqrt));
    Var<T> o = ad::reshape(ad::matmul(attn, head(2)), {N, H, Tk, dh});
    o = ad::reshape(ad::permute(o, {0, 2, 1, 3}), {N, Tk, D});
    h = ad::add(h, apply(tape, b.proj, o));
    Var<T> m = ad::gelu(apply(tape, b.fc1, norm(tape, b.ln2, h)));
    h = ad::add(h, apply(tape, b.fc2, m));
  }
  Var<T> token = ad::reshape(ad::slice(h, 1, 0, 1), {N, D});
  token = norm(tape, final_norm_, token);
  return apply(tape, head2_, ad::gelu(apply(tape, head1_, token)));
}

template <class T>
Var<T> Model<T>::encode_res(Tape<T>& tape, Var<T> x) {
  Var<T> h = x;
  for (const ResStage& st : stages_) {
    h = ad::relu(apply(tape, st.entry, h, 2, 1));
    for (const auto& [c1, c2] : st.blocks) {
      Var<T> r = apply(tape, c2, ad::relu(apply(tape, c1, h, 1, 1)), 1, 1);
      h = ad::relu(ad::add(h, r));
    }
  }
  h = ad::mean(ad::mean(h, 1), 1);  // [N, C]
  return apply(tape, res_head_, h);
}

template <class T>
Var<T> Model<T>::decode(Tape<T>& tape, Var<T> z) {
  const Shape& s = z.shape();
  if (s.size() != 2 || s[1] != cfg_.latent_dim)
    throw ShapeError("decoder expects [N, " + std::to_string(cfg_.latent_dim) + "], got " + ad::shape_str(s));
  const std::size_t N = s[0];
  Var<T> h = ad::relu(apply(tape, dec_in_, z));
  h = ad::reshape(h, {N, 4, 4, cfg_.decoder_base});
  for (const Conv& c : dec_convs_) h = ad::relu(apply(tape, c, ad::upsample_nearest2x(h), 1, 1));
  return ad::sigmoid(apply(tape, dec_out_, h, 1, 0));
}

template <class T>
Tensor<T> stack_images(const std::vector<const raster::Image*>& images) {
  if (images.empty()) throw ShapeError("no images to stack");
  const std::size_t S = images.front()->size;
  Tensor<T> out({images.size(), S, S, 1});
  for (std::size_t i = 0; i < images.size(); ++i) {
    if (images[i]->size != S)
      throw ShapeError("image " + std::to_string(i) + " is " + std::to_string(images[i]->size) + "x" +
                       std::to_string(images[i]->size) + ", expected " + std::to_string(S));
    for (std::size_t j = 0; j < S * S; ++j) out[i * S * S + j] = T(images[i]->pixels[j]);
  }
  return out;
}

template <class T>
Tensor<T> embed_images(Model<T>& model, const std::vector<const raster::Image*>& images, std::size_t batch) {
  const std::size_t L = model.config().latent_dim;
  Tensor<T> out({images.size(), L});
  for (std::size_t b = 0; b < images.size(); b += batch) {
    const std::size_t e = std::min(images.size(), b + batch);
    std::vector<const raster::Image*> part(images.begin() + long(b), images.begin() + long(e));
    Tape<T> tape(false);
    Var<T> z = model.encode(tape, tape.constant(stack_images<T>(part)));
    std::copy(z.value().data(), z.value().data() + z.value().size(), out.data() + b * L);
  }
  return out;
}

template class Model<float>;
template class Model<double>;
template Tensor<float> stack_images(const std::vector<const raster::Image*>&);
template Tensor<double> stack_images(const std::vector<const raster::Image*>&);
template Tensor<float> embed_images(Model<float>&, const std::vector<const raster::Image*>&, std::size_t);
template Tensor<double> embed_images(Model<double>&, const std::vector<const raster::Image*>&, std::size_t);

}  // namespace scenenov::models
