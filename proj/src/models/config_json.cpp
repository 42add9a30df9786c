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

#include "scenenov/models/config_json.hpp"

#include <set>
#include <type_traits>

#include "scenenov/errors.hpp"

namespace scenenov::models {

using nlohmann::json;

std::string precision_name(Precision p) { return p == Precision::kFloat64 ? "fp64" : "fp32"; }

Precision parse_precision(const std::string& name) {
  if (name == "fp32") return Precision::kFloat32;
  if (name == "fp64") return Precision::kFloat64;
  throw ParameterError("unknown precision '" + name + "' (expected fp32 or fp64)");
}

json to_json(const EncoderConfig& c) {
  return {{"kind", encoder_name(c.kind)},
          {"image_size", c.image_size},
          {"latent_dim", c.latent_dim},
          {"patch_size", c.patch_size},
          {"n_layers", c.n_layers},
          {"embed_dim", c.embed_dim},
          {"mlp_dim", c.mlp_dim},
          {"n_heads", c.n_heads},
          {"channels", c.channels},
          {"n_blocks", c.n_blocks},
          {"decoder_base", c.decoder_base},
          {"use_decoder", c.use_decoder},
          {"use_triplet", c.use_triplet}};
}

json to_json(const TrainConfig& c) {
  return {{"margin", c.margin},
          {"epochs", c.epochs},
          {"batch_size", c.batch_size},
          {"learning_rate", c.learning_rate},
          {"pool_size", c.pool_size},
          {"lambda_rec", c.lambda_rec},
          {"seed", c.seed},
          {"precision", precision_name(c.precision)}};
}

namespace {

void check_keys(const json& j, const std::string& path, const std::set<std::string>& allowed) {
  if (!j.is_object()) throw ParseError(path + ": expected an object");
  for (const auto& [k, v] : j.items())
    if (!allowed.count(k)) throw ParseError(path + "/" + k + ": unknown key");
}

template <class V>
void read(const json& j, const std::string& path, const char* key, V& out) {
  if (!j.contains(key)) return;
  if constexpr (std::is_unsigned_v<V>)
    if (j.at(key).is_number_integer() && !j.at(key).is_number_unsigned())
      throw ParseError(path + "/" + key + ": must not be negative");
  try {
    out = j.at(key).get<V>();
  } catch (const json::exception&) {
    throw ParseError(path + "/" + key + ": wrong type");
  }
}

}  // namespace

EncoderConfig encoder_from_json(const json& j, const std::string& path) {
  check_keys(j, path, {"kind", "image_size", "latent_dim", "patch_size", "n_layers", "embed_dim", "mlp_dim",
                       "n_heads", "channels", "n_blocks", "decoder_base", "use_decoder", "use_triplet"});
  EncoderConfig c;
  std::string kind = encoder_name(c.kind);
  read(j, path, "kind", kind);
  c.kind = parse_encoder(kind);
  read(j, path, "image_size", c.image_size);
  read(j, path, "latent_dim", c.latent_dim);
  read(j, path, "patch_size", c.patch_size);
  read(j, path, "n_layers", c.n_layers);
  read(j, path, "embed_dim", c.embed_dim);
  read(j, path, "mlp_dim", c.mlp_dim);
  read(j, path, "n_heads", c.n_heads);
  read(j, path, "channels", c.channels);
  read(j, path, "n_blocks", c.n_blocks);
  read(j, path, "decoder_base", c.decoder_base);
  read(j, path, "use_decoder", c.use_decoder);
  read(j, path, "use_triplet", c.use_triplet);
  return c;
}

TrainConfig train_from_json(const json& j, const std::string& path) {
  check_keys(j, path,
             {"margin", "epochs", "batch_size", "learning_rate", "pool_size", "lambda_rec", "seed", "precision"});
  TrainConfig c;
  read(j, path, "margin", c.margin);
  read(j, path, "epochs", c.epochs);
  read(j, path, "batch_size", c.batch_size);
  read(j, path, "learning_rate", c.learning_rate);
  read(j, path, "pool_size", c.pool_size);
  read(j, path, "lambda_rec", c.lambda_rec);
  read(j, path, "seed", c.seed);
  std::string precision = precision_name(c.precision);
  read(j, path, "precision", precision);
  c.precision = parse_precision(precision);
  return c;
}

}  // namespace scenenov::models
