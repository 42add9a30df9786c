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

#include <string>

#include "json.hpp"
#include "scenenov/models/models.hpp"

namespace scenenov::models {

// Missing keys keep their defaults. Unknown keys and wrong types raise
// ParseError naming `path` plus the key.
nlohmann::json to_json(const EncoderConfig& c);
nlohmann::json to_json(const TrainConfig& c);
EncoderConfig encoder_from_json(const nlohmann::json& j, const std::string& path = "/encoder");
TrainConfig train_from_json(const nlohmann::json& j, const std::string& path = "/train");

std::string precision_name(Precision p);
Precision parse_precision(const std::string& name);  // "fp32" | "fp64"

}  // namespace scenenov::models
