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

#include <cstddef>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "scenenov/roadnet/roadnet.hpp"

namespace scenenov::raster {

inline constexpr float kBackground = 0.0f;
inline constexpr float kRoad = 0.5f;
inline constexpr float kMarking = 1.0f;

// Square grayscale image, row-major, row 0 at the top (north).
struct Image {
  std::size_t size = 0;
  std::vector<float> pixels;

  Image() = default;
  explicit Image(std::size_t s, float fill = kBackground);  // ParameterError when s < 8

  float& at(std::size_t row, std::size_t col) { return pixels[row * size + col]; }
  float at(std::size_t row, std::size_t col) const { return pixels[row * size + col]; }

  bool operator==(const Image&) const = default;
};

struct RenderParams {
  double extent_m = 100.0;
  std::size_t size = 64;
};

// Top view centered on the query position. Drivable lanes are filled at
// kRoad, their two boundaries drawn as 1-pixel lines at kMarking.
// GeometryError when the query position lies on no lane.
Image render(const roadnet::RoadNetwork& net, const RenderParams& params = {});

// Binary P5, maxval 255, values quantized with round(v * 255).
std::string write_pgm(const Image& image);
Image read_pgm(std::string_view bytes);  // FormatError

void save_pgm(const Image& image, const std::filesystem::path& path);
Image load_pgm(const std::filesystem::path& path);

// Value after a write/read round trip.
inline float quantize(float v) {
  const float q = static_cast<float>(static_cast<int>(v * 255.0f + 0.5f));
  return q / 255.0f;
}

}  // namespace scenenov::raster
