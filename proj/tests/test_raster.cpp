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

#include <cmath>
#include <random>
#include <set>

#include "doctest.h"
#include "scenenov/errors.hpp"
#include "scenenov/raster/raster.hpp"

using namespace scenenov;
using namespace scenenov::raster;
using roadnet::Lane;
using roadnet::RoadNetwork;

namespace {

RoadNetwork straight_lane(double y, double width) {
  RoadNetwork net;
  Lane l;
  l.id = 0;
  l.centerline = {{-80.0, y}, {80.0, y}};
  l.width = width;
  net.lanes = {l};
  net.query = {0, 80.0};
  return net;
}

}  // namespace

TEST_CASE("render: zero drivable lanes gives a black image") {
  RoadNetwork net = straight_lane(0.0, 4.0);
  net.lanes[0].drivable = false;
  const Image img = render(net);
  for (float v : img.pixels) CHECK(v == 0.0f);
}

TEST_CASE("render: horizontal lane footprint matches the analytic oracle") {
  // Lane centered 0.3 m above the window center, 4 m wide, extent 100 m,
  // S = 64. The query sits on an undrawn lane through the origin.
  const double y0 = 0.3, w = 4.0;
  RoadNetwork net = straight_lane(y0, w);
  Lane carrier;
  carrier.id = 1;
  carrier.centerline = {{-10.0, 0.0}, {10.0, 0.0}};
  carrier.drivable = false;
  net.lanes.push_back(carrier);
  net.query = {1, 10.0};
  const Image img = render(net);

  const double px = 100.0 / 64.0;
  // Boundary lines in continuous row coordinates (row 0 at the top).
  const double v_top = 32.0 - (y0 + w / 2) / px;
  const double v_bot = 32.0 - (y0 - w / 2) / px;
  for (std::size_t r = 0; r < 64; ++r) {
    const double center = double(r) + 0.5;
    float expect = kBackground;
    if (center >= v_top && center < v_bot) expect = kRoad;
    if (r == std::size_t(std::floor(v_top)) || r == std::size_t(std::floor(v_bot))) expect = kMarking;
    for (std::size_t c = 0; c < 64; ++c) {
      CAPTURE(r);
      CHECK(img.at(r, c) == expect);
    }
  }
  // Nonzero rows stay within ceil(64 * 2 / 100) + 1 of the center row.
  const long bound = long(std::ceil(64.0 * 2.0 / 100.0)) + 1;
  RoadNetwork centered = straight_lane(0.0, w);
  const Image c = render(centered);
  for (std::size_t r = 0; r < 64; ++r)
    for (std::size_t col = 0; col < 64; ++col)
      if (c.at(r, col) != 0.0f) CHECK(std::labs(long(r) - 32) <= bound);
}

TEST_CASE("render: values are restricted to three levels and deterministic") {
  for (auto kind : {roadnet::SceneKind::roundabout(5), roadnet::SceneKind::crossing(4), roadnet::SceneKind::highway()}) {
    const auto net = roadnet::generate_scene(kind, {}, 17);
    const Image a = render(net);
    const Image b = render(net);
    CHECK(a == b);
    std::set<float> levels(a.pixels.begin(), a.pixels.end());
    for (float v : levels) CHECK((v == kBackground || v == kRoad || v == kMarking));
    CHECK(levels.count(kRoad) == 1);
    CHECK(levels.count(kMarking) == 1);
  }
}

TEST_CASE("render: translation equivariance") {
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const auto kind = seed % 2 ? roadnet::SceneKind::roundabout(4) : roadnet::SceneKind::multi_lane();
    const auto net = roadnet::generate_scene(kind, {}, seed);
    auto shifted = net;
    for (auto& l : shifted.lanes)
      for (auto& p : l.centerline) {
        p.x += 256.0;
        p.y -= 512.0;
      }
    CHECK(render(net) == render(shifted));
  }
}

TEST_CASE("render: invalid networks are rejected") {
  RoadNetwork net = straight_lane(0.0, 4.0);
  net.query = {0, 500.0};
  CHECK_THROWS_AS(render(net), ValidationError);
  net = straight_lane(0.0, 4.0);
  CHECK_THROWS_AS(render(net, {0.0, 64}), ParameterError);
  CHECK_THROWS_AS(render(net, {100.0, 4}), ParameterError);
}

TEST_CASE("pgm: all-zero 8x8 image") {
  const std::string bytes = write_pgm(Image(8));
  const std::string header = "P5\n8 8\n255\n";
  REQUIRE(bytes.size() == header.size() + 64);
  CHECK(bytes.substr(0, header.size()) == header);
  for (std::size_t i = header.size(); i < bytes.size(); ++i) CHECK(bytes[i] == '\0');
}

TEST_CASE("pgm: round trip equals quantized image") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  Image img(20);
  for (float& v : img.pixels) v = u(rng);
  const Image back = read_pgm(write_pgm(img));
  REQUIRE(back.size == 20);
  for (std::size_t i = 0; i < img.pixels.size(); ++i) CHECK(back.pixels[i] == quantize(img.pixels[i]));
  CHECK(read_pgm(write_pgm(back)) == back);
}

TEST_CASE("pgm: malformed input") {
  const std::string good = write_pgm(Image(8, 0.5f));
  CHECK_THROWS_AS(read_pgm(good.substr(0, good.size() - 1)), FormatError);
  CHECK_THROWS_AS(read_pgm("P6\n8 8\n255\n"), FormatError);
  CHECK_THROWS_AS(read_pgm("P5\n8\n"), FormatError);
  CHECK_THROWS_AS(read_pgm("P5\n8 9\n255\n" + std::string(72, '\0')), FormatError);
  CHECK_THROWS_AS(read_pgm("P5\n8 8\n65535\n" + std::string(128, '\0')), FormatError);
  CHECK_THROWS_AS(read_pgm(""), FormatError);
  CHECK_NOTHROW(read_pgm("P5 # comment\n8 8\n255\n" + std::string(64, '\x7f')));
}
