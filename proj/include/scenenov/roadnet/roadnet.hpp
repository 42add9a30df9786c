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
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace scenenov::roadnet {

using LaneId = std::int64_t;
using JunctionId = std::int64_t;

struct Point {
  double x = 0.0;
  double y = 0.0;
  bool operator==(const Point&) const = default;
};

using Polyline = std::vector<Point>;

struct Lane {
  LaneId id = 0;
  Polyline centerline;
  double width = 3.5;
  std::vector<LaneId> successors;
  std::vector<LaneId> predecessors;
  std::optional<LaneId> left_neighbor;
  std::optional<LaneId> right_neighbor;
  double speed_limit = 13.9;
  bool drivable = true;
  std::optional<JunctionId> junction;

  bool operator==(const Lane&) const = default;
};

struct Junction {
  JunctionId id = 0;
  std::vector<LaneId> lanes;
  bool operator==(const Junction&) const = default;
};

struct QueryPosition {
  LaneId lane = 0;
  double offset = 0.0;  // meters along the centerline
  bool operator==(const QueryPosition&) const = default;
};

struct RoadNetwork {
  std::vector<Lane> lanes;
  std::vector<Junction> junctions;
  QueryPosition query;

  const Lane* find(LaneId id) const;
  const Lane& at(LaneId id) const;  // throws ValidationError
  bool operator==(const RoadNetwork&) const = default;
};

struct Violation {
  std::string path;
  std::string message;
};

// Empty iff every structural invariant holds.
std::vector<Violation> validate(const RoadNetwork& net);

// Throws ParseError (schema, with a JSON-pointer path) or ValidationError.
RoadNetwork parse_map(std::string_view text);
std::string serialize_map(const RoadNetwork& net);

double polyline_length(const Polyline& line);
// Clamped to [0, length].
Point point_at(const Polyline& line, double offset);
Point query_point(const RoadNetwork& net);

enum class SceneType { kHighway, kRoundabout, kCrossing, kSingleLane, kMultiLane };

struct SceneKind {
  SceneType type = SceneType::kSingleLane;
  int n = 0;  // exits for roundabouts, arms for crossings

  static SceneKind highway() { return {SceneType::kHighway, 0}; }
  static SceneKind roundabout(int exits) { return {SceneType::kRoundabout, exits}; }
  static SceneKind crossing(int arms) { return {SceneType::kCrossing, arms}; }
  static SceneKind single_lane() { return {SceneType::kSingleLane, 0}; }
  static SceneKind multi_lane() { return {SceneType::kMultiLane, 0}; }

  // "highway", "roundabout4", "crossing3", "single_lane", "multi_lane"
  std::string name() const;
  static SceneKind parse(std::string_view name);  // ParameterError

  bool operator==(const SceneKind&) const = default;
};

struct GeneratorParams {
  double lane_width_min = 3.0;
  double lane_width_max = 3.75;
  double max_curvature = 0.004;  // 1/m, for road reference lines
  double jitter_sigma = 0.5;     // m, per centerline vertex
  double vertex_spacing = 5.0;   // m

  void check() const;  // ParameterError on out-of-range knobs
};

RoadNetwork generate_scene(SceneKind kind, const GeneratorParams& params, std::uint64_t seed);

}  // namespace scenenov::roadnet
