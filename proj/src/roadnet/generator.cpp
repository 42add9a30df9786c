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
#include <cmath>
#include <numbers>
#include <random>

#include "scenenov/errors.hpp"
#include "scenenov/roadnet/roadnet.hpp"

namespace scenenov::roadnet {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kUrbanSpeed = 13.9;
constexpr double kHighwaySpeed = 33.3;

Point operator+(Point a, Point b) { return {a.x + b.x, a.y + b.y}; }
Point operator-(Point a, Point b) { return {a.x - b.x, a.y - b.y}; }
Point operator*(double s, Point a) { return {s * a.x, s * a.y}; }
Point unit(double heading) { return {std::cos(heading), std::sin(heading)}; }

Point normalized(Point p) {
  const double n = std::hypot(p.x, p.y);
  return n > 0.0 ? Point{p.x / n, p.y / n} : Point{1.0, 0.0};
}

// Parallel curve at signed distance d (positive = left of travel direction),
// using averaged vertex tangents.
Polyline offset(const Polyline& line, double d) {
  Polyline out(line.size());
  for (std::size_t i = 0; i < line.size(); ++i) {
    const Point a = line[i == 0 ? 0 : i - 1];
    const Point b = line[i + 1 == line.size() ? i : i + 1];
    const Point t = normalized(b - a);
    out[i] = line[i] + d * Point{-t.y, t.x};
  }
  return out;
}

Polyline reversed(Polyline line) {
  std::reverse(line.begin(), line.end());
  return line;
}

Polyline slice(const Polyline& line, std::size_t begin, std::size_t end) {
  return Polyline(line.begin() + static_cast<std::ptrdiff_t>(begin), line.begin() + static_cast<std::ptrdiff_t>(end) + 1);
}

Polyline bezier(Point a, Point c, Point b, int steps) {
  Polyline out;
  for (int i = 0; i <= steps; ++i) {
    const double t = double(i) / steps;
    const double u = 1.0 - t;
    out.push_back(u * u * a + 2.0 * u * t * c + t * t * b);
  }
  return out;
}

class Builder {
 public:
  Builder(const GeneratorParams& p, std::uint64_t seed) : p_(p), rng_(seed) {}

  double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng_); }

  void jitter(Polyline& line, std::size_t keep_begin = 0, std::size_t keep_end = 0) {
    std::normal_distribution<double> n(0.0, 1.0);
    for (std::size_t i = 0; i < line.size(); ++i) {
      const double dx = n(rng_), dy = n(rng_);
      if (i < keep_begin || i + keep_end >= line.size()) continue;
      line[i].x += p_.jitter_sigma * dx;
      line[i].y += p_.jitter_sigma * dy;
    }
  }

  // Arc of constant curvature sampled every vertex_spacing meters, jittered.
  Polyline road(Point start, double heading, double curvature, double length, std::size_t steps = 0) {
    if (steps == 0) steps = std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(length / p_.vertex_spacing)));
    const double ds = length / double(steps);
    Polyline out{start};
    Point pos = start;
    for (std::size_t i = 0; i < steps; ++i) {
      heading += 0.5 * curvature * ds;
      pos = pos + ds * unit(heading);
      heading += 0.5 * curvature * ds;
      out.push_back(pos);
    }
    jitter(out);
    return out;
  }

  LaneId lane(Polyline c, double speed, bool drivable = true) {
    Lane l;
    l.id = static_cast<LaneId>(net_.lanes.size());
    l.centerline = std::move(c);
    l.width = width_;
    l.speed_limit = speed;
    l.drivable = drivable;
    net_.lanes.push_back(std::move(l));
    return net_.lanes.back().id;
  }

  void link(LaneId a, LaneId b) {
    net_.lanes[a].successors.push_back(b);
    net_.lanes[b].predecessors.push_back(a);
  }

  void neighbors(LaneId left, LaneId right) {
    net_.lanes[left].right_neighbor = right;
    net_.lanes[right].left_neighbor = left;
  }

  JunctionId junction(const std::vector<LaneId>& members) {
    const JunctionId id = static_cast<JunctionId>(net_.junctions.size());
    net_.junctions.push_back({id, members});
    for (LaneId l : members) net_.lanes[l].junction = id;
    return id;
  }

  void query(LaneId lane, double offset) { net_.query = {lane, offset}; }

  RoadNetwork finish() { return std::move(net_); }

  double width_ = 3.5;
  const GeneratorParams& p_;
  std::mt19937_64 rng_;
  RoadNetwork net_;
};

std::size_t steps_for(const Builder& b, double length) {
  return std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(length / b.p_.vertex_spacing)));
}

// Straight-ish road split into equal segments along a shared reference line;
// `per_dir` lanes in travel direction, the same number opposite (unlinked to
// the forward lanes). Returns the forward lanes [segment][lane], lane 0
// nearest the median.
std::vector<std::vector<LaneId>> divided_road(Builder& b, int per_dir, std::size_t segments, double seg_len,
                                              double speed, double median) {
  const double heading = b.uniform(-kPi, kPi);
  const double curvature = b.uniform(-b.p_.max_curvature, b.p_.max_curvature);
  const Point start = -(seg_len * 1.5) * unit(heading);
  const std::size_t steps = steps_for(b, seg_len);
  const Polyline ref = b.road(start, heading, curvature, seg_len * double(segments), steps * segments);

  std::vector<std::vector<LaneId>> fwd(segments), bwd(segments);
  for (std::size_t s = 0; s < segments; ++s) {
    const std::size_t lo = s * steps;
    const Polyline piece = slice(ref, lo, lo + steps);
    for (int k = 0; k < per_dir; ++k) {
      const double d = 0.5 * median + (k + 0.5) * b.width_;
      fwd[s].push_back(b.lane(offset(piece, -d), speed));
    }
    for (int k = 0; k < per_dir; ++k) {
      const double d = 0.5 * median + (k + 0.5) * b.width_;
      bwd[s].push_back(b.lane(reversed(offset(piece, d)), speed));
    }
  }
  for (std::size_t s = 0; s < segments; ++s) {
    for (int k = 0; k + 1 < per_dir; ++k) {
      b.neighbors(fwd[s][k], fwd[s][k + 1]);
      b.neighbors(bwd[s][k], bwd[s][k + 1]);
    }
    if (s + 1 < segments) {
      for (int k = 0; k < per_dir; ++k) {
        b.link(fwd[s][k], fwd[s + 1][k]);
        b.link(bwd[s + 1][k], bwd[s][k]);
      }
    }
  }
  return fwd;
}

RoadNetwork highway(Builder& b) {
  const double seg = b.uniform(110.0, 130.0);
  auto fwd = divided_road(b, 3, 4, seg, kHighwaySpeed, b.uniform(2.0, 4.0));
  const LaneId q = fwd[1][1];
  b.query(q, 0.5 * polyline_length(b.net_.lanes[q].centerline));
  return b.finish();
}

RoadNetwork multi_lane(Builder& b) {
  const double seg = b.uniform(38.0, 45.0);
  auto fwd = divided_road(b, 2, 4, seg, kUrbanSpeed, 0.0);
  const LaneId q = fwd[1][1];
  b.query(q, 0.5 * polyline_length(b.net_.lanes[q].centerline));
  return b.finish();
}

RoadNetwork single_lane(Builder& b) {
  const double seg = b.uniform(38.0, 45.0);
  const double heading = b.uniform(-kPi, kPi);
  const double curvature = b.uniform(-b.p_.max_curvature, b.p_.max_curvature);
  const Point start = -(seg * 1.5) * unit(heading);
  const std::size_t segments = 5;
  const std::size_t steps = steps_for(b, seg);
  const Polyline ref = b.road(start, heading, curvature, seg * double(segments), steps * segments);
  std::vector<LaneId> chain;
  for (std::size_t s = 0; s < segments; ++s) {
    chain.push_back(b.lane(slice(ref, s * steps, (s + 1) * steps), kUrbanSpeed));
    if (s > 0) b.link(chain[s - 1], chain[s]);
  }
  // A footpath alongside: present in the map, but neither drawn nor routed.
  const double path_offset = 0.5 * b.width_ + b.uniform(2.0, 3.0);
  b.lane(offset(ref, path_offset), 1.4, false);
  b.net_.lanes.back().width = 2.0;
  b.query(chain[1], 0.5 * polyline_length(b.net_.lanes[chain[1]].centerline));
  return b.finish();
}

// Arm angles evenly spread with a perturbation of at most `spread` of the
// nominal gap, so arms never cross.
std::vector<double> arm_angles(Builder& b, int n, double spread) {
  const double gap = 2.0 * kPi / n;
  const double base = b.uniform(-kPi, kPi);
  std::vector<double> a(n);
  for (int i = 0; i < n; ++i) a[i] = base + gap * i + b.uniform(-spread, spread) * gap;
  return a;
}

struct Arm {
  LaneId in = 0;   // towards the junction
  LaneId out = 0;  // away from it
  Point in_end;
  Point out_start;
};

// Arm i: incoming lane on the right of the inbound direction, outgoing lane on
// the right of the outbound direction, both starting `inner` meters from c.
Arm make_arm(Builder& b, Point c, double angle, double inner, double length) {
  const Point u = unit(angle);
  const Polyline ref = b.road(c + inner * u, angle, 0.0, length);
  Polyline in = reversed(offset(ref, 0.5 * b.width_));
  Polyline out = offset(ref, -0.5 * b.width_);
  Arm arm;
  arm.in = b.lane(std::move(in), kUrbanSpeed);
  arm.out = b.lane(std::move(out), kUrbanSpeed);
  arm.in_end = b.net_.lanes[arm.in].centerline.back();
  arm.out_start = b.net_.lanes[arm.out].centerline.front();
  return arm;
}

RoadNetwork roundabout(Builder& b, int n) {
  const double radius = b.uniform(12.0, 18.0);
  const Point c{0.0, 0.0};
  const auto angles = arm_angles(b, n, 0.15);
  const double inner = radius + b.uniform(6.0, 9.0);

  std::vector<Arm> arms;
  for (int i = 0; i < n; ++i) arms.push_back(make_arm(b, c, angles[i], inner, i == 0 ? b.uniform(25.0, 35.0) : 40.0));

  // Ring vertices, counter-clockwise; attach[i] indexes the vertex at arm i.
  Polyline ring;
  std::vector<std::size_t> attach;
  for (int i = 0; i < n; ++i) {
    const double a0 = angles[i];
    double a1 = angles[(i + 1) % n];
    while (a1 <= a0) a1 += 2.0 * kPi;
    const int steps = std::max(2, int(std::lround(radius * (a1 - a0) / b.p_.vertex_spacing)));
    attach.push_back(ring.size());
    for (int k = 0; k < steps; ++k) ring.push_back(c + radius * unit(a0 + (a1 - a0) * k / steps));
  }
  b.jitter(ring);
  ring.push_back(ring.front());
  attach.push_back(ring.size() - 1);

  std::vector<LaneId> members, ring_ids, entry, exit;
  for (int i = 0; i < n; ++i) {
    const Point at = ring[attach[i]];
    const Point inward = normalized(c - at);
    const Point tangent{-inward.y, inward.x};
    const double d = std::hypot(arms[i].in_end.x - at.x, arms[i].in_end.y - at.y);
    entry.push_back(b.lane(bezier(arms[i].in_end, at - 0.5 * d * tangent - 0.3 * d * inward, at, 6), 8.3));
    exit.push_back(b.lane(bezier(at, at + 0.5 * d * tangent - 0.3 * d * inward, arms[i].out_start, 6), 8.3));
  }
  for (int i = 0; i < n; ++i) ring_ids.push_back(b.lane(slice(ring, attach[i], attach[i + 1]), 8.3));
  for (int i = 0; i < n; ++i) {
    b.link(arms[i].in, entry[i]);
    b.link(entry[i], ring_ids[i]);
    b.link(ring_ids[(i + n - 1) % n], ring_ids[i]);
    b.link(ring_ids[(i + n - 1) % n], exit[i]);
    b.link(exit[i], arms[i].out);
  }
  for (int i = 0; i < n; ++i) {
    members.push_back(entry[i]);
    members.push_back(ring_ids[i]);
    members.push_back(exit[i]);
  }
  b.junction(members);
  const LaneId q = arms[0].in;
  b.query(q, std::max(0.0, polyline_length(b.net_.lanes[q].centerline) - 4.0));
  return b.finish();
}

RoadNetwork crossing(Builder& b, int n) {
  const Point c{0.0, 0.0};
  const auto angles = arm_angles(b, n, 0.08);
  const double inner = b.uniform(8.0, 11.0);
  std::vector<Arm> arms;
  for (int i = 0; i < n; ++i) arms.push_back(make_arm(b, c, angles[i], inner, i == 0 ? b.uniform(25.0, 35.0) : 45.0));

  std::vector<LaneId> members;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      if (i == j) continue;
      const LaneId l = b.lane(bezier(arms[i].in_end, c, arms[j].out_start, 8), kUrbanSpeed);
      b.link(arms[i].in, l);
      b.link(l, arms[j].out);
      members.push_back(l);
    }
  }
  b.junction(members);
  const LaneId q = arms[0].in;
  b.query(q, std::max(0.0, polyline_length(b.net_.lanes[q].centerline) - 4.0));
  return b.finish();
}

}  // namespace

void GeneratorParams::check() const {
  auto in = [](double v, double lo, double hi) { return std::isfinite(v) && v >= lo && v <= hi; };
  if (!in(lane_width_min, 2.5, 4.0) || !in(lane_width_max, 2.5, 4.0) || lane_width_min > lane_width_max)
    throw ParameterError("lane widths must satisfy 2.5 <= min <= max <= 4.0");
  if (!in(max_curvature, 0.0, 0.02)) throw ParameterError("max_curvature must lie in [0, 0.02] 1/m");
  if (!in(jitter_sigma, 0.0, 1.0)) throw ParameterError("jitter_sigma must lie in [0, 1] m");
  if (!in(vertex_spacing, 1.0, 10.0)) throw ParameterError("vertex_spacing must lie in [1, 10] m");
}

RoadNetwork generate_scene(SceneKind kind, const GeneratorParams& params, std::uint64_t seed) {
  params.check();
  Builder b(params, seed);
  b.width_ = params.lane_width_min == params.lane_width_max
                 ? params.lane_width_min
                 : b.uniform(params.lane_width_min, params.lane_width_max);
  switch (kind.type) {
    case SceneType::kHighway: return highway(b);
    case SceneType::kMultiLane: return multi_lane(b);
    case SceneType::kSingleLane: return single_lane(b);
    case SceneType::kRoundabout:
      if (kind.n < 3 || kind.n > 6) throw ParameterError("roundabout exits must lie in [3, 6]");
      return roundabout(b, kind.n);
    case SceneType::kCrossing:
      if (kind.n < 3 || kind.n > 4) throw ParameterError("crossing arms must lie in [3, 4]");
      return crossing(b, kind.n);
  }
  throw ParameterError("unknown scene kind");
}

}  // namespace scenenov::roadnet
