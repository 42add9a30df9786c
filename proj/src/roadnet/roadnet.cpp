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

#include "scenenov/roadnet/roadnet.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "json.hpp"
#include "scenenov/errors.hpp"

namespace scenenov::roadnet {

using nlohmann::json;

const Lane* RoadNetwork::find(LaneId id) const {
  for (const auto& l : lanes)
    if (l.id == id) return &l;
  return nullptr;
}

const Lane& RoadNetwork::at(LaneId id) const {
  const Lane* l = find(id);
  if (!l) throw ValidationError("unknown lane id " + std::to_string(id));
  return *l;
}

double polyline_length(const Polyline& line) {
  double s = 0.0;
  for (std::size_t i = 1; i < line.size(); ++i)
    s += std::hypot(line[i].x - line[i - 1].x, line[i].y - line[i - 1].y);
  return s;
}

Point point_at(const Polyline& line, double offset) {
  if (line.empty()) throw GeometryError("empty polyline");
  if (offset <= 0.0 || line.size() == 1) return line.front();
  for (std::size_t i = 1; i < line.size(); ++i) {
    const double seg = std::hypot(line[i].x - line[i - 1].x, line[i].y - line[i - 1].y);
    if (offset <= seg && seg > 0.0) {
      const double t = offset / seg;
      return {line[i - 1].x + t * (line[i].x - line[i - 1].x),
              line[i - 1].y + t * (line[i].y - line[i - 1].y)};
    }
    offset -= seg;
  }
  return line.back();
}

Point query_point(const RoadNetwork& net) {
  return point_at(net.at(net.query.lane).centerline, net.query.offset);
}

std::vector<Violation> validate(const RoadNetwork& net) {
  std::vector<Violation> out;
  auto add = [&](std::string path, std::string msg) { out.push_back({std::move(path), std::move(msg)}); };

  std::map<LaneId, std::size_t> index;
  for (std::size_t i = 0; i < net.lanes.size(); ++i) {
    if (!index.emplace(net.lanes[i].id, i).second)
      add("/lanes/" + std::to_string(i) + "/id", "duplicate lane id " + std::to_string(net.lanes[i].id));
  }
  std::map<JunctionId, const Junction*> junctions;
  for (std::size_t i = 0; i < net.junctions.size(); ++i) {
    if (!junctions.emplace(net.junctions[i].id, &net.junctions[i]).second)
      add("/junctions/" + std::to_string(i) + "/id", "duplicate junction id");
  }
  auto lane = [&](LaneId id) -> const Lane* {
    auto it = index.find(id);
    return it == index.end() ? nullptr : &net.lanes[it->second];
  };
  auto contains = [](const std::vector<LaneId>& v, LaneId id) {
    return std::find(v.begin(), v.end(), id) != v.end();
  };

  for (std::size_t i = 0; i < net.lanes.size(); ++i) {
    const Lane& l = net.lanes[i];
    const std::string p = "/lanes/" + std::to_string(i);
    if (l.centerline.size() < 2) add(p + "/centerline", "needs at least 2 points");
    for (std::size_t k = 0; k < l.centerline.size(); ++k) {
      const Point& a = l.centerline[k];
      if (!std::isfinite(a.x) || !std::isfinite(a.y)) add(p + "/centerline/" + std::to_string(k), "non-finite");
      if (k > 0) {
        const Point& b = l.centerline[k - 1];
        if (!(std::hypot(a.x - b.x, a.y - b.y) > 0.0))
          add(p + "/centerline/" + std::to_string(k), "zero-length segment");
      }
    }
    if (!(l.width > 0.0) || !std::isfinite(l.width)) add(p + "/width", "must be > 0");
    if (!(l.speed_limit > 0.0) || !std::isfinite(l.speed_limit)) add(p + "/speed_limit", "must be > 0");

    for (std::size_t k = 0; k < l.successors.size(); ++k) {
      const Lane* s = lane(l.successors[k]);
      const std::string sp = p + "/successors/" + std::to_string(k);
      if (!s) add(sp, "unknown lane " + std::to_string(l.successors[k]));
      else if (!contains(s->predecessors, l.id)) add(sp, "successor does not list this lane as predecessor");
    }
    for (std::size_t k = 0; k < l.predecessors.size(); ++k) {
      const Lane* s = lane(l.predecessors[k]);
      const std::string sp = p + "/predecessors/" + std::to_string(k);
      if (!s) add(sp, "unknown lane " + std::to_string(l.predecessors[k]));
      else if (!contains(s->successors, l.id)) add(sp, "predecessor does not list this lane as successor");
    }
    if (l.left_neighbor) {
      const Lane* n = lane(*l.left_neighbor);
      if (!n) add(p + "/left_neighbor", "unknown lane " + std::to_string(*l.left_neighbor));
      else if (n->right_neighbor != l.id) add(p + "/left_neighbor", "neighbor relation not symmetric");
    }
    if (l.right_neighbor) {
      const Lane* n = lane(*l.right_neighbor);
      if (!n) add(p + "/right_neighbor", "unknown lane " + std::to_string(*l.right_neighbor));
      else if (n->left_neighbor != l.id) add(p + "/right_neighbor", "neighbor relation not symmetric");
    }
    if (l.junction) {
      auto it = junctions.find(*l.junction);
      if (it == junctions.end()) add(p + "/junction", "unknown junction " + std::to_string(*l.junction));
      else if (!contains(it->second->lanes, l.id)) add(p + "/junction", "junction does not list this lane");
    }
  }
  for (std::size_t i = 0; i < net.junctions.size(); ++i) {
    const Junction& j = net.junctions[i];
    for (std::size_t k = 0; k < j.lanes.size(); ++k) {
      const Lane* l = lane(j.lanes[k]);
      const std::string p = "/junctions/" + std::to_string(i) + "/lanes/" + std::to_string(k);
      if (!l) add(p, "unknown lane " + std::to_string(j.lanes[k]));
      else if (l->junction != j.id) add(p, "lane does not reference this junction");
    }
  }
  if (const Lane* q = lane(net.query.lane)) {
    const double len = polyline_length(q->centerline);
    if (!(net.query.offset >= 0.0 && net.query.offset <= len))
      add("/query_position/offset", "outside [0, lane length]");
  } else {
    add("/query_position/lane", "unknown lane " + std::to_string(net.query.lane));
  }
  return out;
}

namespace {

class Reader {
 public:
  [[noreturn]] static void fail(const std::string& path, const std::string& msg) {
    throw ParseError((path.empty() ? std::string("/") : path) + ": " + msg);
  }

  static const json& field(const json& obj, const std::string& path, const char* key) {
    auto it = obj.find(key);
    if (it == obj.end()) fail(path, std::string("missing required key \"") + key + "\"");
    return *it;
  }

  static double number(const json& v, const std::string& path) {
    if (!v.is_number()) fail(path, "expected a number");
    const double d = v.get<double>();
    if (!std::isfinite(d)) fail(path, "expected a finite number");
    return d;
  }

  static std::int64_t integer(const json& v, const std::string& path) {
    if (v.is_number_unsigned()) {
      if (v.get<std::uint64_t>() > static_cast<std::uint64_t>(INT64_MAX)) fail(path, "integer out of range");
      return static_cast<std::int64_t>(v.get<std::uint64_t>());
    }
    if (!v.is_number_integer()) fail(path, "expected an integer");
    return v.get<std::int64_t>();
  }

  static std::optional<std::int64_t> optional_id(const json& obj, const std::string& path, const char* key) {
    auto it = obj.find(key);
    if (it == obj.end() || it->is_null()) return std::nullopt;
    return integer(*it, path + "/" + key);
  }

  static std::vector<LaneId> ids(const json& obj, const std::string& path, const char* key) {
    std::vector<LaneId> out;
    auto it = obj.find(key);
    if (it == obj.end()) return out;
    const std::string p = path + "/" + key;
    if (!it->is_array()) fail(p, "expected an array");
    for (std::size_t i = 0; i < it->size(); ++i) out.push_back(integer((*it)[i], p + "/" + std::to_string(i)));
    return out;
  }

  static void only_keys(const json& obj, const std::string& path, std::initializer_list<const char*> keys) {
    for (auto it = obj.begin(); it != obj.end(); ++it) {
      bool known = false;
      for (const char* k : keys) known = known || it.key() == k;
      if (!known) fail(path + "/" + it.key(), "unknown key");
    }
  }

  static Lane lane(const json& v, const std::string& p) {
    if (!v.is_object()) fail(p, "expected an object");
    only_keys(v, p, {"id", "centerline", "width", "successors", "predecessors", "left_neighbor",
                     "right_neighbor", "speed_limit", "drivable", "junction"});
    Lane l;
    l.id = integer(field(v, p, "id"), p + "/id");
    const json& c = field(v, p, "centerline");
    if (!c.is_array()) fail(p + "/centerline", "expected an array of [x,y]");
    for (std::size_t i = 0; i < c.size(); ++i) {
      const std::string cp = p + "/centerline/" + std::to_string(i);
      if (!c[i].is_array() || c[i].size() != 2) fail(cp, "expected [x,y]");
      l.centerline.push_back({number(c[i][0], cp + "/0"), number(c[i][1], cp + "/1")});
    }
    l.width = number(field(v, p, "width"), p + "/width");
    l.speed_limit = number(field(v, p, "speed_limit"), p + "/speed_limit");
    l.successors = ids(v, p, "successors");
    l.predecessors = ids(v, p, "predecessors");
    l.left_neighbor = optional_id(v, p, "left_neighbor");
    l.right_neighbor = optional_id(v, p, "right_neighbor");
    l.junction = optional_id(v, p, "junction");
    if (auto it = v.find("drivable"); it != v.end()) {
      if (!it->is_boolean()) fail(p + "/drivable", "expected a boolean");
      l.drivable = it->get<bool>();
    }
    return l;
  }
};

json optional_json(const std::optional<std::int64_t>& v) { return v ? json(*v) : json(nullptr); }

}  // namespace

RoadNetwork parse_map(std::string_view text) {
  json doc = json::parse(text.begin(), text.end(), nullptr, false);
  if (doc.is_discarded()) throw ParseError("/: not valid JSON");
  if (!doc.is_object()) Reader::fail("", "expected an object");
  Reader::only_keys(doc, "", {"lanes", "junctions", "query_position"});

  RoadNetwork net;
  const json& lanes = Reader::field(doc, "", "lanes");
  if (!lanes.is_array()) Reader::fail("/lanes", "expected an array");
  for (std::size_t i = 0; i < lanes.size(); ++i) net.lanes.push_back(Reader::lane(lanes[i], "/lanes/" + std::to_string(i)));

  if (auto it = doc.find("junctions"); it != doc.end()) {
    if (!it->is_array()) Reader::fail("/junctions", "expected an array");
    for (std::size_t i = 0; i < it->size(); ++i) {
      const std::string p = "/junctions/" + std::to_string(i);
      const json& j = (*it)[i];
      if (!j.is_object()) Reader::fail(p, "expected an object");
      Reader::only_keys(j, p, {"id", "lanes"});
      Junction out;
      out.id = Reader::integer(Reader::field(j, p, "id"), p + "/id");
      Reader::field(j, p, "lanes");
      out.lanes = Reader::ids(j, p, "lanes");
      net.junctions.push_back(std::move(out));
    }
  }

  const json& q = Reader::field(doc, "", "query_position");
  if (!q.is_object()) Reader::fail("/query_position", "expected an object");
  Reader::only_keys(q, "/query_position", {"lane", "offset"});
  net.query.lane = Reader::integer(Reader::field(q, "/query_position", "lane"), "/query_position/lane");
  net.query.offset = Reader::number(Reader::field(q, "/query_position", "offset"), "/query_position/offset");

  auto violations = validate(net);
  if (!violations.empty()) {
    std::string msg = violations.front().path + ": " + violations.front().message;
    if (violations.size() > 1) msg += " (+" + std::to_string(violations.size() - 1) + " more)";
    throw ValidationError(msg);
  }
  return net;
}

std::string serialize_map(const RoadNetwork& net) {
  json lanes = json::array();
  for (const Lane& l : net.lanes) {
    json c = json::array();
    for (const Point& p : l.centerline) c.push_back({p.x, p.y});
    lanes.push_back({{"id", l.id},
                     {"centerline", std::move(c)},
                     {"width", l.width},
                     {"successors", l.successors},
                     {"predecessors", l.predecessors},
                     {"left_neighbor", optional_json(l.left_neighbor)},
                     {"right_neighbor", optional_json(l.right_neighbor)},
                     {"speed_limit", l.speed_limit},
                     {"drivable", l.drivable},
                     {"junction", optional_json(l.junction)}});
  }
  json junctions = json::array();
  for (const Junction& j : net.junctions) junctions.push_back({{"id", j.id}, {"lanes", j.lanes}});
  json doc = {{"lanes", std::move(lanes)},
              {"junctions", std::move(junctions)},
              {"query_position", {{"lane", net.query.lane}, {"offset", net.query.offset}}}};
  return doc.dump();
}

std::string SceneKind::name() const {
  switch (type) {
    case SceneType::kHighway: return "highway";
    case SceneType::kRoundabout: return "roundabout" + std::to_string(n);
    case SceneType::kCrossing: return "crossing" + std::to_string(n);
    case SceneType::kSingleLane: return "single_lane";
    case SceneType::kMultiLane: return "multi_lane";
  }
  return "unknown";
}

SceneKind SceneKind::parse(std::string_view name) {
  auto with_count = [&](std::string_view prefix, SceneType t, int lo, int hi) -> std::optional<SceneKind> {
    if (name.size() != prefix.size() + 1 || name.substr(0, prefix.size()) != prefix) return std::nullopt;
    const int n = name.back() - '0';
    if (n < lo || n > hi) throw ParameterError("scene kind " + std::string(name) + " out of range");
    return SceneKind{t, n};
  };
  if (name == "highway") return highway();
  if (name == "single_lane") return single_lane();
  if (name == "multi_lane") return multi_lane();
  if (auto k = with_count("roundabout", SceneType::kRoundabout, 3, 6)) return *k;
  if (auto k = with_count("crossing", SceneType::kCrossing, 3, 4)) return *k;
  throw ParameterError("unknown scene kind \"" + std::string(name) + "\"");
}

}  // namespace scenenov::roadnet
