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

#include "scenenov/congraph/congraph.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <deque>
#include <limits>
#include <queue>
#include <set>

#include "json.hpp"
#include "scenenov/errors.hpp"

namespace scenenov::congraph {

ConnGraph::ConnGraph(std::size_t n, std::vector<Edge> edges, std::vector<bool> junction)
    : n_(n), edges_(std::move(edges)), junction_(std::move(junction)) {
  if (n_ == 0) throw GraphError("graph needs at least one node");
  if (n_ > std::numeric_limits<Node>::max()) throw GraphError("graph too large");
  if (junction_.empty()) junction_.assign(n_, false);
  if (junction_.size() != n_) throw GraphError("junction flag count does not match node count");
  std::sort(edges_.begin(), edges_.end());
  for (std::size_t i = 0; i < edges_.size(); ++i) {
    const auto [u, v] = edges_[i];
    if (u >= n_ || v >= n_)
      throw GraphError("edge (" + std::to_string(u) + "," + std::to_string(v) + ") out of range");
    if (u == v) throw GraphError("self-loop at node " + std::to_string(u));
    if (i > 0 && edges_[i - 1] == edges_[i])
      throw GraphError("duplicate edge (" + std::to_string(u) + "," + std::to_string(v) + ")");
  }
  out_.resize(n_);
  in_.resize(n_);
  for (const auto& [u, v] : edges_) {
    out_[u].push_back(v);
    in_[v].push_back(u);
  }
  for (auto& l : in_) std::sort(l.begin(), l.end());
}

bool ConnGraph::has_edge(Node u, Node v) const {
  return std::binary_search(edges_.begin(), edges_.end(), Edge{u, v});
}

ConnGraph symmetrized(const ConnGraph& g) {
  std::vector<Edge> e;
  for (const auto& [u, v] : g.edges()) {
    e.push_back({u, v});
    e.push_back({v, u});
  }
  std::sort(e.begin(), e.end());
  e.erase(std::unique(e.begin(), e.end()), e.end());
  return ConnGraph(g.size(), std::move(e), g.junction_flags());
}

ConnGraph relabeled(const ConnGraph& g, const std::vector<Node>& perm) {
  if (perm.size() != g.size()) throw GraphError("permutation size mismatch");
  std::vector<bool> seen(g.size(), false);
  for (Node p : perm) {
    if (p >= g.size() || seen[p]) throw GraphError("not a permutation");
    seen[p] = true;
  }
  std::vector<Edge> e;
  for (const auto& [u, v] : g.edges()) e.push_back({perm[u], perm[v]});
  std::vector<bool> j(g.size());
  for (std::size_t v = 0; v < g.size(); ++v) j[perm[v]] = g.is_junction(Node(v));
  return ConnGraph(g.size(), std::move(e), std::move(j));
}

RoutingGraph build_routing_graph(const roadnet::RoadNetwork& net) {
  const auto violations = roadnet::validate(net);
  if (!violations.empty()) throw ValidationError(violations.front().path + ": " + violations.front().message);

  RoutingGraph r;
  std::vector<const roadnet::Lane*> lanes;
  for (const auto& l : net.lanes)
    if (l.drivable) lanes.push_back(&l);
  std::sort(lanes.begin(), lanes.end(), [](auto* a, auto* b) { return a->id < b->id; });
  if (lanes.empty()) throw GraphError("network has no drivable lane");
  for (std::size_t i = 0; i < lanes.size(); ++i) {
    r.lane.push_back(lanes[i]->id);
    r.node[lanes[i]->id] = Node(i);
    r.cost.push_back(roadnet::polyline_length(lanes[i]->centerline) / lanes[i]->speed_limit);
    r.junction.push_back(lanes[i]->junction);
  }
  r.successors.resize(lanes.size());
  r.lateral.resize(lanes.size());
  std::vector<Edge> edges;
  std::vector<bool> jflag(lanes.size());
  for (std::size_t i = 0; i < lanes.size(); ++i) {
    const roadnet::Lane& l = *lanes[i];
    jflag[i] = l.junction.has_value();
    for (auto s : l.successors) {
      auto it = r.node.find(s);
      if (it == r.node.end()) continue;
      r.successors[i].push_back(it->second);
      edges.push_back({Node(i), it->second});
    }
    for (auto nb : {l.left_neighbor, l.right_neighbor}) {
      if (!nb) continue;
      auto it = r.node.find(*nb);
      if (it == r.node.end()) continue;
      r.lateral[i].push_back(it->second);
      edges.push_back({Node(i), it->second});
      edges.push_back({it->second, Node(i)});
    }
    std::sort(r.successors[i].begin(), r.successors[i].end());
    r.successors[i].erase(std::unique(r.successors[i].begin(), r.successors[i].end()), r.successors[i].end());
  }
  std::sort(edges.begin(), edges.end());
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
  r.graph = ConnGraph(lanes.size(), std::move(edges), std::move(jflag));
  return r;
}

void CropParams::check() const {
  if (!(t_max > 0.0) || std::isnan(t_max)) throw ParameterError("t_max must be > 0");
}

ConnGraph crop_graph(const RoutingGraph& full, Node start, const CropParams& params) {
  params.check();
  const std::size_t n = full.graph.size();
  if (start >= n) throw GraphError("start node " + std::to_string(start) + " not in graph");

  std::map<roadnet::JunctionId, std::vector<Node>> members;
  for (std::size_t v = 0; v < n; ++v)
    if (full.junction[v]) members[*full.junction[v]].push_back(Node(v));

  std::vector<double> dist(n, std::numeric_limits<double>::infinity());
  std::vector<bool> keep(n, false);
  using Item = std::pair<double, Node>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> pq;
  dist[start] = 0.0;
  pq.push({0.0, start});
  while (!pq.empty()) {
    const auto [d, u] = pq.top();
    pq.pop();
    if (d > dist[u]) continue;
    keep[u] = true;
    if (full.junction[u]) {
      for (Node w : members[*full.junction[u]]) keep[w] = true;
      continue;
    }
    for (Node v : full.successors[u]) {
      const double nd = d + full.cost[u];
      if (nd <= params.t_max && nd < dist[v]) {
        dist[v] = nd;
        pq.push({nd, v});
      }
    }
  }
  std::vector<bool> core = keep;
  for (std::size_t v = 0; v < n; ++v)
    if (core[v])
      for (Node w : full.lateral[v]) keep[w] = true;

  // Breadth-first renumbering over the undirected view of the induced graph.
  const ConnGraph& g = full.graph;
  std::vector<Node> order;
  std::vector<bool> seen(n, false);
  auto bfs = [&](Node root) {
    std::deque<Node> queue{root};
    seen[root] = true;
    while (!queue.empty()) {
      const Node u = queue.front();
      queue.pop_front();
      order.push_back(u);
      std::vector<Node> next;
      for (Node w : g.out(u)) next.push_back(w);
      for (Node w : g.in(u)) next.push_back(w);
      std::sort(next.begin(), next.end());
      for (Node w : next) {
        if (keep[w] && !seen[w]) {
          seen[w] = true;
          queue.push_back(w);
        }
      }
    }
  };
  bfs(start);
  for (std::size_t v = 0; v < n; ++v)
    if (keep[v] && !seen[v]) bfs(Node(v));

  std::vector<Node> label(n, std::numeric_limits<Node>::max());
  for (std::size_t i = 0; i < order.size(); ++i) label[order[i]] = Node(i);
  std::vector<Edge> edges;
  for (const auto& [u, v] : g.edges())
    if (keep[u] && keep[v]) edges.push_back({label[u], label[v]});
  std::vector<bool> jflag(order.size());
  for (std::size_t i = 0; i < order.size(); ++i) jflag[i] = g.is_junction(order[i]);
  return ConnGraph(order.size(), std::move(edges), std::move(jflag));
}

ConnGraph crop_scene(const roadnet::RoadNetwork& net, const CropParams& params) {
  const RoutingGraph full = build_routing_graph(net);
  auto it = full.node.find(net.query.lane);
  if (it == full.node.end()) throw GraphError("query lane " + std::to_string(net.query.lane) + " is not drivable");
  return crop_graph(full, it->second, params);
}

namespace {

class Matcher {
 public:
  Matcher(const ConnGraph& a, const ConnGraph& b) : a_(a), b_(b), n_(a.size()) {
    adj_a_.assign(n_ * n_, 0);
    adj_b_.assign(n_ * n_, 0);
    for (const auto& [u, v] : a.edges()) adj_a_[u * n_ + v] = 1;
    for (const auto& [u, v] : b.edges()) adj_b_[u * n_ + v] = 1;
    order_nodes();
  }

  bool run() {
    map_.assign(n_, kNone);
    used_.assign(n_, false);
    return extend(0);
  }

 private:
  static constexpr Node kNone = std::numeric_limits<Node>::max();

  // Connected-first order: each component starts at its highest-degree node,
  // later nodes are attached to an already ordered one when possible.
  void order_nodes() {
    std::vector<bool> placed(n_, false);
    parent_.assign(n_, kNone);
    auto degree = [&](Node v) { return a_.out(v).size() + a_.in(v).size(); };
    while (order_.size() < n_) {
      Node root = kNone;
      for (Node v = 0; v < n_; ++v)
        if (!placed[v] && (root == kNone || degree(v) > degree(root))) root = v;
      std::deque<Node> q{root};
      placed[root] = true;
      while (!q.empty()) {
        const Node u = q.front();
        q.pop_front();
        order_.push_back(u);
        for (const auto* nb : {&a_.out(u), &a_.in(u)}) {
          for (Node w : *nb) {
            if (placed[w]) continue;
            placed[w] = true;
            parent_[w] = u;
            q.push_back(w);
          }
        }
      }
    }
  }

  bool feasible(Node u, Node v) const {
    if (a_.out(u).size() != b_.out(v).size() || a_.in(u).size() != b_.in(v).size()) return false;
    for (std::size_t i = 0; i < depth_; ++i) {
      const Node x = order_[i];
      const Node y = map_[x];
      if (adj_a_[u * n_ + x] != adj_b_[v * n_ + y]) return false;
      if (adj_a_[x * n_ + u] != adj_b_[y * n_ + v]) return false;
    }
    return true;
  }

  bool try_candidate(Node u, Node v) {
    if (used_[v] || !feasible(u, v)) return false;
    map_[u] = v;
    used_[v] = true;
    ++depth_;
    if (extend(depth_)) return true;
    --depth_;
    used_[v] = false;
    map_[u] = kNone;
    return false;
  }

  bool extend(std::size_t depth) {
    if (depth == n_) return true;
    const Node u = order_[depth];
    const Node p = parent_[u];
    if (p != kNone) {
      // u is adjacent to its already mapped parent, so its image must be
      // adjacent to the parent's image.
      const Node pv = map_[p];
      std::vector<Node> cand(b_.out(pv).begin(), b_.out(pv).end());
      cand.insert(cand.end(), b_.in(pv).begin(), b_.in(pv).end());
      std::sort(cand.begin(), cand.end());
      cand.erase(std::unique(cand.begin(), cand.end()), cand.end());
      for (Node v : cand)
        if (try_candidate(u, v)) return true;
      return false;
    }
    for (Node v = 0; v < n_; ++v)
      if (try_candidate(u, v)) return true;
    return false;
  }

  const ConnGraph& a_;
  const ConnGraph& b_;
  std::size_t n_;
  std::vector<std::uint8_t> adj_a_, adj_b_;
  std::vector<Node> order_, parent_, map_;
  std::vector<bool> used_;
  std::size_t depth_ = 0;
};

std::vector<std::pair<std::size_t, std::size_t>> degree_profile(const ConnGraph& g) {
  std::vector<std::pair<std::size_t, std::size_t>> d;
  for (Node v = 0; v < g.size(); ++v) d.push_back({g.in(v).size(), g.out(v).size()});
  std::sort(d.begin(), d.end());
  return d;
}

std::uint64_t fnv1a(const std::vector<std::uint64_t>& words) {
  std::uint64_t h = 1469598103934665603ULL;
  for (std::uint64_t w : words) {
    for (int b = 0; b < 8; ++b) {
      h ^= (w >> (8 * b)) & 0xffu;
      h *= 1099511628211ULL;
    }
  }
  return h;
}

}  // namespace

bool is_isomorphic(const ConnGraph& a, const ConnGraph& b) {
  if (a.size() != b.size() || a.edges().size() != b.edges().size()) return false;
  if (degree_profile(a) != degree_profile(b)) return false;
  return Matcher(a, b).run();
}

std::string canonical_key(const ConnGraph& g) {
  const std::size_t n = g.size();
  std::vector<std::uint64_t> label(n), next(n);
  for (Node v = 0; v < n; ++v) label[v] = fnv1a({g.in(v).size(), g.out(v).size()});
  std::vector<std::uint64_t> history;
  auto snapshot = [&] {
    std::vector<std::uint64_t> s = label;
    std::sort(s.begin(), s.end());
    history.push_back(fnv1a(s));
  };
  snapshot();
  for (std::size_t round = 0; round < n; ++round) {
    for (Node v = 0; v < n; ++v) {
      std::vector<std::uint64_t> outs, ins;
      for (Node w : g.out(v)) outs.push_back(label[w]);
      for (Node w : g.in(v)) ins.push_back(label[w]);
      std::sort(outs.begin(), outs.end());
      std::sort(ins.begin(), ins.end());
      std::vector<std::uint64_t> sig{label[v], outs.size()};
      sig.insert(sig.end(), outs.begin(), outs.end());
      sig.push_back(ins.size());
      sig.insert(sig.end(), ins.begin(), ins.end());
      next[v] = fnv1a(sig);
    }
    label.swap(next);
    snapshot();
  }
  char buf[64];
  std::snprintf(buf, sizeof buf, "v%zu-e%zu-%016llx", n, g.edges().size(),
                static_cast<unsigned long long>(fnv1a(history)));
  return buf;
}

std::string graph_to_json(const ConnGraph& g) {
  nlohmann::json edges = nlohmann::json::array();
  for (const auto& [u, v] : g.edges()) edges.push_back({u, v});
  nlohmann::json junction = nlohmann::json::array();
  for (Node v = 0; v < g.size(); ++v)
    if (g.is_junction(v)) junction.push_back(v);
  nlohmann::json doc = {{"nodes", g.size()}, {"edges", std::move(edges)}, {"junction_nodes", std::move(junction)}};
  return doc.dump();
}

ConnGraph graph_from_json(std::string_view text) {
  auto doc = nlohmann::json::parse(text.begin(), text.end(), nullptr, false);
  if (doc.is_discarded() || !doc.is_object()) throw ParseError("/: expected a JSON object");
  auto count = [](const nlohmann::json& v, const std::string& path) -> std::size_t {
    if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<std::int64_t>() >= 0))
      throw ParseError(path + ": expected a non-negative integer");
    const auto x = v.get<std::uint64_t>();
    if (x > std::numeric_limits<Node>::max()) throw ParseError(path + ": value too large");
    return std::size_t(x);
  };
  if (!doc.contains("nodes")) throw ParseError("/nodes: missing");
  const std::size_t n = count(doc["nodes"], "/nodes");
  if (n > (1u << 20)) throw ParseError("/nodes: graph too large");
  std::vector<Edge> edges;
  if (doc.contains("edges")) {
    const auto& e = doc["edges"];
    if (!e.is_array()) throw ParseError("/edges: expected an array");
    for (std::size_t i = 0; i < e.size(); ++i) {
      const std::string p = "/edges/" + std::to_string(i);
      if (!e[i].is_array() || e[i].size() != 2) throw ParseError(p + ": expected [u,v]");
      edges.push_back({Node(count(e[i][0], p + "/0")), Node(count(e[i][1], p + "/1"))});
    }
  }
  std::vector<bool> jflag(n, false);
  if (doc.contains("junction_nodes")) {
    const auto& j = doc["junction_nodes"];
    if (!j.is_array()) throw ParseError("/junction_nodes: expected an array");
    for (std::size_t i = 0; i < j.size(); ++i) {
      const std::size_t v = count(j[i], "/junction_nodes/" + std::to_string(i));
      if (v >= n) throw GraphError("junction node " + std::to_string(v) + " out of range");
      jflag[v] = true;
    }
  }
  return ConnGraph(n, std::move(edges), std::move(jflag));
}

}  // namespace scenenov::congraph
