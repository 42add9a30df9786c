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
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "scenenov/roadnet/roadnet.hpp"

namespace scenenov::congraph {

using Node = std::uint32_t;
using Edge = std::pair<Node, Node>;

// Directed graph without self-loops or duplicate edges, |V| >= 1.
class ConnGraph {
 public:
  ConnGraph() : ConnGraph(1, {}) {}
  // GraphError on self-loops, duplicates, out-of-range ids or n == 0.
  ConnGraph(std::size_t n, std::vector<Edge> edges, std::vector<bool> junction = {});

  std::size_t size() const { return n_; }
  const std::vector<Edge>& edges() const { return edges_; }  // sorted
  bool has_edge(Node u, Node v) const;
  bool is_junction(Node v) const { return junction_[v]; }
  const std::vector<bool>& junction_flags() const { return junction_; }

  const std::vector<Node>& out(Node v) const { return out_[v]; }
  const std::vector<Node>& in(Node v) const { return in_[v]; }

  bool operator==(const ConnGraph& o) const { return n_ == o.n_ && edges_ == o.edges_ && junction_ == o.junction_; }

 private:
  std::size_t n_ = 0;
  std::vector<Edge> edges_;
  std::vector<bool> junction_;
  std::vector<std::vector<Node>> out_, in_;
};

// Copy with every edge mirrored (undirected view).
ConnGraph symmetrized(const ConnGraph& g);
// Node v of g becomes perm[v].
ConnGraph relabeled(const ConnGraph& g, const std::vector<Node>& perm);

struct RoutingGraph {
  ConnGraph graph;                      // successor edges plus mirrored lateral edges
  std::vector<roadnet::LaneId> lane;    // node -> lane id
  std::map<roadnet::LaneId, Node> node; // lane id -> node
  std::vector<double> cost;             // seconds to traverse the lane
  std::vector<std::vector<Node>> successors;
  std::vector<std::vector<Node>> lateral;
  std::vector<std::optional<roadnet::JunctionId>> junction;
};

// One node per drivable lane, numbered in ascending lane id order.
RoutingGraph build_routing_graph(const roadnet::RoadNetwork& net);

struct CropParams {
  double t_max = 5.0;  // seconds
  void check() const;  // ParameterError unless t_max > 0
};

// Nodes reachable within t_max along successor edges (the start lane costs its
// full traversal time), plus every node of the first junction met on each
// branch, plus the lateral neighbors of all of those. Induced edges; nodes
// renumbered in breadth-first discovery order from the start.
ConnGraph crop_graph(const RoutingGraph& full, Node start, const CropParams& params);
// Crop around the network's query lane.
ConnGraph crop_scene(const roadnet::RoadNetwork& net, const CropParams& params);

// Directed isomorphism by backtracking with degree pruning.
bool is_isomorphic(const ConnGraph& a, const ConnGraph& b);
inline int similarity(const ConnGraph& a, const ConnGraph& b) { return is_isomorphic(a, b) ? 1 : 0; }

// Weisfeiler-Lehman refinement of (in, out)-degree labels for |V| rounds.
// Isomorphic graphs always share a key; the converse is not guaranteed.
std::string canonical_key(const ConnGraph& g);

// {"nodes": n, "edges": [[u, v], ...], "junction_nodes": [...]}
std::string graph_to_json(const ConnGraph& g);
ConnGraph graph_from_json(std::string_view text);  // ParseError / GraphError

}  // namespace scenenov::congraph
