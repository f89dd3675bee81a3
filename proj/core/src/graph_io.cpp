// Copyright 2026 The treeskel Authors
// SPDX-License-Identifier: Apache-2.0

#include <fstream>
#include <set>

#include "treeskel/error.hpp"
#include "treeskel/evaluation.hpp"

namespace treeskel {

std::vector<std::vector<int>> EvalGraph::neighbors() const {
  std::vector<std::vector<int>> out(size());
  for (const auto& e : edges) {
    out[static_cast<std::size_t>(e.a)].push_back(e.b);
    out[static_cast<std::size_t>(e.b)].push_back(e.a);
  }
  for (auto& list : out) std::sort(list.begin(), list.end());
  return out;
}

double EvalGraph::total_length() const {
  double total = 0.0;
  for (const auto& e : edges) total += e.length;
  return total;
}

void EvalGraph::validate() const {
  const auto n = static_cast<int>(size());
  if (positions.size() != size() || labels.size() != size()) {
    throw DataError("graph arrays differ in length");
  }
  std::set<std::pair<int, int>> seen;
  for (const auto& e : edges) {
    if (e.a < 0 || e.b < 0 || e.a >= n || e.b >= n) throw DataError("graph edge out of range");
    if (e.a == e.b) throw DataError("graph has a self edge");
    if (!seen.insert(std::minmax(e.a, e.b)).second) throw DataError("graph has a duplicate edge");
  }
  if (n == 0) return;
  const auto nb = neighbors();
  std::vector<char> visited(size(), 0);
  std::vector<int> stack = {0};
  visited[0] = 1;
  std::size_t count = 1;
  while (!stack.empty()) {
    const int u = stack.back();
    stack.pop_back();
    for (int v : nb[static_cast<std::size_t>(u)]) {
      if (!visited[static_cast<std::size_t>(v)]) {
        visited[static_cast<std::size_t>(v)] = 1;
        ++count;
        stack.push_back(v);
      }
    }
  }
  if (count != size()) throw DataError("graph is not connected");
}

EvalGraph eval_graph(const SkeletonGraph& graph, const std::vector<int>& node_labels,
                     int lb_count) {
  EvalGraph out;
  for (std::size_t i = 0; i < graph.nodes.size(); ++i) {
    out.ids.push_back(graph.nodes[i].id);
    out.positions.push_back(graph.nodes[i].centroid);
    out.labels.push_back(node_labels.empty() ? 0 : node_labels.at(i));
  }
  for (std::size_t i = 0; i < graph.nodes.size(); ++i) {
    if (graph.parent[i] < 0) continue;
    out.edges.push_back({static_cast<int>(i), static_cast<int>(graph.index_of(graph.parent[i])),
                         graph.edge_length[i], out.labels[i]});
  }
  out.lb_count = lb_count;
  return out;
}

EvalGraph eval_graph_from_json(const nlohmann::ordered_json& j) {
  try {
    EvalGraph out;
    std::map<int, int> index;
    for (const auto& jn : j.at("nodes")) {
      const int id = jn.at("id").get<int>();
      if (!index.emplace(id, static_cast<int>(out.ids.size())).second) {
        throw DataError("duplicate node id " + std::to_string(id));
      }
      const auto c = jn.at("centroid").get<std::vector<double>>();
      if (c.size() != 3) throw DataError("node centroid must have 3 coordinates");
      out.ids.push_back(id);
      out.positions.emplace_back(c[0], c[1], c[2]);
      out.labels.push_back(jn.value("label", 0));
    }
    auto lookup = [&](int id) {
      auto it = index.find(id);
      if (it == index.end()) throw DataError("edge refers to unknown node " + std::to_string(id));
      return it->second;
    };
    for (const auto& je : j.at("edges")) {
      const int a = lookup(je.at("child").get<int>());
      const int b = lookup(je.at("parent").get<int>());
      double length = (out.positions[static_cast<std::size_t>(a)] -
                       out.positions[static_cast<std::size_t>(b)]).norm();
      if (je.contains("length_m")) length = je.at("length_m").get<double>();
      out.edges.push_back({a, b, length, out.labels[static_cast<std::size_t>(a)]});
    }
    int max_label = 0;
    for (int l : out.labels) max_label = std::max(max_label, l);
    out.lb_count = j.value("lb_count", max_label);
    out.validate();
    return out;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("invalid skeleton JSON: ") + e.what());
  }
}

EvalGraph load_eval_graph(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path.string() + "'");
  try {
    return eval_graph_from_json(nlohmann::ordered_json::parse(in));
  } catch (const nlohmann::json::exception& e) {
    throw DataError("cannot parse '" + path.string() + "': " + e.what());
  }
}

nlohmann::ordered_json eval_graph_to_json(const EvalGraph& graph,
                                          const std::vector<std::string>& kinds,
                                          const std::vector<std::size_t>& point_counts) {
  std::vector<int> parent(graph.size(), -1);
  for (const auto& e : graph.edges) parent[static_cast<std::size_t>(e.a)] = graph.ids[static_cast<std::size_t>(e.b)];
  nlohmann::ordered_json j;
  j["root_id"] = graph.ids.empty() ? -1 : graph.ids.front();
  j["lb_count"] = graph.lb_count;
  auto nodes = nlohmann::ordered_json::array();
  for (std::size_t i = 0; i < graph.size(); ++i) {
    nlohmann::ordered_json jn;
    jn["id"] = graph.ids[i];
    jn["kind"] = kinds.empty() ? "branch" : kinds.at(i);
    const Vec3& p = graph.positions[i];
    jn["centroid"] = {p.x(), p.y(), p.z()};
    jn["n_points"] = point_counts.empty() ? 0 : point_counts.at(i);
    if (parent[i] >= 0) jn["parent_id"] = parent[i];
    jn["label"] = graph.labels[i];
    nodes.push_back(std::move(jn));
  }
  j["nodes"] = std::move(nodes);
  auto edges = nlohmann::ordered_json::array();
  for (const auto& e : graph.edges) {
    edges.push_back({{"child", graph.ids[static_cast<std::size_t>(e.a)]},
                     {"parent", graph.ids[static_cast<std::size_t>(e.b)]},
                     {"length_m", e.length}});
  }
  j["edges"] = std::move(edges);
  j["leftover"] = nlohmann::ordered_json::array();
  return j;
}

}  // namespace treeskel
