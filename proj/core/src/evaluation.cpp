// Copyright 2026 The treeskel Authors
// SPDX-License-Identifier: Apache-2.0

#include "treeskel/evaluation.hpp"

#include <algorithm>
#include <iomanip>
#include <set>
#include <sstream>
#include <tuple>

#include "treeskel/error.hpp"

namespace treeskel {
namespace {

int fused_label(int child_side, int parent_side) {
  if (child_side == BranchLabeling::kTrunk) return parent_side;
  return child_side;
}

std::string pct_text(const std::optional<double>& v) {
  if (!v) return "-";
  std::ostringstream out;
  out << std::fixed << std::setprecision(2) << *v;
  return out.str();
}

nlohmann::ordered_json pct_json(const std::optional<double>& v) {
  return v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json(nullptr);
}

}  // namespace

EvalGraph collapse_degree_two(const EvalGraph& graph) {
  graph.validate();
  std::vector<EvalGraph::Edge> edges = graph.edges;
  std::vector<char> edge_alive(edges.size(), 1);
  std::vector<std::vector<std::size_t>> incident(graph.size());
  std::set<std::pair<int, int>> linked;
  for (std::size_t e = 0; e < edges.size(); ++e) {
    incident[static_cast<std::size_t>(edges[e].a)].push_back(e);
    incident[static_cast<std::size_t>(edges[e].b)].push_back(e);
    linked.insert(std::minmax(edges[e].a, edges[e].b));
  }
  auto live = [&](std::size_t u) {
    std::vector<std::size_t> out;
    for (std::size_t e : incident[u]) {
      if (edge_alive[e]) out.push_back(e);
    }
    return out;
  };

  std::vector<char> node_alive(graph.size(), 1);
  bool changed = true;
  while (changed) {
    changed = false;
    for (std::size_t u = 0; u < graph.size(); ++u) {
      if (!node_alive[u]) continue;
      const auto inc = live(u);
      if (inc.size() != 2) continue;
      const auto& e1 = edges[inc[0]];
      const auto& e2 = edges[inc[1]];
      const int ui = static_cast<int>(u);
      const int x = e1.a == ui ? e1.b : e1.a;
      const int y = e2.a == ui ? e2.b : e2.a;
      if (linked.count(std::minmax(x, y))) continue;

      EvalGraph::Edge fused;
      fused.length = e1.length + e2.length;
      if (e1.a == ui && e2.b == ui) {  // y -> u -> x
        fused = {y, x, fused.length, fused_label(e2.label, e1.label)};
      } else if (e2.a == ui && e1.b == ui) {  // x -> u -> y
        fused = {x, y, fused.length, fused_label(e1.label, e2.label)};
      } else {
        fused = {x, y, fused.length, fused_label(e1.label, e2.label)};
      }
      edge_alive[inc[0]] = 0;
      edge_alive[inc[1]] = 0;
      linked.erase(std::minmax(ui, x));
      linked.erase(std::minmax(ui, y));
      linked.insert(std::minmax(x, y));
      edges.push_back(fused);
      edge_alive.push_back(1);
      incident[static_cast<std::size_t>(x)].push_back(edges.size() - 1);
      incident[static_cast<std::size_t>(y)].push_back(edges.size() - 1);
      node_alive[u] = 0;
      changed = true;
    }
  }

  EvalGraph out;
  out.lb_count = graph.lb_count;
  std::vector<int> remap(graph.size(), -1);
  for (std::size_t u = 0; u < graph.size(); ++u) {
    if (!node_alive[u]) continue;
    remap[u] = static_cast<int>(out.ids.size());
    out.ids.push_back(graph.ids[u]);
    out.positions.push_back(graph.positions[u]);
    out.labels.push_back(graph.labels[u]);
  }
  for (std::size_t e = 0; e < edges.size(); ++e) {
    if (!edge_alive[e]) continue;
    auto edge = edges[e];
    edge.a = remap[static_cast<std::size_t>(edge.a)];
    edge.b = remap[static_cast<std::size_t>(edge.b)];
    out.edges.push_back(edge);
  }
  std::sort(out.edges.begin(), out.edges.end(), [](const auto& l, const auto& r) {
    return std::tie(l.a, l.b) < std::tie(r.a, r.b);
  });
  return out;
}

NodeMatching match_nodes(const EvalGraph& computed, const EvalGraph& reference, double radius) {
  if (!(radius > 0.0)) throw ParameterError("match radius must be positive");
  const auto cn = computed.neighbors();
  const auto rn = reference.neighbors();
  auto connected = [&](std::size_t r, std::size_t c) {
    if (rn[r].empty()) return true;
    for (int r2 : rn[r]) {
      for (int c2 : cn[c]) {
        if ((reference.positions[static_cast<std::size_t>(r2)] -
             computed.positions[static_cast<std::size_t>(c2)]).norm() <= radius) {
          return true;
        }
      }
    }
    return false;
  };

  std::vector<std::tuple<double, std::size_t, std::size_t>> candidates;
  for (std::size_t r = 0; r < reference.size(); ++r) {
    for (std::size_t c = 0; c < computed.size(); ++c) {
      const double d = (reference.positions[r] - computed.positions[c]).norm();
      if (d <= radius && connected(r, c)) candidates.emplace_back(d, r, c);
    }
  }
  std::sort(candidates.begin(), candidates.end());

  NodeMatching out;
  out.reference_to_computed.assign(reference.size(), -1);
  std::vector<char> taken(computed.size(), 0);
  for (const auto& [d, r, c] : candidates) {
    if (out.reference_to_computed[r] >= 0 || taken[c]) continue;
    out.reference_to_computed[r] = static_cast<int>(c);
    taken[c] = 1;
    ++out.matched;
  }
  return out;
}

std::vector<char> match_edges(const NodeMatching& matching, const EvalGraph& computed,
                              const EvalGraph& reference) {
  std::set<std::pair<int, int>> adjacent;
  for (const auto& e : computed.edges) adjacent.insert(std::minmax(e.a, e.b));
  std::vector<char> out;
  out.reserve(reference.edges.size());
  for (const auto& e : reference.edges) {
    const int ca = matching.reference_to_computed.at(static_cast<std::size_t>(e.a));
    const int cb = matching.reference_to_computed.at(static_cast<std::size_t>(e.b));
    out.push_back(ca >= 0 && cb >= 0 && adjacent.count(std::minmax(ca, cb)) ? 1 : 0);
  }
  return out;
}

MatchReport compare_graphs(const EvalGraph& computed, const EvalGraph& reference, double radius) {
  const EvalGraph c = collapse_degree_two(computed);
  const EvalGraph r = collapse_degree_two(reference);
  const NodeMatching nodes = match_nodes(c, r, radius);
  const auto edges = match_edges(nodes, c, r);

  MatchReport report;
  report.lb_count = reference.lb_count;
  report.computed_nodes = c.size();
  for (std::size_t i = 0; i < r.size(); ++i) {
    const bool hit = nodes.reference_to_computed[i] >= 0;
    auto& t = report.nodes_by_label[r.labels[i]];
    t.total += 1;
    t.hits += hit;
    report.nodes.total += 1;
    report.nodes.hits += hit;
  }
  double length_true = 0.0, length_all = 0.0;
  for (std::size_t e = 0; e < r.edges.size(); ++e) {
    const auto& edge = r.edges[e];
    auto& t = report.edges_by_label[edge.label];
    t.total += 1;
    t.hits += edges[e];
    report.edges.total += 1;
    report.edges.hits += edges[e];
    length_all += edge.length;
    if (edges[e]) {
      length_true += edge.length;
    } else {
      report.false_edges.emplace_back(r.ids[static_cast<std::size_t>(edge.a)],
                                      r.ids[static_cast<std::size_t>(edge.b)]);
    }
  }
  report.edges_length_weighted_pct = length_all > 0.0 ? 100.0 * length_true / length_all : 0.0;
  return report;
}

PointAssignmentReport score_point_assignment(const BranchLabeling& predicted,
                                             const BranchLabeling& reference) {
  if (predicted.branch_id.size() != reference.branch_id.size()) {
    throw DataError("labelings cover different point counts (" +
                    std::to_string(predicted.branch_id.size()) + " vs " +
                    std::to_string(reference.branch_id.size()) + ")");
  }
  auto check = [](const BranchLabeling& l, const char* what) {
    for (int v : l.branch_id) {
      if (v < BranchLabeling::kRest || v > l.sb_id()) {
        throw DataError(std::string(what) + " label " + std::to_string(v) + " is out of range");
      }
    }
  };
  check(predicted, "predicted");
  check(reference, "reference");

  const int m = reference.lb_count;
  const int n = predicted.lb_count;
  std::vector<std::vector<std::size_t>> overlap(static_cast<std::size_t>(n),
                                                std::vector<std::size_t>(static_cast<std::size_t>(m), 0));
  for (std::size_t i = 0; i < predicted.branch_id.size(); ++i) {
    const int p = predicted.branch_id[i];
    const int r = reference.branch_id[i];
    if (p >= 1 && p <= n && r >= 1 && r <= m) {
      ++overlap[static_cast<std::size_t>(p - 1)][static_cast<std::size_t>(r - 1)];
    }
  }
  std::vector<std::tuple<std::size_t, int, int>> pairs;
  for (int p = 0; p < n; ++p) {
    for (int r = 0; r < m; ++r) {
      const auto o = overlap[static_cast<std::size_t>(p)][static_cast<std::size_t>(r)];
      if (o > 0) pairs.emplace_back(o, p, r);
    }
  }
  std::sort(pairs.begin(), pairs.end(), [](const auto& a, const auto& b) {
    if (std::get<0>(a) != std::get<0>(b)) return std::get<0>(a) > std::get<0>(b);
    return std::tie(std::get<1>(a), std::get<2>(a)) < std::tie(std::get<1>(b), std::get<2>(b));
  });
  PointAssignmentReport out;
  out.lb_alignment.assign(static_cast<std::size_t>(n), 0);
  std::vector<char> ref_taken(static_cast<std::size_t>(m), 0);
  for (const auto& [o, p, r] : pairs) {
    if (out.lb_alignment[static_cast<std::size_t>(p)] != 0 || ref_taken[static_cast<std::size_t>(r)]) continue;
    out.lb_alignment[static_cast<std::size_t>(p)] = r + 1;
    ref_taken[static_cast<std::size_t>(r)] = 1;
  }
  int next = m;
  for (int& a : out.lb_alignment) {
    if (a == 0) a = ++next;
  }
  const int lbs = next;
  const int sb = lbs + 1;
  const int rest = lbs + 2;

  out.class_names.push_back("Trunk");
  for (int k = 1; k <= lbs; ++k) out.class_names.push_back("LB " + std::to_string(k));
  out.class_names.push_back("SB");
  out.class_names.push_back("Rest");
  out.matrix = ConfusionMatrix(static_cast<std::size_t>(rest + 1));

  auto ref_class = [&](int v) {
    if (v == BranchLabeling::kRest) return rest;
    if (v == reference.sb_id()) return sb;
    return v;
  };
  auto pred_class = [&](int v) {
    if (v == BranchLabeling::kRest) return rest;
    if (v == predicted.sb_id()) return sb;
    if (v == BranchLabeling::kTrunk) return 0;
    return out.lb_alignment[static_cast<std::size_t>(v - 1)];
  };
  for (std::size_t i = 0; i < predicted.branch_id.size(); ++i) {
    out.matrix.add(ref_class(reference.branch_id[i]), pred_class(predicted.branch_id[i]));
  }
  out.accuracy = summarize(out.matrix);

  std::size_t correct = 0, total = 0, to_rest = 0;
  for (int r = 0; r < rest; ++r) {
    correct += out.matrix.at(static_cast<std::size_t>(r), static_cast<std::size_t>(r));
    total += out.matrix.row_sum(static_cast<std::size_t>(r));
    to_rest += out.matrix.at(static_cast<std::size_t>(r), static_cast<std::size_t>(rest));
  }
  if (total > 0) {
    out.overall = static_cast<double>(correct) / static_cast<double>(total);
    out.rest_fraction = static_cast<double>(to_rest) / static_cast<double>(total);
  }
  return out;
}

BranchLabeling labeling_from_cloud(const PointCloud& cloud) {
  if (!cloud.has_field("branch_id")) throw DataError("cloud has no 'branch_id' field");
  BranchLabeling out;
  for (auto v : cloud.int_field("branch_id")) out.branch_id.push_back(static_cast<int>(v));
  const auto it = cloud.metadata().find("lb_count");
  if (it != cloud.metadata().end()) {
    try {
      out.lb_count = std::stoi(it->second);
    } catch (const std::exception&) {
      throw DataError("invalid lb_count metadata '" + it->second + "'");
    }
  } else {
    for (int v : out.branch_id) out.lb_count = std::max(out.lb_count, v);
  }
  if (out.lb_count < 0) throw DataError("lb_count must be non-negative");
  return out;
}

void attach_labeling(PointCloud& cloud, const BranchLabeling& labels) {
  IntField field(labels.branch_id.begin(), labels.branch_id.end());
  cloud.set_field("branch_id", std::move(field));
  cloud.metadata()["lb_count"] = std::to_string(labels.lb_count);
}

std::string label_name(int label, int lb_count) {
  if (label == BranchLabeling::kRest) return "Rest";
  if (label == BranchLabeling::kTrunk) return "Trunk";
  if (label == lb_count + 1) return "SB";
  return "LB " + std::to_string(label);
}

nlohmann::ordered_json report_to_json(const MatchReport& graph,
                                      const PointAssignmentReport& points) {
  nlohmann::ordered_json g;
  auto per_label = [&](const std::map<int, Tally>& tallies, const Tally& all) {
    nlohmann::ordered_json j;
    for (const auto& [label, t] : tallies) j[label_name(label, graph.lb_count)] = pct_json(t.percent());
    j["all"] = pct_json(all.percent());
    return j;
  };
  g["nodes_true_pct"] = per_label(graph.nodes_by_label, graph.nodes);
  g["edges_true_pct"] = per_label(graph.edges_by_label, graph.edges);
  g["edges_length_weighted_pct"] = graph.edges_length_weighted_pct;
  g["reference_fork_nodes"] = graph.nodes.total;
  g["reference_fork_edges"] = graph.edges.total;
  g["computed_fork_nodes"] = graph.computed_nodes;
  auto false_edges = nlohmann::ordered_json::array();
  for (const auto& [a, b] : graph.false_edges) false_edges.push_back({a, b});
  g["false_edges"] = std::move(false_edges);

  nlohmann::ordered_json p;
  p["class_names"] = points.class_names;
  auto rows = nlohmann::ordered_json::array();
  for (std::size_t r = 0; r < points.matrix.classes(); ++r) {
    auto row = nlohmann::ordered_json::array();
    for (std::size_t c = 0; c < points.matrix.classes(); ++c) row.push_back(points.matrix.at(r, c));
    rows.push_back(std::move(row));
  }
  p["confusion_matrix"] = std::move(rows);
  p["overall_accuracy_pct"] =
      points.overall ? nlohmann::ordered_json(100.0 * *points.overall) : nlohmann::ordered_json(nullptr);
  auto pa = nlohmann::ordered_json::array();
  auto ua = nlohmann::ordered_json::array();
  for (const auto& v : points.accuracy.producers) {
    pa.push_back(v ? nlohmann::ordered_json(100.0 * *v) : nlohmann::ordered_json(nullptr));
  }
  for (const auto& v : points.accuracy.users) {
    ua.push_back(v ? nlohmann::ordered_json(100.0 * *v) : nlohmann::ordered_json(nullptr));
  }
  p["producers_accuracy_pct"] = std::move(pa);
  p["users_accuracy_pct"] = std::move(ua);
  p["rest_fraction_pct"] = 100.0 * points.rest_fraction;

  nlohmann::ordered_json j;
  j["graph"] = std::move(g);
  j["points"] = std::move(p);
  return j;
}

std::string report_to_table(const MatchReport& graph, const PointAssignmentReport& points) {
  std::ostringstream out;
  std::set<int> labels;
  for (const auto& [l, t] : graph.nodes_by_label) labels.insert(l);
  for (const auto& [l, t] : graph.edges_by_label) labels.insert(l);

  out << std::left << std::setw(22) << "" << std::right;
  for (int l : labels) out << std::setw(9) << label_name(l, graph.lb_count);
  out << std::setw(9) << "all" << '\n';
  auto row = [&](const char* title, const std::map<int, Tally>& tallies, const Tally& all) {
    out << std::left << std::setw(22) << title << std::right;
    for (int l : labels) {
      auto it = tallies.find(l);
      out << std::setw(9) << (it == tallies.end() ? std::string("-") : pct_text(it->second.percent()));
    }
    out << std::setw(9) << pct_text(all.percent()) << '\n';
  };
  row("Nodes true [%]", graph.nodes_by_label, graph.nodes);
  row("Edges true [%]", graph.edges_by_label, graph.edges);
  out << "Edges length-weighted [%]: " << pct_text(graph.edges_length_weighted_pct) << "\n\n";

  const auto& names = points.class_names;
  out << std::setw(10) << "ref\\pred";
  for (const auto& n : names) out << std::setw(9) << n;
  out << std::setw(9) << "PA[%]" << '\n';
  for (std::size_t r = 0; r < names.size(); ++r) {
    out << std::setw(10) << names[r];
    for (std::size_t c = 0; c < names.size(); ++c) out << std::setw(9) << points.matrix.at(r, c);
    const auto& pa = points.accuracy.producers[r];
    out << std::setw(9) << pct_text(pa ? std::optional<double>(100.0 * *pa) : std::nullopt) << '\n';
  }
  out << std::setw(10) << "UA[%]";
  for (const auto& ua : points.accuracy.users) {
    out << std::setw(9) << pct_text(ua ? std::optional<double>(100.0 * *ua) : std::nullopt);
  }
  out << "\nOA (without Rest) [%]: "
      << pct_text(points.overall ? std::optional<double>(100.0 * *points.overall) : std::nullopt)
      << "\nRest fraction [%]: " << pct_text(100.0 * points.rest_fraction) << '\n';
  return out.str();
}

}  // namespace treeskel
