// Copyright 2026 The treeskel Authors
// SPDX-License-Identifier: Apache-2.0

#include "treeskel/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numbers>
#include <random>

#include "treeskel/cloud_io.hpp"
#include "treeskel/error.hpp"
#include "treeskel/stages.hpp"

namespace treeskel {
namespace {

constexpr double kDeg = std::numbers::pi / 180.0;
constexpr double kGoldenAngle = 2.39996322972865332;
constexpr int kPlacementAttempts = 30;
constexpr double kClearance = 0.05;

using Rng = std::mt19937_64;

double uniform(Rng& rng, double lo, double hi) {
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

double uniform(Rng& rng, const std::array<double, 2>& range) {
  return range[0] == range[1] ? range[0] : uniform(rng, range[0], range[1]);
}

double truncated_normal(Rng& rng, double sigma) {
  if (sigma <= 0.0) return 0.0;
  std::normal_distribution<double> normal(0.0, sigma);
  for (;;) {
    const double v = normal(rng);
    if (std::abs(v) <= 4.0 * sigma) return v;
  }
}

std::uint8_t jitter(Rng& rng, int base, double sigma) {
  const double v = base + std::normal_distribution<double>(0.0, sigma)(rng);
  return static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
}

bool is_major(SegmentKind k) { return k != SegmentKind::twig; }

double point_segment_distance(const Vec3& p, const Segment& s) {
  const double t = std::clamp((p - s.start).dot(s.dir), 0.0, s.length);
  return (p - (s.start + t * s.dir)).norm();
}

bool inside(const Vec3& p, const Segment& s) {
  const double t = (p - s.start).dot(s.dir);
  if (t < 0.0 || t > s.length) return false;
  return (p - (s.start + t * s.dir)).norm() < s.radius;
}

// Distance between the part of `s` outside its parent and every other
// major segment except the parent, sampled every centimeter.
bool collides(const Segment& s, const std::vector<Segment>& existing) {
  const int steps = std::max(2, static_cast<int>(std::ceil(s.length / 0.01)));
  for (const auto& other : existing) {
    if (!is_major(other.kind) || other.id == s.parent || other.kind == SegmentKind::trunk) continue;
    for (int i = 0; i <= steps; ++i) {
      const Vec3 p = s.start + (s.length * i / steps) * s.dir;
      if (point_segment_distance(p, existing[static_cast<std::size_t>(s.parent)]) < s.radius) continue;
      if (point_segment_distance(p, other) < s.radius + other.radius + kClearance) return true;
    }
  }
  return false;
}

Vec3 from_vertical(double theta, double azimuth) {
  return {std::sin(theta) * std::cos(azimuth), std::sin(theta) * std::sin(azimuth), std::cos(theta)};
}

// Direction at `angle` from `axis`, turned `turn` radians from the upward
// side of the axis toward its horizontal side.
Vec3 lean_from(const Vec3& axis, double angle, double turn) {
  Vec3 up = Vec3::UnitZ() - Vec3::UnitZ().dot(axis) * axis;
  if (up.norm() < 1e-6) up = axis.unitOrthogonal();
  up.normalize();
  const Vec3 side = axis.cross(up);
  const Vec3 perp = std::cos(turn) * up + std::sin(turn) * side;
  return (std::cos(angle) * axis + std::sin(angle) * perp).normalized();
}

struct Builder {
  const TreeSpec& spec;
  Rng rng;
  std::vector<Segment> segments;
  std::size_t rejected = 0;

  Segment& add(Segment s) {
    s.id = static_cast<int>(segments.size());
    if (s.top_branch < 0 && s.kind != SegmentKind::trunk) s.top_branch = s.id;
    segments.push_back(s);
    return segments.back();
  }

  template <typename Make>
  void place(Make make) {
    for (int attempt = 0; attempt < kPlacementAttempts; ++attempt) {
      Segment s = make();
      s.id = static_cast<int>(segments.size());
      if (!collides(s, segments)) {
        add(s);
        return;
      }
    }
    ++rejected;
  }

  void grow_children(int parent_id, int depth) {
    if (depth >= spec.recursion_depth) return;
    const Segment parent = segments[static_cast<std::size_t>(parent_id)];
    const int count = std::uniform_int_distribution<int>(spec.child_count[0], spec.child_count[1])(rng);
    double sign = uniform(rng, 0.0, 1.0) < 0.5 ? -1.0 : 1.0;
    const std::size_t first = segments.size();
    for (int i = 0; i < count; ++i) {
      place([&] {
        const double span = spec.child_position[1] - spec.child_position[0];
        const double f = spec.child_position[0] + span * (i + 0.5 + uniform(rng, -0.3, 0.3)) / count;
        Segment s;
        s.parent = parent_id;
        s.kind = SegmentKind::child;
        s.start = parent.start + f * parent.length * parent.dir;
        s.dir = lean_from(parent.dir, uniform(rng, spec.child_angle_deg) * kDeg,
                          sign * uniform(rng, 40.0, 100.0) * kDeg);
        s.length = parent.length * spec.length_decay * uniform(rng, 0.9, 1.1);
        s.radius = parent.radius * spec.radius_decay;
        s.top_branch = parent.top_branch;
        return s;
      });
      sign = -sign;
    }
    const std::size_t last = segments.size();
    for (std::size_t c = first; c < last; ++c) grow_children(static_cast<int>(c), depth + 1);
  }

  void build() {
    Segment trunk;
    trunk.kind = SegmentKind::trunk;
    trunk.length = spec.trunk_height;
    trunk.radius = spec.trunk_radius;
    add(trunk);

    const double h = spec.trunk_height;
    const double base_azimuth = uniform(rng, 0.0, 2.0 * std::numbers::pi);
    const int n_lb = spec.leading_branch_count;
    for (int i = 0; i < n_lb; ++i) {
      place([&] {
        const double span = spec.lb_height[1] - spec.lb_height[0];
        const double f = spec.lb_height[0] + span * (i + 0.5 + uniform(rng, -0.3, 0.3)) / n_lb;
        Segment s;
        s.parent = 0;
        s.kind = SegmentKind::leading;
        s.start = Vec3(0.0, 0.0, f * h);
        s.dir = from_vertical(uniform(rng, spec.branch_angle_deg) * kDeg,
                              base_azimuth + i * kGoldenAngle + uniform(rng, -0.15, 0.15));
        s.length = uniform(rng, spec.lb_length);
        s.radius = spec.lb_radius;
        return s;
      });
    }
    const int n_sb = spec.small_branch_count;
    for (int i = 0; i < n_sb; ++i) {
      place([&] {
        const double span = spec.small_branch_height[1] - spec.small_branch_height[0];
        const double f = spec.small_branch_height[0] + span * (i + 0.5 + uniform(rng, -0.3, 0.3)) / n_sb;
        Segment s;
        s.parent = 0;
        s.kind = SegmentKind::small;
        s.start = Vec3(0.0, 0.0, f * h);
        s.dir = from_vertical(uniform(rng, spec.branch_angle_deg) * kDeg,
                              uniform(rng, 0.0, 2.0 * std::numbers::pi));
        s.length = uniform(rng, spec.small_branch_length);
        s.radius = spec.small_branch_radius;
        return s;
      });
    }
    const std::size_t top_level = segments.size();
    for (std::size_t s = 1; s < top_level; ++s) {
      if (segments[s].kind == SegmentKind::leading) grow_children(static_cast<int>(s), 1);
    }

    const std::size_t major = segments.size();
    for (std::size_t p = 1; p < major; ++p) {
      const Segment parent = segments[p];
      if (parent.kind != SegmentKind::leading && parent.kind != SegmentKind::child) continue;
      const auto count = static_cast<int>(std::lround(spec.twigs_per_meter * parent.length));
      for (int i = 0; i < count; ++i) {
        Segment s;
        s.parent = parent.id;
        s.kind = SegmentKind::twig;
        s.start = parent.start + uniform(rng, 0.15, 0.95) * parent.length * parent.dir;
        s.dir = lean_from(parent.dir, uniform(rng, 40.0, 70.0) * kDeg,
                          uniform(rng, -std::numbers::pi, std::numbers::pi));
        s.length = uniform(rng, spec.twig_length);
        s.radius = spec.twig_radius;
        s.top_branch = parent.top_branch;
        add(s);
      }
    }
  }
};

// Position on the parent axis level with the point where `s` leaves the
// parent's surface.
double fork_parameter(const Segment& s, const Segment& parent) {
  const double t_attach = (s.start - parent.start).dot(parent.dir);
  const double cos_angle = std::clamp(s.dir.dot(parent.dir), -1.0, 1.0);
  const double sin_angle = std::sqrt(1.0 - cos_angle * cos_angle);
  double t = t_attach;
  if (sin_angle > 1e-9) t += parent.radius * cos_angle / sin_angle;
  return std::clamp(t, 0.0, parent.length);
}

template <typename T>
void read_key(const nlohmann::ordered_json& value, T& target, const std::string& key) {
  try {
    target = value.get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ParameterError("tree spec key '" + key + "' has the wrong type");
  }
}

}  // namespace

void TreeSpec::validate() const {
  auto range_ok = [](const auto& r) { return r[0] <= r[1]; };
  if (!(trunk_height > 0.0) && leading_branch_count == 0 && small_branch_count == 0) {
    throw ParameterError("tree spec has neither a trunk nor branches");
  }
  if (!(trunk_height > 0.0) || !(trunk_radius > 0.0)) {
    throw ParameterError("trunk height and radius must be positive");
  }
  if (leading_branch_count < 0 || small_branch_count < 0 || sky_noise_count < 0 ||
      recursion_depth < 1 || child_count[0] < 0) {
    throw ParameterError("counts must be non-negative and recursion depth at least 1");
  }
  if (!range_ok(lb_height) || !range_ok(branch_angle_deg) || !range_ok(lb_length) ||
      !range_ok(child_count) || !range_ok(child_angle_deg) || !range_ok(child_position) ||
      !range_ok(small_branch_height) || !range_ok(small_branch_length) || !range_ok(twig_length)) {
    throw ParameterError("every range must satisfy low <= high");
  }
  if (lb_height[0] < 0.0 || lb_height[1] > 1.0 || small_branch_height[0] < 0.0 ||
      small_branch_height[1] > 1.0 || child_position[0] < 0.0 || child_position[1] > 1.0) {
    throw ParameterError("height and position fractions must lie in [0, 1]");
  }
  if (!(radius_decay > 0.0 && radius_decay < 1.0) || !(length_decay > 0.0 && length_decay < 1.0)) {
    throw ParameterError("decay factors must lie in (0, 1)");
  }
  if (!(lb_radius > 0.0) || !(small_branch_radius > 0.0) || !(twig_radius > 0.0) ||
      !(lb_length[0] > 0.0) || !(small_branch_length[0] > 0.0) || !(twig_length[0] > 0.0)) {
    throw ParameterError("branch radii and lengths must be positive");
  }
  if (!(point_density > 0.0) || ground_density < 0.0 || ground_extent < 0.0 ||
      noise_sigma < 0.0 || twigs_per_meter < 0.0) {
    throw ParameterError("densities must be positive and noise non-negative");
  }
  if (!(lb_min_fraction >= 0.0 && lb_min_fraction <= 1.0)) {
    throw ParameterError("lb_min_fraction must lie in [0, 1]");
  }
  for (const auto& hole : holes) {
    if (!(hole.radius > 0.0)) throw ParameterError("hole radius must be positive");
  }
}

void to_json(nlohmann::ordered_json& j, const TreeSpec& s) {
  j = nlohmann::ordered_json::object();
  j["seed"] = s.seed;
  j["trunk_height"] = s.trunk_height;
  j["trunk_radius"] = s.trunk_radius;
  j["leading_branch_count"] = s.leading_branch_count;
  j["lb_height"] = s.lb_height;
  j["branch_angle_deg"] = s.branch_angle_deg;
  j["lb_length"] = s.lb_length;
  j["lb_radius"] = s.lb_radius;
  j["recursion_depth"] = s.recursion_depth;
  j["child_count"] = s.child_count;
  j["child_angle_deg"] = s.child_angle_deg;
  j["child_position"] = s.child_position;
  j["radius_decay"] = s.radius_decay;
  j["length_decay"] = s.length_decay;
  j["small_branch_count"] = s.small_branch_count;
  j["small_branch_height"] = s.small_branch_height;
  j["small_branch_radius"] = s.small_branch_radius;
  j["small_branch_length"] = s.small_branch_length;
  j["twigs_per_meter"] = s.twigs_per_meter;
  j["twig_radius"] = s.twig_radius;
  j["twig_length"] = s.twig_length;
  j["point_density"] = s.point_density;
  j["noise_sigma"] = s.noise_sigma;
  j["ground_extent"] = s.ground_extent;
  j["ground_density"] = s.ground_density;
  j["sky_noise_count"] = s.sky_noise_count;
  j["lb_min_fraction"] = s.lb_min_fraction;
  auto holes = nlohmann::ordered_json::array();
  for (const auto& h : s.holes) {
    holes.push_back({{"center", {h.center.x(), h.center.y(), h.center.z()}}, {"radius", h.radius}});
  }
  j["holes"] = std::move(holes);
}

void from_json(const nlohmann::ordered_json& j, TreeSpec& s) {
  if (!j.is_object()) throw ParameterError("tree spec must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (key == "seed") read_key(value, s.seed, key);
    else if (key == "trunk_height") read_key(value, s.trunk_height, key);
    else if (key == "trunk_radius") read_key(value, s.trunk_radius, key);
    else if (key == "leading_branch_count") read_key(value, s.leading_branch_count, key);
    else if (key == "lb_height") read_key(value, s.lb_height, key);
    else if (key == "branch_angle_deg") read_key(value, s.branch_angle_deg, key);
    else if (key == "lb_length") read_key(value, s.lb_length, key);
    else if (key == "lb_radius") read_key(value, s.lb_radius, key);
    else if (key == "recursion_depth") read_key(value, s.recursion_depth, key);
    else if (key == "child_count") read_key(value, s.child_count, key);
    else if (key == "child_angle_deg") read_key(value, s.child_angle_deg, key);
    else if (key == "child_position") read_key(value, s.child_position, key);
    else if (key == "radius_decay") read_key(value, s.radius_decay, key);
    else if (key == "length_decay") read_key(value, s.length_decay, key);
    else if (key == "small_branch_count") read_key(value, s.small_branch_count, key);
    else if (key == "small_branch_height") read_key(value, s.small_branch_height, key);
    else if (key == "small_branch_radius") read_key(value, s.small_branch_radius, key);
    else if (key == "small_branch_length") read_key(value, s.small_branch_length, key);
    else if (key == "twigs_per_meter") read_key(value, s.twigs_per_meter, key);
    else if (key == "twig_radius") read_key(value, s.twig_radius, key);
    else if (key == "twig_length") read_key(value, s.twig_length, key);
    else if (key == "point_density") read_key(value, s.point_density, key);
    else if (key == "noise_sigma") read_key(value, s.noise_sigma, key);
    else if (key == "ground_extent") read_key(value, s.ground_extent, key);
    else if (key == "ground_density") read_key(value, s.ground_density, key);
    else if (key == "sky_noise_count") read_key(value, s.sky_noise_count, key);
    else if (key == "lb_min_fraction") read_key(value, s.lb_min_fraction, key);
    else if (key == "holes") {
      s.holes.clear();
      if (!value.is_array()) throw ParameterError("tree spec 'holes' must be an array");
      for (const auto& jh : value) {
        std::array<double, 3> c{};
        Hole h;
        read_key(jh.at("center"), c, "holes.center");
        read_key(jh.at("radius"), h.radius, "holes.radius");
        h.center = Vec3(c[0], c[1], c[2]);
        s.holes.push_back(h);
      }
    } else {
      throw ParameterError("unknown tree spec key '" + key + "'");
    }
  }
}

TreeSpec load_tree_spec(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path.string() + "'");
  nlohmann::ordered_json j;
  try {
    j = nlohmann::ordered_json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw DataError("cannot parse '" + path.string() + "': " + e.what());
  }
  TreeSpec spec = j.get<TreeSpec>();
  spec.validate();
  return spec;
}

GroundTruth generate_tree(const TreeSpec& spec) {
  spec.validate();
  Builder builder{spec, Rng(spec.seed), {}, 0};
  builder.build();
  const auto& segs = builder.segments;

  std::vector<Point> points;
  std::vector<std::int64_t> cls, segment_of;
  Rng& rng = builder.rng;
  auto push = [&](const Vec3& p, Rgb color, PointClass c, int segment) {
    Point pt;
    pt.position = p;
    pt.color = color;
    pt.source_id = static_cast<std::int64_t>(points.size());
    points.push_back(pt);
    cls.push_back(static_cast<std::int64_t>(c));
    segment_of.push_back(segment);
  };

  std::vector<std::size_t> major_ids;
  for (const auto& s : segs) {
    if (is_major(s.kind)) major_ids.push_back(static_cast<std::size_t>(s.id));
  }
  std::vector<std::size_t> segment_points(segs.size(), 0);
  for (const auto& s : segs) {
    const Vec3 e1 = s.dir.unitOrthogonal();
    const Vec3 e2 = s.dir.cross(e1);
    const auto n = static_cast<std::size_t>(
        std::llround(spec.point_density * 2.0 * std::numbers::pi * s.radius * s.length));
    for (std::size_t k = 0; k < n; ++k) {
      const double t = uniform(rng, 0.0, s.length);
      const double phi = uniform(rng, 0.0, 2.0 * std::numbers::pi);
      const double r = s.radius + truncated_normal(rng, spec.noise_sigma);
      const Vec3 p = s.start + t * s.dir + r * (std::cos(phi) * e1 + std::sin(phi) * e2);
      const Rgb bark{jitter(rng, 105, 10.0), jitter(rng, 78, 8.0), jitter(rng, 52, 6.0)};
      bool hidden = false;
      if (is_major(s.kind)) {
        for (std::size_t o : major_ids) {
          if (static_cast<int>(o) != s.id && inside(p, segs[o])) {
            hidden = true;
            break;
          }
        }
      } else {
        hidden = inside(p, segs[static_cast<std::size_t>(s.parent)]);
      }
      if (hidden || p.z() < 0.0) continue;
      push(p, bark, is_major(s.kind) ? PointClass::major : PointClass::minor, s.id);
      ++segment_points[static_cast<std::size_t>(s.id)];
    }
  }

  const auto n_ground = static_cast<std::size_t>(
      std::llround(spec.ground_density * std::numbers::pi * spec.ground_extent * spec.ground_extent));
  for (std::size_t k = 0; k < n_ground; ++k) {
    const double rad = spec.ground_extent * std::sqrt(uniform(rng, 0.0, 1.0));
    const double phi = uniform(rng, 0.0, 2.0 * std::numbers::pi);
    const Vec3 p(rad * std::cos(phi), rad * std::sin(phi), truncated_normal(rng, spec.noise_sigma));
    const Rgb soil{jitter(rng, 86, 10.0), jitter(rng, 104, 10.0), jitter(rng, 52, 8.0)};
    if (rad < spec.trunk_radius) continue;
    push(p, soil, PointClass::ground, -1);
  }
  const double reach = spec.lb_length[1] + 0.3;
  for (int k = 0; k < spec.sky_noise_count; ++k) {
    const Vec3 p(uniform(rng, -reach, reach), uniform(rng, -reach, reach),
                 uniform(rng, 0.3 * spec.trunk_height, spec.trunk_height + 0.6));
    const Rgb sky{jitter(rng, 236, 6.0), jitter(rng, 241, 5.0), jitter(rng, 250, 3.0)};
    push(p, sky, PointClass::noise, -1);
  }

  // Leading branches are the trunk-attached subtrees holding at least
  // lb_min_fraction of the bark points (twigs excluded).
  std::map<int, std::size_t> subtree_points;
  std::size_t major_points = 0;
  for (const auto& s : segs) {
    if (!is_major(s.kind)) continue;
    major_points += segment_points[static_cast<std::size_t>(s.id)];
    if (s.kind != SegmentKind::trunk) subtree_points[s.top_branch] += segment_points[static_cast<std::size_t>(s.id)];
  }
  std::vector<std::pair<std::size_t, int>> order;
  for (const auto& [top, count] : subtree_points) order.emplace_back(count, top);
  std::stable_sort(order.begin(), order.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  GroundTruth truth;
  std::map<int, int> top_label;
  for (const auto& [count, top] : order) {
    if (static_cast<double>(count) >= spec.lb_min_fraction * static_cast<double>(major_points)) {
      top_label[top] = ++truth.labels.lb_count;
    }
  }
  for (const auto& [count, top] : order) top_label.try_emplace(top, truth.labels.sb_id());
  auto label_of_segment = [&](const Segment& s) {
    if (s.kind == SegmentKind::trunk) return BranchLabeling::kTrunk;
    return top_label.at(s.top_branch);
  };

  truth.labels.branch_id.reserve(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) {
    const auto c = static_cast<PointClass>(cls[i]);
    if (c == PointClass::major) {
      truth.labels.branch_id.push_back(label_of_segment(segs[static_cast<std::size_t>(segment_of[i])]));
    } else {
      truth.labels.branch_id.push_back(BranchLabeling::kRest);
    }
  }

  // Reference skeleton: root, one tip per major segment and one fork per
  // non-trunk major segment on its parent axis.
  EvalGraph& g = truth.skeleton;
  g.lb_count = truth.labels.lb_count;
  auto add_node = [&](const Vec3& p, int label, const char* kind, std::size_t n) {
    g.ids.push_back(static_cast<int>(g.ids.size()));
    g.positions.push_back(p);
    g.labels.push_back(label);
    truth.node_kinds.emplace_back(kind);
    truth.node_points.push_back(n);
    return static_cast<int>(g.ids.size()) - 1;
  };
  const int root = add_node(Vec3::Zero(), BranchLabeling::kTrunk, "trunk", 0);
  std::map<int, std::vector<std::pair<double, int>>> forks_on;  // parent -> (t, fork node)
  std::map<int, int> fork_of, tip_of;
  for (std::size_t id : major_ids) {
    const Segment& s = segs[id];
    const int label = label_of_segment(s);
    const bool trunk = s.kind == SegmentKind::trunk;
    tip_of[s.id] = add_node(s.end(), label, trunk ? "trunk" : "branch", segment_points[id]);
    if (trunk) continue;
    const Segment& parent = segs[static_cast<std::size_t>(s.parent)];
    const double t = fork_parameter(s, parent);
    const bool on_trunk = parent.kind == SegmentKind::trunk;
    fork_of[s.id] = add_node(parent.start + t * parent.dir, label_of_segment(parent),
                             on_trunk ? "trunk" : "branch", 0);
    forks_on[parent.id].emplace_back(t, fork_of[s.id]);
  }
  for (std::size_t id : major_ids) {
    const Segment& s = segs[id];
    auto chain = forks_on[s.id];
    std::sort(chain.begin(), chain.end());
    int previous = s.kind == SegmentKind::trunk ? root : fork_of.at(s.id);
    const int label = label_of_segment(s);
    for (const auto& [t, node] : chain) {
      g.edges.push_back({node, previous,
                         (g.positions[static_cast<std::size_t>(node)] -
                          g.positions[static_cast<std::size_t>(previous)]).norm(),
                         label});
      previous = node;
    }
    const int tip = tip_of.at(s.id);
    g.edges.push_back({tip, previous,
                       (g.positions[static_cast<std::size_t>(tip)] -
                        g.positions[static_cast<std::size_t>(previous)]).norm(),
                       label});
  }
  g.validate();

  truth.cloud = PointCloud(std::move(points));
  truth.cloud.set_field(kClassField, IntField(cls));
  truth.cloud.set_field("branch_id",
                        IntField(truth.labels.branch_id.begin(), truth.labels.branch_id.end()));
  truth.cloud.set_field("segment", IntField(segment_of));
  truth.cloud.metadata()["lb_count"] = std::to_string(truth.labels.lb_count);
  truth.segments = segs;
  truth.branch_count = major_ids.size() - 1;
  truth.rejected_branches = builder.rejected;
  if (!spec.holes.empty()) return perturb_with_holes(truth, spec.holes);
  return truth;
}

GroundTruth perturb_with_holes(const GroundTruth& truth, const std::vector<Hole>& holes) {
  for (const auto& h : holes) {
    if (!(h.radius > 0.0)) throw ParameterError("hole radius must be positive");
  }
  std::vector<std::size_t> keep;
  for (std::size_t i = 0; i < truth.cloud.size(); ++i) {
    const Vec3& p = truth.cloud[i].position;
    const bool removed = std::any_of(holes.begin(), holes.end(), [&](const Hole& h) {
      return (p - h.center).norm() <= h.radius;
    });
    if (!removed) keep.push_back(i);
  }
  GroundTruth out = truth;
  out.cloud = truth.cloud.subset(keep);
  out.labels.branch_id.clear();
  for (std::size_t i : keep) out.labels.branch_id.push_back(truth.labels.branch_id[i]);
  return out;
}

std::size_t analytic_node_count(const TreeSpec& spec) {
  if (spec.child_count[0] != spec.child_count[1]) {
    throw ParameterError("analytic node count needs a fixed child count");
  }
  std::size_t per_lb = 0, level = 1;
  for (int d = 0; d < spec.recursion_depth; ++d) {
    per_lb += level;
    level *= static_cast<std::size_t>(spec.child_count[0]);
  }
  const std::size_t branches =
      static_cast<std::size_t>(spec.leading_branch_count) * per_lb +
      static_cast<std::size_t>(spec.small_branch_count);
  return 2 + 2 * branches;
}

void save_ground_truth(const GroundTruth& truth, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  save_cloud(truth.cloud, dir / "tree.ply", CloudFormat::ply_ascii);

  const auto j = eval_graph_to_json(truth.skeleton, truth.node_kinds, truth.node_points);
  std::ofstream graph(dir / "reference_skeleton.json", std::ios::binary);
  if (!graph) throw DataError("cannot write into '" + dir.string() + "'");
  graph << j.dump(1) << '\n';

  std::ofstream labels(dir / "labels.csv", std::ios::binary);
  labels << "index,class,branch_id,segment\n";
  const auto& cls = truth.cloud.int_field(kClassField);
  const auto& seg = truth.cloud.int_field("segment");
  for (std::size_t i = 0; i < truth.cloud.size(); ++i) {
    labels << i << ',' << cls[i] << ',' << truth.labels.branch_id[i] << ',' << seg[i] << '\n';
  }
}

}  // namespace treeskel
