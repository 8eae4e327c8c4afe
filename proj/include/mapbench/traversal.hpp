#pragma once

// Sensor-limited virtual exploration of a Voronoi graph. The accumulated
// translation and rotation are the Voronoi traversal distance (VTD) and
// Voronoi traversal rotation (VTR).

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numbers>
#include <optional>
#include <queue>
#include <vector>

#include "mapbench/error.hpp"
#include "mapbench/gridmap.hpp"
#include "mapbench/trajectory.hpp"
#include "mapbench/voronoi.hpp"

namespace mapbench {

inline constexpr double deg_to_rad(double deg) { return deg * std::numbers::pi / 180.0; }

struct SensorConfig {
  double fov = deg_to_rad(270.0);
  double angular_resolution = deg_to_rad(0.5);
  double range = 30.0;  // m

  void check() const {
    if (!(fov > 0.0 && fov <= 2.0 * std::numbers::pi + 1e-12)) throw ValidationError("field of view must lie in (0, 2*pi]");
    if (!(range > 0.0)) throw ValidationError("sensor range must be > 0");
    if (!(angular_resolution > 0.0)) throw ValidationError("angular resolution must be > 0");
  }
};

struct TraversalParams {
  /// Legs shorter than this never contribute rotation nor change the heading.
  double rotation_min_dist = 0.5;  // m
};

struct VirtualRobotState {
  NodeId node = 0;
  double heading = 0.0;
  std::vector<bool> seen;
};

struct TraversalLeg {
  std::vector<NodeId> path;  // from the node where the leg starts to the frontier target
  double distance = 0.0;     // m
  double rotation = 0.0;     // rad
};

struct TraversalResult {
  double vtd = 0.0;  // m
  double vtr = 0.0;  // rad
  NodeId start = 0;
  std::vector<NodeId> visit_order;
  std::vector<TraversalLeg> legs;
  std::size_t seen_count = 0;
};

/// Bresenham walk from `a` to `b`; true when no blocked cell lies strictly between them.
inline bool line_of_sight(const GridMap& map, Pixel a, Pixel b) {
  int r = a.row, c = a.col;
  const int dr = std::abs(b.row - a.row), dc = std::abs(b.col - a.col);
  const int sr = a.row < b.row ? 1 : -1, sc = a.col < b.col ? 1 : -1;
  int err = dc - dr;
  while (true) {
    if (r == b.row && c == b.col) return true;
    if (!(r == a.row && c == a.col) && map.blocked(r, c)) return false;
    const int e2 = 2 * err;
    if (e2 > -dr) {
      err -= dr;
      c += sc;
    }
    if (e2 < dc) {
      err += dc;
      r += sr;
    }
  }
}

namespace detail {

inline bool node_visible(const GridMap& map, const GraphNode& from, double heading, const GraphNode& to,
                         const SensorConfig& s) {
  const double dr = to.row - from.row, dc = to.col - from.col;
  if (dr == 0 && dc == 0) return true;
  if (std::hypot(dr, dc) * map.resolution() > s.range) return false;
  if (s.fov < 2.0 * std::numbers::pi) {
    const double off = std::abs(wrap_angle(std::atan2(dr, dc) - heading));
    if (off > s.fov / 2.0) return false;
  }
  return line_of_sight(map, {from.row, from.col}, {to.row, to.col});
}

}  // namespace detail

/// Graph nodes visible from `node` with the sensor pointing along `heading`
/// (image frame: angle 0 along +column, pi/2 along +row).
inline std::vector<NodeId> visible_nodes(const GridMap& map, const VoronoiGraph& g, NodeId node, double heading,
                                         const SensorConfig& s) {
  if (node < 0 || static_cast<std::size_t>(node) >= g.nodes.size()) throw ValidationError("pose node not in graph");
  std::vector<NodeId> out;
  const GraphNode& from = g.nodes[static_cast<std::size_t>(node)];
  for (std::size_t j = 0; j < g.nodes.size(); ++j)
    if (detail::node_visible(map, from, heading, g.nodes[j], s)) out.push_back(static_cast<NodeId>(j));
  return out;
}

struct ShortestPaths {
  std::vector<double> dist;
  std::vector<NodeId> pred;

  std::vector<NodeId> path_to(NodeId target) const {
    std::vector<NodeId> p;
    for (NodeId v = target; v >= 0; v = pred[static_cast<std::size_t>(v)]) p.push_back(v);
    std::reverse(p.begin(), p.end());
    return p;
  }
};

/// Dijkstra over pixel edge weights; equal-distance ties keep the smaller predecessor id.
inline ShortestPaths dijkstra(const Adjacency& adj, NodeId source) {
  constexpr double inf = std::numeric_limits<double>::infinity();
  ShortestPaths sp{std::vector<double>(adj.size(), inf), std::vector<NodeId>(adj.size(), -1)};
  using Item = std::pair<double, NodeId>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> pq;
  sp.dist[static_cast<std::size_t>(source)] = 0.0;
  pq.push({0.0, source});
  while (!pq.empty()) {
    const auto [d, u] = pq.top();
    pq.pop();
    if (d > sp.dist[static_cast<std::size_t>(u)]) continue;
    for (const auto& [v, w] : adj[static_cast<std::size_t>(u)]) {
      const double nd = d + w;
      double& dv = sp.dist[static_cast<std::size_t>(v)];
      NodeId& pv = sp.pred[static_cast<std::size_t>(v)];
      if (nd < dv) {
        dv = nd;
        pv = u;
        pq.push({nd, v});
      } else if (nd == dv && u < pv) {
        pv = u;
      }
    }
  }
  return sp;
}

namespace detail {

inline std::optional<NodeId> closest_unseen(const ShortestPaths& sp, const std::vector<bool>& seen) {
  std::optional<NodeId> best;
  for (std::size_t v = 0; v < sp.dist.size(); ++v) {
    if (seen[v] || !std::isfinite(sp.dist[v])) continue;
    if (!best || sp.dist[v] < sp.dist[static_cast<std::size_t>(*best)]) best = static_cast<NodeId>(v);
  }
  return best;
}

}  // namespace detail

/// Unseen node with the smallest path distance from the robot (ties: smaller id);
/// nullopt once every reachable node has been seen.
inline std::optional<NodeId> nearest_frontier(const VoronoiGraph& g, const VirtualRobotState& state) {
  if (state.seen.size() != g.nodes.size()) throw ValidationError("seen set does not match graph size");
  return detail::closest_unseen(dijkstra(adjacency(g), state.node), state.seen);
}

/// Node closest to pixel position (row, col); ties go to the smaller id.
/// The query is snapped to a 1e-6 px lattice first: metric-to-pixel
/// conversion rounds differently under a shifted origin, and a start exactly
/// between two nodes must still resolve to the smaller id.
inline NodeId nearest_node(const VoronoiGraph& g, double row, double col) {
  if (g.nodes.empty()) throw ValidationError("cannot place the robot on an empty Voronoi graph");
  row = std::round(row * 1e6) / 1e6;
  col = std::round(col * 1e6) / 1e6;
  NodeId best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < g.nodes.size(); ++i) {
    const double dr = g.nodes[i].row - row, dc = g.nodes[i].col - col;
    const double d = dr * dr + dc * dc;
    if (d < best_d) {
      best_d = d;
      best = static_cast<NodeId>(i);
    }
  }
  return best;
}

/// Alternates mapping (mark visible nodes seen) and exploration (walk the
/// shortest path to the nearest unseen node, perceiving after every step)
/// until no reachable node is left unseen.
inline TraversalResult simulate_exploration(const GridMap& map, const VoronoiGraph& g, const Pose2& start,
                                            const SensorConfig& sensor = {}, const TraversalParams& params = {}) {
  sensor.check();
  const Adjacency adj = adjacency(g);
  VirtualRobotState st;
  st.node = nearest_node(g, map.to_row(start.y), map.to_col(start.x));
  st.heading = start.theta;
  st.seen.assign(g.nodes.size(), false);

  TraversalResult res;
  res.start = st.node;

  std::vector<NodeId> unseen(g.nodes.size());
  for (std::size_t i = 0; i < unseen.size(); ++i) unseen[i] = static_cast<NodeId>(i);
  auto perceive = [&] {
    const GraphNode& from = g.nodes[static_cast<std::size_t>(st.node)];
    std::erase_if(unseen, [&](NodeId v) {
      if (detail::node_visible(map, from, st.heading, g.nodes[static_cast<std::size_t>(v)], sensor)) {
        st.seen[static_cast<std::size_t>(v)] = true;
        return true;
      }
      return false;
    });
  };

  const double min_rot_px = params.rotation_min_dist / map.resolution();
  perceive();
  while (!unseen.empty()) {
    const ShortestPaths sp = dijkstra(adj, st.node);
    const auto target = detail::closest_unseen(sp, st.seen);
    if (!target) break;
    TraversalLeg leg;
    leg.path = sp.path_to(*target);
    for (std::size_t k = 1; k < leg.path.size(); ++k) {
      const GraphNode& a = g.nodes[static_cast<std::size_t>(leg.path[k - 1])];
      const GraphNode& b = g.nodes[static_cast<std::size_t>(leg.path[k])];
      const double dpx = std::hypot(b.row - a.row, b.col - a.col);
      leg.distance += dpx * map.resolution();
      if (dpx >= min_rot_px) {
        const double dir = std::atan2(double(b.row - a.row), double(b.col - a.col));
        leg.rotation += std::abs(wrap_angle(dir - st.heading));
        st.heading = dir;
      }
      st.node = leg.path[k];
      perceive();
    }
    res.vtd += leg.distance;
    res.vtr += leg.rotation;
    res.visit_order.push_back(*target);
    res.legs.push_back(std::move(leg));
  }
  res.seen_count = static_cast<std::size_t>(std::count(st.seen.begin(), st.seen.end(), true));
  return res;
}

}  // namespace mapbench
