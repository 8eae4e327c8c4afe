#pragma once

// Voronoi skeleton of a floor plan: discrete generalized-Voronoi ridge from
// a Euclidean feature transform, 5x5 dilation, Zhang-Suen thinning, spur
// pruning, pixel graph and pass-through node sparsification.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <limits>
#include <map>
#include <queue>
#include <vector>

#include "mapbench/error.hpp"
#include "mapbench/gridmap.hpp"

namespace mapbench {

/// Binary skeleton (or pre-thinning ridge) image; true = skeleton pixel.
struct SkeletonImage : Bitmap {
  using Bitmap::Bitmap;
  SkeletonImage() = default;
  explicit SkeletonImage(Bitmap b) : Bitmap(std::move(b)) {}
};

/// Plain Zhang-Suen deletes diagonal strokes of even width outright; the
/// Lu-Wang correction (3 <= B instead of 2 <= B) keeps them.
enum class ThinningRule { ZhangSuen, LuWang };

inline const char* to_string(ThinningRule t) { return t == ThinningRule::ZhangSuen ? "zhang-suen" : "lu-wang"; }

struct VoronoiParams {
  double ridge_tolerance_px = 1.0;
  /// Two nearest obstacle pixels count as distinct when they face p from
  /// opposite half-planes or lie at least this far apart.
  double site_separation_px = 3.0;
  double collinear_tolerance_px = 0.5;
  int min_spur_px = 4;
  int dilation_kernel = 5;
  ThinningRule thinning = ThinningRule::LuWang;
};

// ---------------------------------------------------------------------------
// Distance / feature transform

struct FeatureTransform {
  int width = 0;
  int height = 0;
  std::vector<double> sq_dist;  // squared distance to nearest obstacle, +inf if none
  std::vector<Pixel> nearest;   // a nearest obstacle pixel (row -1 if none)

  double distance(int row, int col) const { return std::sqrt(sq_dist[static_cast<std::size_t>(row) * width + col]); }
  Pixel feature(int row, int col) const { return nearest[static_cast<std::size_t>(row) * width + col]; }
};

namespace detail {

// Lower envelope of parabolas (Felzenszwalb & Huttenlocher) tracking the argmin.
inline void envelope_1d(const std::vector<double>& f, std::vector<double>& d, std::vector<int>& arg,
                        std::vector<int>& v, std::vector<double>& z) {
  const int n = static_cast<int>(f.size());
  constexpr double inf = std::numeric_limits<double>::infinity();
  int k = -1;
  for (int q = 0; q < n; ++q) {
    if (f[q] == inf) continue;
    while (k >= 0) {
      const double s = ((f[q] + double(q) * q) - (f[v[k]] + double(v[k]) * v[k])) / (2.0 * q - 2.0 * v[k]);
      if (s <= z[k]) {
        --k;
      } else {
        break;
      }
    }
    ++k;
    v[k] = q;
    z[k] = k == 0 ? -inf : ((f[q] + double(q) * q) - (f[v[k - 1]] + double(v[k - 1]) * v[k - 1])) / (2.0 * q - 2.0 * v[k - 1]);
    z[k + 1] = inf;
  }
  if (k < 0) {
    std::fill(d.begin(), d.end(), inf);
    std::fill(arg.begin(), arg.end(), -1);
    return;
  }
  int j = 0;
  for (int q = 0; q < n; ++q) {
    while (z[j + 1] < q) ++j;
    d[q] = double(q - v[j]) * (q - v[j]) + f[v[j]];
    arg[q] = v[j];
  }
}

}  // namespace detail

/// Exact Euclidean feature transform of the blocked cells of `map`.
inline FeatureTransform feature_transform(const GridMap& map) {
  const int w = map.width(), h = map.height();
  constexpr double inf = std::numeric_limits<double>::infinity();
  FeatureTransform ft;
  ft.width = w;
  ft.height = h;
  ft.sq_dist.assign(static_cast<std::size_t>(w) * h, inf);
  ft.nearest.assign(static_cast<std::size_t>(w) * h, Pixel{-1, -1});

  // Columns: nearest obstacle row per pixel.
  std::vector<double> colsq(static_cast<std::size_t>(w) * h, inf);
  std::vector<int> colarg(static_cast<std::size_t>(w) * h, -1);
  {
    const int n = h;
    std::vector<double> f(n), d(n), z(n + 1);
    std::vector<int> arg(n), v(n);
    for (int c = 0; c < w; ++c) {
      for (int r = 0; r < h; ++r) f[r] = map.blocked(r, c) ? 0.0 : inf;
      detail::envelope_1d(f, d, arg, v, z);
      for (int r = 0; r < h; ++r) {
        colsq[static_cast<std::size_t>(r) * w + c] = d[r];
        colarg[static_cast<std::size_t>(r) * w + c] = arg[r];
      }
    }
  }
  // Rows.
  {
    const int n = w;
    std::vector<double> f(n), d(n), z(n + 1);
    std::vector<int> arg(n), v(n);
    for (int r = 0; r < h; ++r) {
      for (int c = 0; c < w; ++c) f[c] = colsq[static_cast<std::size_t>(r) * w + c];
      detail::envelope_1d(f, d, arg, v, z);
      for (int c = 0; c < w; ++c) {
        const std::size_t i = static_cast<std::size_t>(r) * w + c;
        ft.sq_dist[i] = d[c];
        if (arg[c] >= 0) ft.nearest[i] = {colarg[static_cast<std::size_t>(r) * w + arg[c]], arg[c]};
      }
    }
  }
  return ft;
}

// ---------------------------------------------------------------------------
// Ridge extraction

/// Generalized-Voronoi ridge: traversable interior pixels p with a nearest
/// obstacle a and a second obstacle b (the nearest obstacle of some
/// 8-neighbour) such that a and b are distinct sites, i.e.
/// (a - p).(b - p) <= 0 or |a - b| >= site separation, and
/// | |p - b| - |p - a| | <= ridge tolerance.
inline SkeletonImage tessellate(const GridMap& map, const InteriorMask& mask, const VoronoiParams& params = {}) {
  const Bitmap allowed = traversable(map, mask);
  const int w = map.width(), h = map.height();
  SkeletonImage ridge(w, h);
  if (allowed.empty()) return ridge;
  const FeatureTransform ft = feature_transform(map);
  for (int r = 0; r < h; ++r)
    for (int c = 0; c < w; ++c) {
      if (!allowed.get(r, c)) continue;
      const Pixel a = ft.feature(r, c);
      if (a.row < 0) continue;
      const double d1 = ft.distance(r, c);
      const double ax = a.col - c, ay = a.row - r;
      for (const Pixel d : kRing8) {
        const int nr = r + d.row, nc = c + d.col;
        if (!map.contains(nr, nc)) continue;
        const Pixel b = ft.feature(nr, nc);
        if (b.row < 0 || b == a) continue;
        const double bx = b.col - c, by = b.row - r;
        const double sep2 = (bx - ax) * (bx - ax) + (by - ay) * (by - ay);
        if (ax * bx + ay * by > 0.0 && sep2 < params.site_separation_px * params.site_separation_px) continue;
        if (std::abs(std::hypot(bx, by) - d1) <= params.ridge_tolerance_px) {
          ridge.set(r, c);
          break;
        }
      }
    }
  return ridge;
}

/// Full square structuring element, clipped to `allowed`.
inline SkeletonImage dilate(const SkeletonImage& img, const Bitmap& allowed, int kernel = 5) {
  const int half = kernel / 2;
  SkeletonImage out(img.width(), img.height());
  for (int r = 0; r < img.height(); ++r)
    for (int c = 0; c < img.width(); ++c) {
      if (!img.get(r, c)) continue;
      for (int dr = -half; dr <= half; ++dr)
        for (int dc = -half; dc <= half; ++dc)
          if (allowed.test(r + dr, c + dc)) out.set(r + dr, c + dc);
    }
  return out;
}

namespace detail {

// P2..P9 clockwise from north, as in the Zhang-Suen formulation.
inline std::array<int, 8> zs_neighbours(const Bitmap& img, int r, int c) {
  return {img.test(r - 1, c), img.test(r - 1, c + 1), img.test(r, c + 1), img.test(r + 1, c + 1),
          img.test(r + 1, c), img.test(r + 1, c - 1), img.test(r, c - 1), img.test(r - 1, c - 1)};
}

inline bool zs_deletable(const Bitmap& img, int r, int c, int pass, int min_b = 2) {
  const auto p = zs_neighbours(img, r, c);
  int b = 0, a = 0;
  for (int i = 0; i < 8; ++i) {
    b += p[i];
    if (!p[i] && p[(i + 1) % 8]) ++a;
  }
  if (b < min_b || b > 6 || a != 1) return false;
  // p[0]=P2 p[2]=P4 p[4]=P6 p[6]=P8
  if (pass == 0) return !(p[0] && p[2] && p[4]) && !(p[2] && p[4] && p[6]);
  return !(p[0] && p[2] && p[6]) && !(p[0] && p[4] && p[6]);
}

}  // namespace detail

/// Zhang-Suen two-subiteration thinning, run to a fixpoint.
inline SkeletonImage thin(const SkeletonImage& img, ThinningRule rule = ThinningRule::ZhangSuen) {
  const int min_b = rule == ThinningRule::ZhangSuen ? 2 : 3;
  SkeletonImage cur = img;
  std::vector<Pixel> candidates = cur.pixels();
  std::vector<Pixel> drop;
  bool changed = true;
  while (changed) {
    changed = false;
    for (int pass = 0; pass < 2; ++pass) {
      drop.clear();
      for (const Pixel p : candidates)
        if (cur.get(p.row, p.col) && detail::zs_deletable(cur, p.row, p.col, pass, min_b)) drop.push_back(p);
      for (const Pixel p : drop) cur.set(p.row, p.col, false);
      changed = changed || !drop.empty();
    }
    std::erase_if(candidates, [&](Pixel p) { return !cur.get(p.row, p.col); });
  }
  return cur;
}

namespace detail {

/// Yokoi connectivity number under 8-connectivity; 1 means p is a simple point.
inline int yokoi8(const Bitmap& img, int r, int c) {
  // E, NE, N, NW, W, SW, S, SE
  const int x[8] = {img.test(r, c + 1), img.test(r - 1, c + 1), img.test(r - 1, c), img.test(r - 1, c - 1),
                    img.test(r, c - 1), img.test(r + 1, c - 1), img.test(r + 1, c), img.test(r + 1, c + 1)};
  int n = 0;
  for (int k = 0; k < 8; k += 2) {
    const int a = 1 - x[k], b = 1 - x[(k + 1) % 8], d = 1 - x[(k + 2) % 8];
    n += a - a * b * d;
  }
  return n;
}

}  // namespace detail

/// Deletes, in raster order, simple non-end pixels that join two orthogonal
/// 4-neighbours, leaving 8-connected strokes one pixel wide.
inline SkeletonImage remove_staircases(const SkeletonImage& img) {
  SkeletonImage out = img;
  for (int r = 0; r < out.height(); ++r)
    for (int c = 0; c < out.width(); ++c) {
      if (!out.get(r, c)) continue;
      const bool vertical = out.test(r - 1, c) || out.test(r + 1, c);
      const bool horizontal = out.test(r, c - 1) || out.test(r, c + 1);
      if (!vertical || !horizontal) continue;
      int b = 0;
      for (int dr = -1; dr <= 1; ++dr)
        for (int dc = -1; dc <= 1; ++dc) b += (dr || dc) && out.test(r + dr, c + dc);
      if (b >= 2 && detail::yokoi8(out, r, c) == 1) out.set(r, c, false);
    }
  return out;
}

// ---------------------------------------------------------------------------
// Graphs

using NodeId = std::int32_t;

struct GraphNode {
  int row = 0;
  int col = 0;
  friend bool operator==(const GraphNode&, const GraphNode&) = default;
};

struct GraphEdge {
  NodeId a = 0;
  NodeId b = 0;
  double weight = 0.0;  // pixels
  friend bool operator==(const GraphEdge&, const GraphEdge&) = default;
};

struct VoronoiGraph {
  std::vector<GraphNode> nodes;
  std::vector<GraphEdge> edges;  // a < b, sorted

  std::size_t node_count() const { return nodes.size(); }
  std::size_t edge_count() const { return edges.size(); }
  friend bool operator==(const VoronoiGraph&, const VoronoiGraph&) = default;
};

/// Neighbour lists sorted by node id.
using Adjacency = std::vector<std::vector<std::pair<NodeId, double>>>;

inline Adjacency adjacency(const VoronoiGraph& g) {
  Adjacency adj(g.nodes.size());
  for (const auto& e : g.edges) {
    adj[static_cast<std::size_t>(e.a)].push_back({e.b, e.weight});
    adj[static_cast<std::size_t>(e.b)].push_back({e.a, e.weight});
  }
  for (auto& l : adj) std::sort(l.begin(), l.end());
  return adj;
}

/// One node per skeleton pixel (raster order); unit-weight edges between
/// 8-neighbours. A diagonal pair that already shares a 4-connected skeleton
/// neighbour gets no direct edge, so an L-corner stays a path.
inline VoronoiGraph build_pixel_graph(const SkeletonImage& img) {
  VoronoiGraph g;
  std::vector<NodeId> id(static_cast<std::size_t>(img.width()) * img.height(), -1);
  for (int r = 0; r < img.height(); ++r)
    for (int c = 0; c < img.width(); ++c)
      if (img.get(r, c)) {
        id[static_cast<std::size_t>(r) * img.width() + c] = static_cast<NodeId>(g.nodes.size());
        g.nodes.push_back({r, c});
      }
  auto at = [&](int r, int c) { return id[static_cast<std::size_t>(r) * img.width() + c]; };
  for (const auto& n : g.nodes) {
    const NodeId a = at(n.row, n.col);
    const int r = n.row, c = n.col;
    if (img.test(r, c + 1)) g.edges.push_back({a, at(r, c + 1), 1.0});
    if (img.test(r + 1, c)) g.edges.push_back({a, at(r + 1, c), 1.0});
    if (img.test(r + 1, c + 1) && !img.test(r, c + 1) && !img.test(r + 1, c)) g.edges.push_back({a, at(r + 1, c + 1), 1.0});
    if (img.test(r + 1, c - 1) && !img.test(r, c - 1) && !img.test(r + 1, c)) g.edges.push_back({a, at(r + 1, c - 1), 1.0});
  }
  for (auto& e : g.edges)
    if (e.a > e.b) std::swap(e.a, e.b);
  std::sort(g.edges.begin(), g.edges.end(), [](const GraphEdge& x, const GraphEdge& y) {
    return std::pair{x.a, x.b} < std::pair{y.a, y.b};
  });
  return g;
}

/// Removes branches that run from an endpoint to a junction (degree >= 3 in
/// the pixel graph) through fewer than `min_len` pixels. Isolated pieces are kept.
inline SkeletonImage prune_spurs(const SkeletonImage& img, int min_len = 4) {
  const VoronoiGraph g = build_pixel_graph(img);
  const Adjacency adj = adjacency(g);
  SkeletonImage out = img;
  for (std::size_t s = 0; s < g.nodes.size(); ++s) {
    if (adj[s].size() != 1) continue;
    std::vector<NodeId> branch{static_cast<NodeId>(s)};
    NodeId prev = -1, cur = static_cast<NodeId>(s);
    bool hit_junction = false;
    while (static_cast<int>(branch.size()) < min_len) {
      const auto& nb = adj[static_cast<std::size_t>(cur)];
      const NodeId next = nb[0].first != prev ? nb[0].first : (nb.size() > 1 ? nb[1].first : -1);
      if (next < 0) break;
      if (adj[static_cast<std::size_t>(next)].size() >= 3) {
        hit_junction = true;
        break;
      }
      if (adj[static_cast<std::size_t>(next)].size() == 1) break;
      prev = cur;
      cur = next;
      branch.push_back(cur);
    }
    if (hit_junction) {
      for (const NodeId v : branch) out.set(g.nodes[static_cast<std::size_t>(v)].row, g.nodes[static_cast<std::size_t>(v)].col, false);
    }
  }
  return out;
}

/// Distance from `p` to the segment [a, c].
inline double point_segment_distance(const GraphNode& p, const GraphNode& a, const GraphNode& c) {
  const double vx = c.col - a.col, vy = c.row - a.row;
  const double wx = p.col - a.col, wy = p.row - a.row;
  const double len2 = vx * vx + vy * vy;
  double t = len2 > 0 ? (wx * vx + wy * vy) / len2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  return std::hypot(wx - t * vx, wy - t * vy);
}

inline bool is_pass_through(const GraphNode& b, const GraphNode& a, const GraphNode& c, double tol) {
  return point_segment_distance(b, a, c) < tol;
}

/// Repeatedly removes degree-2 nodes lying on the segment between their two
/// neighbours, joining the neighbours with the summed weight (a parallel edge
/// keeps the lighter weight). Surviving nodes are renumbered in raster order.
inline VoronoiGraph sparsify(const VoronoiGraph& g, double collinear_tolerance_px = 0.5) {
  const std::size_t n = g.nodes.size();
  std::vector<std::map<NodeId, double>> adj(n);
  for (const auto& e : g.edges) {
    if (e.a == e.b) continue;
    auto put = [&](NodeId u, NodeId v) {
      auto [it, fresh] = adj[static_cast<std::size_t>(u)].emplace(v, e.weight);
      if (!fresh) it->second = std::min(it->second, e.weight);
    };
    put(e.a, e.b);
    put(e.b, e.a);
  }
  std::vector<bool> removed(n, false), queued(n, true);
  std::deque<NodeId> work;
  for (std::size_t i = 0; i < n; ++i) work.push_back(static_cast<NodeId>(i));

  while (!work.empty()) {
    const NodeId b = work.front();
    work.pop_front();
    queued[static_cast<std::size_t>(b)] = false;
    auto& nb = adj[static_cast<std::size_t>(b)];
    if (removed[static_cast<std::size_t>(b)] || nb.size() != 2) continue;
    const auto [a, wa] = *nb.begin();
    const auto [c, wc] = *std::next(nb.begin());
    if (!is_pass_through(g.nodes[static_cast<std::size_t>(b)], g.nodes[static_cast<std::size_t>(a)],
                         g.nodes[static_cast<std::size_t>(c)], collinear_tolerance_px)) {
      continue;
    }
    removed[static_cast<std::size_t>(b)] = true;
    nb.clear();
    adj[static_cast<std::size_t>(a)].erase(b);
    adj[static_cast<std::size_t>(c)].erase(b);
    const double w = wa + wc;
    for (auto [u, v] : {std::pair{a, c}, std::pair{c, a}}) {
      auto [it, fresh] = adj[static_cast<std::size_t>(u)].emplace(v, w);
      if (!fresh) it->second = std::min(it->second, w);
    }
    for (const NodeId u : {a, c}) {
      if (!queued[static_cast<std::size_t>(u)]) {
        queued[static_cast<std::size_t>(u)] = true;
        work.push_back(u);
      }
    }
  }

  VoronoiGraph out;
  std::vector<NodeId> remap(n, -1);
  for (std::size_t i = 0; i < n; ++i)
    if (!removed[i]) {
      remap[i] = static_cast<NodeId>(out.nodes.size());
      out.nodes.push_back(g.nodes[i]);
    }
  // Input ids are raster-ordered when produced by build_pixel_graph; keep that.
  for (std::size_t i = 0; i < n; ++i) {
    if (removed[i]) continue;
    for (const auto& [v, w] : adj[i])
      if (static_cast<std::size_t>(v) > i) out.edges.push_back({remap[i], remap[static_cast<std::size_t>(v)], w});
  }
  std::sort(out.edges.begin(), out.edges.end(), [](const GraphEdge& x, const GraphEdge& y) {
    return std::pair{x.a, x.b} < std::pair{y.a, y.b};
  });
  return out;
}

/// Number of connected components.
inline std::size_t component_count(const VoronoiGraph& g) {
  const auto adj = adjacency(g);
  std::vector<bool> seen(g.nodes.size(), false);
  std::size_t count = 0;
  std::vector<NodeId> stack;
  for (std::size_t s = 0; s < g.nodes.size(); ++s) {
    if (seen[s]) continue;
    ++count;
    seen[s] = true;
    stack.push_back(static_cast<NodeId>(s));
    while (!stack.empty()) {
      const NodeId u = stack.back();
      stack.pop_back();
      for (const auto& [v, w] : adj[static_cast<std::size_t>(u)])
        if (!seen[static_cast<std::size_t>(v)]) {
          seen[static_cast<std::size_t>(v)] = true;
          stack.push_back(v);
        }
    }
  }
  return count;
}

struct Skeleton {
  InteriorMask mask;
  Contour boundary;
  SkeletonImage ridge;
  SkeletonImage skeleton;
  VoronoiGraph pixel_graph;
  VoronoiGraph graph;
};

/// Interior mask -> ridge -> dilation -> thinning -> spur pruning -> graph -> sparsification.
inline Skeleton build_voronoi(const GridMap& map, const VoronoiParams& params = {}) {
  Skeleton s;
  auto boundary = building_boundary(map);
  s.mask = std::move(boundary.mask);
  s.boundary = std::move(boundary.contour);
  s.ridge = tessellate(map, s.mask, params);
  const Bitmap allowed = traversable(map, s.mask);
  SkeletonImage thick = dilate(s.ridge, allowed, params.dilation_kernel);
  s.skeleton = remove_staircases(thin(thick, params.thinning));
  if (params.min_spur_px > 0) {
    s.skeleton = remove_staircases(thin(prune_spurs(s.skeleton, params.min_spur_px), params.thinning));
  }
  s.pixel_graph = build_pixel_graph(s.skeleton);
  s.graph = sparsify(s.pixel_graph, params.collinear_tolerance_px);
  return s;
}

}  // namespace mapbench
