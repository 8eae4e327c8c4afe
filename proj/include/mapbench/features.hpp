#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "mapbench/gridmap.hpp"
#include "mapbench/traversal.hpp"
#include "mapbench/voronoi.hpp"

namespace mapbench {

/// Per-environment predictors.
struct FeatureVector {
  double vtd_m = 0.0;
  double vtr_rad = 0.0;
  double area_m2 = 0.0;
  double perimeter_m = 0.0;
  double node_count = 0.0;
  double edge_count = 0.0;

  /// Named view used by the models (names match the dataset CSV columns).
  std::map<std::string, double> named() const {
    return {{"vtd_m", vtd_m},         {"vtr_rad", vtr_rad},       {"area_m2", area_m2},
            {"perimeter_m", perimeter_m}, {"node_count", node_count}, {"edge_count", edge_count}};
  }

  friend bool operator==(const FeatureVector&, const FeatureVector&) = default;
};

struct FeatureOptions {
  SensorConfig sensor;
  TraversalParams traversal;
  VoronoiParams voronoi;
  /// Metric start pose; defaults to the interior centroid with heading 0.
  std::optional<Pose2> start;
};

struct FeatureExtraction {
  FeatureVector features;
  Skeleton skeleton;
  TraversalResult traversal;
  Pose2 start;
};

/// Centroid of the interior mask in metric coordinates.
inline Pose2 interior_centroid(const GridMap& map, const InteriorMask& mask, double heading = 0.0) {
  double sr = 0.0, sc = 0.0;
  std::size_t n = 0;
  for (int r = 0; r < mask.height(); ++r)
    for (int c = 0; c < mask.width(); ++c)
      if (mask.get(r, c)) {
        sr += r;
        sc += c;
        ++n;
      }
  if (n == 0) throw NoBoundaryError("no boundary: empty interior");
  return {map.to_x(sc / n), map.to_y(sr / n), heading};
}

inline FeatureExtraction extract_features_full(const GridMap& map, const FeatureOptions& opt = {}) {
  FeatureExtraction out;
  out.skeleton = build_voronoi(map, opt.voronoi);
  if (out.skeleton.graph.nodes.empty()) throw ValidationError("Voronoi graph is empty; nothing to traverse");
  out.start = opt.start ? *opt.start : interior_centroid(map, out.skeleton.mask);
  out.traversal = simulate_exploration(map, out.skeleton.graph, out.start, opt.sensor, opt.traversal);

  const double res = map.resolution();
  FeatureVector& f = out.features;
  f.vtd_m = out.traversal.vtd;
  f.vtr_rad = out.traversal.vtr;
  f.area_m2 = static_cast<double>(traversable(map, out.skeleton.mask).count()) * res * res;
  f.perimeter_m = static_cast<double>(out.skeleton.boundary.length()) * res;
  f.node_count = static_cast<double>(out.skeleton.graph.node_count());
  f.edge_count = static_cast<double>(out.skeleton.graph.edge_count());
  return out;
}

inline FeatureVector extract_features(const GridMap& map, const SensorConfig& sensor = {},
                                      std::optional<Pose2> start = std::nullopt) {
  FeatureOptions opt;
  opt.sensor = sensor;
  opt.start = start;
  return extract_features_full(map, opt).features;
}

}  // namespace mapbench
