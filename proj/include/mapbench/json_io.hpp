#pragma once

// JSON forms of the toolkit's artifacts: run errors, performance vectors,
// feature files, Voronoi graph files and model files.

#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include "json.hpp"
#include "mapbench/dataset.hpp"
#include "mapbench/error.hpp"
#include "mapbench/features.hpp"
#include "mapbench/models.hpp"
#include "mapbench/trajectory.hpp"
#include "mapbench/voronoi.hpp"

namespace mapbench {

using json = nlohmann::json;

inline json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ParseError("'" + path.string() + "' is not valid JSON: " + e.what());
  }
}

/// Writes only when the content differs; returns true if the file changed.
inline bool write_text_if_changed(const std::filesystem::path& path, const std::string& text) {
  if (std::filesystem::exists(path)) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    if (ss.str() == text) return false;
  }
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  out << text;
  if (!out) throw IoError("write failed for '" + path.string() + "'");
  return true;
}

inline bool write_json_file(const std::filesystem::path& path, const json& j) {
  return write_text_if_changed(path, j.dump(2) + "\n");
}

inline std::string utc_date() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

// --- trajectory metric -----------------------------------------------------

inline json to_json(const RunError& e) {
  return {{"eps_t", e.eps_t}, {"eps_r", e.eps_r}, {"mode", to_string(e.mode)}, {"n", e.n}};
}

inline RunError run_error_from_json(const json& j) {
  return {j.at("eps_t").get<double>(), j.at("eps_r").get<double>(), parse_error_mode(j.at("mode").get<std::string>()),
          j.at("n").get<std::size_t>()};
}

inline json to_json(const PerformanceVector& p) {
  return {{"mean_eps_t", p.mean_eps_t}, {"std_eps_t", p.std_eps_t}, {"mean_eps_r", p.mean_eps_r},
          {"std_eps_r", p.std_eps_r},   {"runs", p.runs}};
}

inline PerformanceVector performance_from_json(const json& j) {
  PerformanceVector p;
  p.mean_eps_t = j.at("mean_eps_t").get<double>();
  p.std_eps_t = j.at("std_eps_t").get<double>();
  p.mean_eps_r = j.at("mean_eps_r").get<double>();
  p.std_eps_r = j.at("std_eps_r").get<double>();
  p.runs = j.value("runs", std::size_t{1});
  return p;
}

inline json to_json(const SamplingPolicy& p) {
  return {{"confidence", p.confidence}, {"margin_t", p.margin_t},     {"margin_r", p.margin_r},
          {"pilot_pairs", p.pilot_pairs}, {"pilot_runs", p.pilot_runs}, {"seed", p.seed},
          {"mode", to_string(p.mode)},   {"square_z", p.square_z},     {"rng", kRngName}};
}

// --- features ---------------------------------------------------------------

inline json to_json(const FeatureVector& f) {
  return {{"vtd_m", f.vtd_m},           {"vtr_rad", f.vtr_rad},       {"area_m2", f.area_m2},
          {"perimeter_m", f.perimeter_m}, {"node_count", f.node_count}, {"edge_count", f.edge_count}};
}

/// Reads every numeric member, so feature files may carry extra predictors.
inline FeatureMap feature_map_from_json(const json& j) {
  FeatureMap m;
  for (const auto& [k, v] : j.items())
    if (v.is_number()) m[k] = v.get<double>();
  return m;
}

inline FeatureVector features_from_json(const json& j) {
  FeatureVector f;
  f.vtd_m = j.at("vtd_m").get<double>();
  f.vtr_rad = j.at("vtr_rad").get<double>();
  f.area_m2 = j.value("area_m2", 0.0);
  f.perimeter_m = j.value("perimeter_m", 0.0);
  f.node_count = j.value("node_count", 0.0);
  f.edge_count = j.value("edge_count", 0.0);
  return f;
}

inline json trace_json(const TraversalResult& t) {
  json legs = json::array();
  for (const auto& l : t.legs) legs.push_back({{"path", l.path}, {"distance_m", l.distance}, {"rotation_rad", l.rotation}});
  return legs;
}

inline json to_json(const SensorConfig& s) {
  return {{"fov_rad", s.fov}, {"angular_resolution_rad", s.angular_resolution}, {"range_m", s.range}};
}

// --- Voronoi graph ----------------------------------------------------------

inline json to_json(const VoronoiGraph& g, const GridMap& map, const VoronoiParams& params) {
  json nodes = json::array(), edges = json::array();
  for (std::size_t i = 0; i < g.nodes.size(); ++i) nodes.push_back({{"id", i}, {"row", g.nodes[i].row}, {"col", g.nodes[i].col}});
  for (const auto& e : g.edges) edges.push_back({{"a", e.a}, {"b", e.b}, {"weight_px", e.weight}});
  return {{"nodes", nodes},
          {"edges", edges},
          {"map",
           {{"width", map.width()},
            {"height", map.height()},
            {"resolution", map.resolution()},
            {"origin_x", map.origin_x()},
            {"origin_y", map.origin_y()}}},
          {"params",
           {{"ridge_tolerance_px", params.ridge_tolerance_px},
            {"site_separation_px", params.site_separation_px},
            {"thinning", to_string(params.thinning)},
            {"collinear_tolerance_px", params.collinear_tolerance_px},
            {"min_spur_px", params.min_spur_px},
            {"dilation_kernel", params.dilation_kernel}}}};
}

inline VoronoiGraph graph_from_json(const json& j) {
  VoronoiGraph g;
  for (const auto& n : j.at("nodes")) {
    if (n.at("id").get<std::size_t>() != g.nodes.size()) throw ParseError("graph node ids must be 0..n-1 in order");
    g.nodes.push_back({n.at("row").get<int>(), n.at("col").get<int>()});
  }
  for (const auto& e : j.at("edges")) {
    GraphEdge ge{e.at("a").get<NodeId>(), e.at("b").get<NodeId>(), e.at("weight_px").get<double>()};
    if (ge.a < 0 || ge.b < 0 || static_cast<std::size_t>(std::max(ge.a, ge.b)) >= g.nodes.size()) {
      throw ParseError("graph edge references a missing node");
    }
    g.edges.push_back(ge);
  }
  return g;
}

// --- models -----------------------------------------------------------------

struct TrainingMeta {
  std::uint64_t seed = 0;
  std::size_t k = 5;
  std::string date;
  std::size_t rows = 0;
  std::optional<CVReport> cv;
};

inline json to_json(const Model& model, const TrainingMeta& meta) {
  json j;
  j["model_type"] = model_type(model);
  j["target"] = to_string(model_target(model));
  j["features"] = model_features(model);
  std::visit(
      [&](const auto& m) {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, LinearModel>) {
          j["coefficients"] = m.coefficients;
          j["intercept"] = m.intercept;
        } else if constexpr (std::is_same_v<T, ElasticNetModel>) {
          j["coefficients"] = m.coefficients;
          j["intercept"] = m.intercept;
          j["hyperparams"] = {{"l1", m.l1}, {"l2", m.l2}};
          j["feature_means"] = m.feature_means;
          j["feature_scales"] = m.feature_scales;
          j["iterations"] = m.iterations;
        } else {
          j["hyperparams"] = {{"kernel", "rbf"},
                              {"length_scale", m.length_scale},
                              {"signal_variance", m.signal_variance},
                              {"noise_variance", m.noise_variance}};
          json xs = json::array();
          for (Eigen::Index i = 0; i < m.train_x.rows(); ++i) {
            std::vector<double> row(static_cast<std::size_t>(m.train_x.cols()));
            for (Eigen::Index c = 0; c < m.train_x.cols(); ++c) row[static_cast<std::size_t>(c)] = m.train_x(i, c);
            xs.push_back(row);
          }
          j["train_x"] = xs;
          j["train_y"] = std::vector<double>(m.train_y.data(), m.train_y.data() + m.train_y.size());
        }
      },
      model);
  json tm = {{"seed", meta.seed}, {"k", meta.k}, {"date", meta.date}, {"rows", meta.rows}};
  if (meta.cv) tm["cv"] = {{"r2", meta.cv->r2}, {"rmse", meta.cv->rmse}, {"nrmse", meta.cv->nrmse}};
  j["training_meta"] = tm;
  return j;
}

inline Model model_from_json(const json& j) {
  try {
    const std::string type = j.at("model_type").get<std::string>();
    const Target target = parse_target(j.at("target").get<std::string>());
    const auto features = j.at("features").get<std::vector<std::string>>();
    if (type == "ols") {
      LinearModel m;
      m.features = features;
      m.target = target;
      m.coefficients = j.at("coefficients").get<std::vector<double>>();
      m.intercept = j.at("intercept").get<double>();
      if (m.coefficients.size() != m.features.size()) throw ParseError("coefficient count does not match feature count");
      return m;
    }
    if (type == "enet") {
      ElasticNetModel m;
      m.features = features;
      m.target = target;
      m.coefficients = j.at("coefficients").get<std::vector<double>>();
      m.intercept = j.at("intercept").get<double>();
      m.l1 = j.at("hyperparams").at("l1").get<double>();
      m.l2 = j.at("hyperparams").at("l2").get<double>();
      m.feature_means = j.at("feature_means").get<std::vector<double>>();
      m.feature_scales = j.at("feature_scales").get<std::vector<double>>();
      m.iterations = j.value("iterations", std::size_t{0});
      if (m.coefficients.size() != m.features.size()) throw ParseError("coefficient count does not match feature count");
      return m;
    }
    if (type == "gp") {
      const auto& hp = j.at("hyperparams");
      const auto xs = j.at("train_x").get<std::vector<std::vector<double>>>();
      const auto ys = j.at("train_y").get<std::vector<double>>();
      if (xs.size() != ys.size()) throw ParseError("train_x and train_y differ in length");
      Eigen::MatrixXd x(static_cast<Eigen::Index>(xs.size()), static_cast<Eigen::Index>(features.size()));
      for (std::size_t i = 0; i < xs.size(); ++i) {
        if (xs[i].size() != features.size()) throw ParseError("train_x row width does not match features");
        for (std::size_t c = 0; c < features.size(); ++c) x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) = xs[i][c];
      }
      const Eigen::VectorXd y = Eigen::Map<const Eigen::VectorXd>(ys.data(), static_cast<Eigen::Index>(ys.size()));
      return fit_gp_fixed(x, y, features, target, hp.at("length_scale").get<double>(),
                          hp.at("signal_variance").get<double>(), hp.at("noise_variance").get<double>());
    }
    throw ParseError("unknown model_type '" + type + "'");
  } catch (const json::exception& e) {
    throw ParseError(std::string("malformed model file: ") + e.what());
  }
}

inline Model load_model(const std::filesystem::path& path) { return model_from_json(read_json_file(path)); }

}  // namespace mapbench
