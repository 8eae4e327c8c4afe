// mapbench: command-line front end for the toolkit.
// Exit codes: 0 success, 1 domain error, 2 usage error.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "mapbench/datastore.hpp"
#include "mapbench/features.hpp"
#include "mapbench/json_io.hpp"
#include "mapbench/models.hpp"
#include "mapbench/pipeline.hpp"
#include "mapbench/raster.hpp"
#include "mapbench/synth.hpp"
#include "mapbench/trajectory.hpp"
#include "mapbench/voronoi.hpp"

namespace fs = std::filesystem;
using namespace mapbench;

namespace {

enum class LogLevel { Error, Warn, Info, Debug };

LogLevel log_level() {
  const char* v = std::getenv("MAPBENCH_LOG");
  const std::string s = v ? v : "warn";
  if (s == "error") return LogLevel::Error;
  if (s == "info") return LogLevel::Info;
  if (s == "debug") return LogLevel::Debug;
  return LogLevel::Warn;
}

void log(LogLevel level, const std::string& msg) {
  static const LogLevel threshold = log_level();
  static const char* names[] = {"error", "warn", "info", "debug"};
  if (level <= threshold) std::cerr << "mapbench [" << names[static_cast<int>(level)] << "] " << msg << '\n';
}

struct Globals {
  bool json = false;
  std::uint64_t seed = 0;
  unsigned jobs = 0;
};

struct MapArgs {
  std::string path;
  std::optional<double> resolution;
  int occ = 50;
  int free = 205;

  void add(CLI::App* cmd) {
    cmd->add_option("map", path, "Occupancy grid image (PGM or PNG)")->required()->check(CLI::ExistingFile);
    cmd->add_option("--resolution", resolution, "Metres per pixel (overrides the sidecar)")->check(CLI::PositiveNumber);
    cmd->add_option("--occ-thresh", occ, "Intensities <= this are occupied")->check(CLI::Range(0, 255));
    cmd->add_option("--free-thresh", free, "Intensities >= this are free")->check(CLI::Range(0, 255));
  }

  GridMap load() const {
    MapMeta meta;
    meta.resolution = resolution;
    meta.occ_thresh = occ;
    meta.free_thresh = free;
    return load_gridmap(path, meta);
  }
};

struct SensorArgs {
  double fov_deg = 270.0;
  double angular_res_deg = 0.5;
  double range = 30.0;
  double rotation_min_dist = 0.5;

  void add(CLI::App* cmd) {
    cmd->add_option("--fov", fov_deg, "Sensor field of view (degrees)")->check(CLI::Range(0.0, 360.0));
    cmd->add_option("--angular-res", angular_res_deg, "Sensor angular resolution (degrees)")->check(CLI::PositiveNumber);
    cmd->add_option("--range", range, "Sensor range (m)")->check(CLI::PositiveNumber);
    cmd->add_option("--rotation-min-dist", rotation_min_dist, "Shorter moves add no rotation (m)")->check(CLI::NonNegativeNumber);
  }

  SensorConfig sensor() const { return {deg_to_rad(fov_deg), deg_to_rad(angular_res_deg), range}; }
};

struct VoronoiArgs {
  VoronoiParams p;
  void add(CLI::App* cmd) {
    cmd->add_option("--ridge-tol", p.ridge_tolerance_px, "Equidistance tolerance for ridge pixels (px)")->check(CLI::NonNegativeNumber);
    cmd->add_option("--collinear-tol", p.collinear_tolerance_px, "Pass-through node tolerance (px)")->check(CLI::NonNegativeNumber);
    cmd->add_option("--min-spur", p.min_spur_px, "Prune skeleton spurs shorter than this (px)")->check(CLI::NonNegativeNumber);
    cmd->add_option("--dilation", p.dilation_kernel, "Odd dilation kernel size (px)")->check(CLI::PositiveNumber);
    cmd->add_option("--site-sep", p.site_separation_px, "Minimum separation of distinct obstacle sites (px)")->check(CLI::NonNegativeNumber);
    cmd->add_option("--thinning", p.thinning, "lu-wang|zhang-suen")
        ->transform(CLI::CheckedTransformer(std::map<std::string, ThinningRule>{
            {"lu-wang", ThinningRule::LuWang}, {"zhang-suen", ThinningRule::ZhangSuen}}));
  }
};

struct PolicyArgs {
  SamplingPolicy p;
  std::string mode = "absolute";
  bool exhaustive = false;

  void add(CLI::App* cmd) {
    cmd->add_option("--confidence", p.confidence, "Confidence level in (0,1)");
    cmd->add_option("--margin-t", p.margin_t, "Translational error margin (m)")->check(CLI::PositiveNumber);
    cmd->add_option("--margin-r", p.margin_r, "Rotational error margin (rad)")->check(CLI::PositiveNumber);
    cmd->add_option("--pilot", p.pilot_pairs, "Pilot sample size (pairs)");
    cmd->add_option("--pilot-runs", p.pilot_runs, "Pilot run count");
    cmd->add_option("--mode", mode, "absolute|squared")->check(CLI::IsMember({"absolute", "squared"}));
  }

  SamplingPolicy policy(std::uint64_t seed) const {
    SamplingPolicy out = p;
    out.seed = seed;
    out.mode = parse_error_mode(mode);
    out.check();
    return out;
  }
};

std::optional<Pose2> parse_pose(const std::string& s) {
  if (s.empty()) return std::nullopt;
  std::vector<double> v;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ',')) v.push_back(parse_double(tok, "--start"));
  if (v.size() != 2 && v.size() != 3) throw CLI::ValidationError("--start", "expected x,y[,theta]");
  return Pose2{v[0], v[1], v.size() == 3 ? v[2] : 0.0};
}

std::vector<Target> targets_from(const std::string& target, bool all) {
  if (all) return {kAllTargets.begin(), kAllTargets.end()};
  return {parse_target(target)};
}

std::string fixed(double v, int prec = 6) {
  std::ostringstream ss;
  ss << std::setprecision(prec) << v;
  return ss.str();
}

void print(const Globals& g, const json& j, const std::string& human) {
  if (g.json) std::cout << j.dump(2) << '\n';
  else std::cout << human;
}

// --- commands ------------------------------------------------------------------

void cmd_map_info(const Globals& g, const MapArgs& a) {
  const GridMap map = a.load();
  json j = {{"width", map.width()},
            {"height", map.height()},
            {"resolution", map.resolution()},
            {"free", map.count(CellState::Free)},
            {"occupied", map.count(CellState::Occupied)},
            {"unknown", map.count(CellState::Unknown)}};
  std::ostringstream h;
  h << "size        " << map.width() << " x " << map.height() << " px\n"
    << "resolution  " << map.resolution() << " m/px\n"
    << "cells       free " << map.count(CellState::Free) << ", occupied " << map.count(CellState::Occupied)
    << ", unknown " << map.count(CellState::Unknown) << '\n';
  try {
    const BoundaryInfo b = building_boundary(map);
    const double res = map.resolution();
    const double area = static_cast<double>(traversable(map, b.mask).count()) * res * res;
    j["boundary"] = true;
    j["area_m2"] = area;
    j["perimeter_m"] = static_cast<double>(b.contour.length()) * res;
    h << "interior    " << fixed(area) << " m^2, perimeter " << fixed(b.contour.length() * res) << " m\n";
  } catch (const NoBoundaryError& e) {
    j["boundary"] = false;
    h << "interior    none (" << e.what() << ")\n";
  }
  print(g, j, h.str());
}

void cmd_voronoi(const Globals& g, const MapArgs& a, const VoronoiArgs& v, const std::string& out,
                 const std::string& debug_png) {
  const GridMap map = a.load();
  const Skeleton sk = build_voronoi(map, v.p);
  const json gj = to_json(sk.graph, map, v.p);
  if (!out.empty()) write_json_file(out, gj);
  if (!debug_png.empty()) {
    GrayImage img = render(map);
    for (int r = 0; r < map.height(); ++r)
      for (int c = 0; c < map.width(); ++c)
        if (sk.skeleton.get(r, c)) img.at(r, c) = 180;
    for (const auto& n : sk.graph.nodes) img.at(n.row, n.col) = 64;
    write_raster(debug_png, img);
  }
  json j = {{"nodes", sk.graph.node_count()},
            {"edges", sk.graph.edge_count()},
            {"skeleton_px", sk.skeleton.count()},
            {"components", component_count(sk.graph)}};
  if (out.empty()) j["graph"] = gj;
  std::ostringstream h;
  h << "skeleton  " << sk.skeleton.count() << " px\n"
    << "graph     " << sk.graph.node_count() << " nodes, " << sk.graph.edge_count() << " edges, "
    << component_count(sk.graph) << " component(s)\n";
  if (!out.empty()) h << "wrote     " << out << '\n';
  print(g, j, h.str());
}

void cmd_features(const Globals& g, const MapArgs& a, const SensorArgs& s, const VoronoiArgs& v,
                  const std::string& start, bool trace, const std::string& out) {
  const GridMap map = a.load();
  FeatureOptions opt;
  opt.sensor = s.sensor();
  opt.traversal.rotation_min_dist = s.rotation_min_dist;
  opt.voronoi = v.p;
  opt.start = parse_pose(start);
  const FeatureExtraction fx = extract_features_full(map, opt);
  json j = to_json(fx.features);
  j["start"] = {{"x", fx.start.x}, {"y", fx.start.y}, {"theta", fx.start.theta}};
  j["sensor"] = to_json(opt.sensor);
  if (trace) j["trace"] = trace_json(fx.traversal);
  if (!out.empty()) write_json_file(out, j);
  std::ostringstream h;
  h << "VTD        " << fixed(fx.features.vtd_m) << " m\n"
    << "VTR        " << fixed(fx.features.vtr_rad) << " rad\n"
    << "area       " << fixed(fx.features.area_m2) << " m^2\n"
    << "perimeter  " << fixed(fx.features.perimeter_m) << " m\n"
    << "graph      " << fx.features.node_count << " nodes, " << fx.features.edge_count << " edges\n";
  print(g, j, h.str());
}

void cmd_eval_run(const Globals& g, const std::string& path, const PolicyArgs& pa) {
  const RunLog run = load_run_csv(path);
  const SamplingPolicy p = pa.policy(g.seed);
  const RunError e = pa.exhaustive ? localization_error(run, all_relations(run), p.mode) : evaluate_run(run, p);
  json j = to_json(e);
  j["id"] = run.id;
  j["poses"] = run.size();
  j["policy"] = to_json(p);
  std::ostringstream h;
  h << run.id << ": eps_t " << fixed(e.eps_t) << " m, eps_r " << fixed(e.eps_r) << " rad over " << e.n
    << " relations (" << to_string(e.mode) << ")\n";
  print(g, j, h.str());
}

void cmd_eval_env(const Globals& g, const std::vector<std::string>& paths, const PolicyArgs& pa) {
  const SamplingPolicy p = pa.policy(g.seed);
  std::vector<RunError> errs;
  json runs = json::array();
  std::ostringstream h;
  for (const auto& path : paths) {
    const RunLog run = load_run_csv(path);
    SamplingPolicy rp = p;
    rp.seed = mix_seed(g.seed, run.id);
    errs.push_back(evaluate_run(run, rp));
    json rj = to_json(errs.back());
    rj["id"] = run.id;
    runs.push_back(rj);
    h << std::left << std::setw(24) << run.id << " eps_t " << fixed(errs.back().eps_t) << "  eps_r "
      << fixed(errs.back().eps_r) << '\n';
  }
  const PerformanceVector pv = aggregate(errs);
  json j = {{"performance", to_json(pv)}, {"runs", runs}};
  h << "mean eps_t " << fixed(pv.mean_eps_t) << " m, std " << fixed(pv.std_eps_t) << '\n'
    << "mean eps_r " << fixed(pv.mean_eps_r) << " rad, std " << fixed(pv.std_eps_r) << '\n';
  if (errs.size() >= p.pilot_runs) {
    const RunCountEstimate rc = estimate_run_count(errs, p);
    j["run_count"] = {{"performed", rc.performed}, {"required", rc.required}, {"satisfied", rc.satisfied}};
    h << "runs       " << rc.performed << " performed, " << rc.required << " required"
      << (rc.satisfied ? "" : " (" + std::to_string(rc.additional()) + " more needed)") << '\n';
  } else {
    h << "runs       " << errs.size() << " (fewer than the " << p.pilot_runs << "-run pilot; no run-count estimate)\n";
  }
  print(g, j, h.str());
}

struct FitArgs {
  std::string dataset;
  std::string model = "ols";
  std::string target = "mean_eps_t";
  bool all_targets = false;
  std::vector<std::string> features{"vtd_m"};
  std::size_t select = 0;
  std::size_t k = 5;
  double l1 = 0.0, l2 = 0.0;
  bool gp_optimize = false;
  std::string out;
};

void cmd_fit(const Globals& g, const FitArgs& a) {
  const Dataset data = load_dataset_csv(a.dataset);
  json results = json::array();
  std::ostringstream h;
  h << std::left << std::setw(12) << "target" << std::setw(28) << "features" << std::setw(10) << "R2" << std::setw(12)
    << "RMSE" << "NRMSE\n";
  for (const Target t : targets_from(a.target, a.all_targets)) {
    ModelSpec spec;
    spec.kind = parse_model_kind(a.model);
    spec.features = a.select > 0 ? f_select(data, t, a.select) : a.features;
    spec.enet.l1 = a.l1;
    spec.enet.l2 = a.l2;
    spec.gp.optimize = a.gp_optimize;
    const std::size_t k = effective_folds(data.size(), a.k);
    const CVReport cv = kfold_cv(data, t, spec, k, g.seed);
    const Model m = fit_model(data, t, spec);
    TrainingMeta meta{g.seed, k, utc_date(), data.size(), cv};
    const json mj = to_json(m, meta);
    if (!a.out.empty()) {
      const fs::path out = a.all_targets || fs::is_directory(a.out) ? fs::path(a.out) / (std::string(to_string(t)) + ".json")
                                                                    : fs::path(a.out);
      write_json_file(out, mj);
      log(LogLevel::Info, "wrote " + out.string());
    }
    json r = {{"target", to_string(t)}, {"features", spec.features}, {"r2", cv.r2}, {"rmse", cv.rmse},
              {"nrmse", cv.nrmse},      {"k", k},                     {"model", mj}};
    results.push_back(r);
    std::string fl;
    for (const auto& f : spec.features) fl += (fl.empty() ? "" : ",") + f;
    h << std::setw(12) << to_string(t) << std::setw(28) << fl << std::setw(10) << fixed(cv.r2, 4) << std::setw(12)
      << fixed(cv.rmse, 4) << fixed(100.0 * cv.nrmse, 4) << "%\n";
  }
  print(g, results, h.str());
}

void cmd_predict(const Globals& g, const std::vector<std::string>& model_paths, const std::string& features_file,
                 const std::vector<std::string>& assignments, std::optional<double> vtd) {
  FeatureMap fm;
  if (!features_file.empty()) fm = feature_map_from_json(read_json_file(features_file));
  if (vtd) fm["vtd_m"] = *vtd;
  for (const auto& kv : assignments) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw CLI::ValidationError("--feature", "expected name=value, got '" + kv + "'");
    fm[kv.substr(0, eq)] = parse_double(kv.substr(eq + 1), "--feature " + kv.substr(0, eq));
  }
  json j = json::object();
  std::ostringstream h;
  for (const auto& p : model_paths) {
    const Model m = load_model(p);
    const Prediction pr = predict(m, fm);
    j[to_string(pr.target)] = pr.value;
    h << std::left << std::setw(12) << to_string(pr.target) << std::setprecision(10) << pr.value << '\n';
  }
  print(g, j, h.str());
}

void cmd_report(const Globals& g, const std::string& dataset, const std::string& target, bool all, std::size_t k,
                const std::string& out) {
  const Dataset data = load_dataset_csv(dataset);
  const auto rows = best_single_feature_report(data, targets_from(target, all), k, g.seed);
  const std::string csv = report_csv(rows);
  if (!out.empty()) write_text_if_changed(out, csv);
  json j = json::array();
  for (const auto& r : rows) {
    j.push_back({{"target", to_string(r.target)}, {"feature", r.feature}, {"r2", r.r2}, {"rmse", r.rmse},
                 {"nrmse", r.nrmse}, {"slope", r.slope}, {"intercept", r.intercept}, {"k", r.k}});
  }
  print(g, j, csv);
}

void cmd_validate(const Globals& g, const std::string& path) {
  const Manifest m = validate_manifest(path);
  std::size_t runs = 0;
  for (const auto& e : m.environments) runs += e.runs.size();
  json j = {{"valid", true}, {"environments", m.environments.size()}, {"runs", runs}};
  print(g, j, path + ": valid (" + std::to_string(m.environments.size()) + " environments, " + std::to_string(runs) + " runs)\n");
}

int cmd_run(const Globals& g, const std::string& manifest, PipelineOptions opt) {
  opt.seed = g.seed;
  opt.jobs = g.jobs;
  const PipelineSummary s = run_pipeline(manifest, opt);
  std::ostringstream h;
  h << std::left << std::setw(24) << "environment" << std::setw(12) << "features" << std::setw(12) << "eval" << "message\n";
  for (const auto& e : s.envs)
    h << std::setw(24) << e.id << std::setw(12) << to_string(e.features) << std::setw(12) << to_string(e.eval) << e.message
      << '\n';
  for (const auto& e : s.errors) h << "error: " << e << '\n';
  h << s.written.size() << " file(s) updated, " << s.dataset_rows << " dataset row(s)\n";
  print(g, to_json(s), h.str());
  for (const auto& e : s.envs)
    if (e.failed()) log(LogLevel::Error, e.id + ": " + e.message);
  for (const auto& e : s.errors) log(LogLevel::Error, e);
  return s.ok() ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"mapbench: SLAM localization-error benchmarking and prediction from floor plans"};
  app.require_subcommand(1);
  app.set_config("--config", "", "Read options from a key=value (TOML-style) file");
  Globals g;
  app.add_flag("--json", g.json, "Machine-readable JSON on stdout");
  app.add_option("--seed", g.seed, "Seed for every stochastic stage");
  app.add_option("--jobs", g.jobs, "Worker threads (0: logical core count)");

  int rc = 0;

  MapArgs info_map;
  auto* info = app.add_subcommand("map-info", "Summarize an occupancy grid");
  info_map.add(info);
  info->callback([&] { cmd_map_info(g, info_map); });

  MapArgs vor_map;
  VoronoiArgs vor_args;
  std::string vor_out, vor_png;
  auto* vor = app.add_subcommand("voronoi", "Build the sparsified Voronoi graph of a floor plan");
  vor_map.add(vor);
  vor_args.add(vor);
  vor->add_option("--out", vor_out, "Graph JSON output");
  vor->add_option("--debug-png", vor_png, "Overlay image of skeleton and nodes");
  vor->callback([&] { cmd_voronoi(g, vor_map, vor_args, vor_out, vor_png); });

  MapArgs feat_map;
  SensorArgs feat_sensor;
  VoronoiArgs feat_vor;
  std::string feat_start, feat_out;
  bool feat_trace = false;
  auto* feat = app.add_subcommand("features", "Compute VTD, VTR and structural features of a floor plan");
  feat_map.add(feat);
  feat_sensor.add(feat);
  feat_vor.add(feat);
  feat->add_option("--start", feat_start, "Start pose x,y[,theta] in metres/radians (default: interior centroid)");
  feat->add_flag("--trace", feat_trace, "Include the traversal legs in the output");
  feat->add_option("--out", feat_out, "Features JSON output");
  feat->callback([&] { cmd_features(g, feat_map, feat_sensor, feat_vor, feat_start, feat_trace, feat_out); });

  std::string er_path;
  PolicyArgs er_policy;
  auto* er = app.add_subcommand("eval-run", "Localization error of one run log");
  er->add_option("run", er_path, "Run log CSV")->required()->check(CLI::ExistingFile);
  er_policy.add(er);
  er->add_flag("--exhaustive", er_policy.exhaustive, "Use every pose pair instead of sampling");
  er->callback([&] { cmd_eval_run(g, er_path, er_policy); });

  std::vector<std::string> ee_paths;
  PolicyArgs ee_policy;
  auto* ee = app.add_subcommand("eval-env", "Performance vector of an environment from its run logs");
  ee->add_option("runs", ee_paths, "Run log CSVs")->required()->check(CLI::ExistingFile);
  ee_policy.add(ee);
  ee->callback([&] { cmd_eval_env(g, ee_paths, ee_policy); });

  FitArgs fa;
  auto* fit = app.add_subcommand("fit", "Fit and cross-validate a performance model");
  fit->add_option("dataset", fa.dataset, "Dataset CSV")->required()->check(CLI::ExistingFile);
  fit->add_option("--model", fa.model, "ols|enet|gp")->check(CLI::IsMember({"ols", "enet", "gp"}));
  fit->add_option("--target", fa.target, "mean_eps_t|std_eps_t|mean_eps_r|std_eps_r");
  fit->add_flag("--all-targets", fa.all_targets, "Fit one model per target");
  fit->add_option("--features", fa.features, "Feature columns")->delimiter(',');
  fit->add_option("--select", fa.select, "Keep the K features with the highest F-score");
  fit->add_option("--k", fa.k, "Cross-validation folds")->check(CLI::Range(2, 1000));
  fit->add_option("--l1", fa.l1, "ElasticNet L1 penalty")->check(CLI::NonNegativeNumber);
  fit->add_option("--l2", fa.l2, "ElasticNet L2 penalty")->check(CLI::NonNegativeNumber);
  fit->add_flag("--gp-optimize", fa.gp_optimize, "Grid-search GP hyperparameters by marginal likelihood");
  fit->add_option("--out", fa.out, "Model JSON file, or directory with --all-targets");
  fit->callback([&] { cmd_fit(g, fa); });

  std::vector<std::string> pr_models, pr_assign;
  std::string pr_file;
  std::optional<double> pr_vtd;
  auto* pr = app.add_subcommand("predict", "Apply fitted models to an environment's features");
  pr->add_option("models", pr_models, "Model JSON files")->required()->check(CLI::ExistingFile);
  pr->add_option("--features-file", pr_file, "features.json of the environment")->check(CLI::ExistingFile);
  pr->add_option("--vtd", pr_vtd, "VTD in metres");
  pr->add_option("--feature", pr_assign, "name=value (repeatable)");
  pr->callback([&] { cmd_predict(g, pr_models, pr_file, pr_assign, pr_vtd); });

  std::string rp_dataset, rp_target = "mean_eps_t", rp_out;
  bool rp_all = false;
  std::size_t rp_k = 5;
  auto* rp = app.add_subcommand("report", "Best single-feature linear model per target (CSV)");
  rp->add_option("dataset", rp_dataset, "Dataset CSV")->required()->check(CLI::ExistingFile);
  rp->add_option("--target", rp_target, "Target column");
  rp->add_flag("--all-targets", rp_all, "Report every target");
  rp->add_option("--k", rp_k, "Cross-validation folds")->check(CLI::Range(2, 1000));
  rp->add_option("--out", rp_out, "CSV output");
  rp->callback([&] { cmd_report(g, rp_dataset, rp_target, rp_all, rp_k, rp_out); });

  std::string va_path;
  auto* va = app.add_subcommand("validate", "Check a manifest");
  va->add_option("manifest", va_path, "manifest.json")->required();
  va->callback([&] { cmd_validate(g, va_path); });

  std::string run_manifest, run_out, run_model = "ols";
  std::vector<std::string> run_stages;
  PipelineOptions run_opt;
  SensorArgs run_sensor;
  PolicyArgs run_policy;
  auto* run = app.add_subcommand("run", "Run the batch pipeline over a manifest");
  run->add_option("manifest", run_manifest, "manifest.json")->required()->check(CLI::ExistingFile);
  run->add_option("--stages", run_stages, "features,eval,fit,predict")->delimiter(',');
  run->add_option("--out", run_out, "Output directory (default: <manifest dir>/out)");
  run->add_option("--model", run_model, "ols|enet|gp")->check(CLI::IsMember({"ols", "enet", "gp"}));
  run->add_option("--features", run_opt.model.features, "Model feature columns")->delimiter(',');
  run->add_option("--k", run_opt.k, "Cross-validation folds")->check(CLI::Range(2, 1000));
  run->add_flag("--force", run_opt.force, "Recompute even when inputs are unchanged");
  run_sensor.add(run);
  run_policy.add(run);
  run->callback([&] {
    if (!run_stages.empty()) {
      run_opt.stages.clear();
      for (const auto& s : run_stages) run_opt.stages.insert(parse_stage(s));
    }
    run_opt.out_dir = run_out;
    run_opt.model.kind = parse_model_kind(run_model);
    run_opt.features.sensor = run_sensor.sensor();
    run_opt.features.traversal.rotation_min_dist = run_sensor.rotation_min_dist;
    run_opt.policy = run_policy.policy(g.seed);
    rc = cmd_run(g, run_manifest, run_opt);
  });

  std::string sy_dir;
  std::size_t sy_runs = 3;
  auto* sy = app.add_subcommand("synth", "Write the synthetic fixture set (maps, run logs, manifest)");
  sy->add_option("dir", sy_dir, "Output directory")->required();
  sy->add_option("--runs", sy_runs, "Run logs per environment")->check(CLI::PositiveNumber);
  sy->callback([&] {
    const fs::path m = synth::write_fixture_set(sy_dir, g.seed, sy_runs);
    print(g, json{{"manifest", m.string()}}, "wrote " + m.string() + "\n");
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  } catch (const mapbench::Error& e) {
    log(LogLevel::Error, e.what());
    if (g.json) std::cout << json{{"error", e.what()}}.dump() << '\n';
    return 1;
  } catch (const std::exception& e) {
    log(LogLevel::Error, std::string("internal error: ") + e.what());
    return 1;
  }
  return rc;
}
