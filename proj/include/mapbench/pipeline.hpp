#pragma once

// Batch orchestration over a manifest: features -> eval -> fit -> predict.
// Workers compute per-environment results from immutable inputs; only the
// orchestrating thread touches the output directory.

#include <algorithm>
#include <atomic>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "mapbench/datastore.hpp"
#include "mapbench/features.hpp"
#include "mapbench/json_io.hpp"
#include "mapbench/models.hpp"
#include "mapbench/trajectory.hpp"

namespace mapbench {

enum class Stage { Features, Eval, Fit, Predict };

inline const char* to_string(Stage s) {
  switch (s) {
    case Stage::Features: return "features";
    case Stage::Eval: return "eval";
    case Stage::Fit: return "fit";
    case Stage::Predict: return "predict";
  }
  return "?";
}

inline Stage parse_stage(const std::string& s) {
  for (const Stage st : {Stage::Features, Stage::Eval, Stage::Fit, Stage::Predict})
    if (s == to_string(st)) return st;
  throw ValidationError("unknown stage '" + s + "' (expected features|eval|fit|predict)");
}

// --- hashing ------------------------------------------------------------------

/// 64-bit FNV-1a, chainable through `h`.
inline std::uint64_t fnv1a(std::string_view data, std::uint64_t h = 14695981039346656037ULL) {
  for (const unsigned char c : data) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

inline std::uint64_t fnv1a_file(const std::filesystem::path& path, std::uint64_t h = 14695981039346656037ULL) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read '" + path.string() + "'");
  char buf[1 << 16];
  while (in.read(buf, sizeof buf) || in.gcount() > 0) h = fnv1a(std::string_view(buf, static_cast<std::size_t>(in.gcount())), h);
  return h;
}

inline std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

/// splitmix64 finaliser; derives independent stream seeds from one master seed.
inline std::uint64_t mix_seed(std::uint64_t seed, std::string_view salt) {
  std::uint64_t z = seed ^ fnv1a(salt);
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// --- options and results ------------------------------------------------------

struct PipelineOptions {
  std::set<Stage> stages{Stage::Features, Stage::Eval, Stage::Fit, Stage::Predict};
  unsigned jobs = 0;  // 0: logical core count
  std::uint64_t seed = 0;
  SamplingPolicy policy;
  FeatureOptions features;
  ModelSpec model;
  std::size_t k = 5;
  std::filesystem::path out_dir;  // default: <manifest dir>/out
  bool force = false;
};

enum class StepStatus { NotRun, Computed, Cached, Skipped, Failed };

inline const char* to_string(StepStatus s) {
  switch (s) {
    case StepStatus::NotRun: return "not-run";
    case StepStatus::Computed: return "computed";
    case StepStatus::Cached: return "cached";
    case StepStatus::Skipped: return "skipped";
    case StepStatus::Failed: return "failed";
  }
  return "?";
}

struct EnvStatus {
  std::string id;
  StepStatus features = StepStatus::NotRun;
  StepStatus eval = StepStatus::NotRun;
  std::string message;
  bool failed() const { return features == StepStatus::Failed || eval == StepStatus::Failed; }
};

struct ReportRow {
  Target target;
  std::string feature;
  double r2, rmse, nrmse, slope, intercept;
  std::size_t k;
};

struct PipelineSummary {
  std::vector<EnvStatus> envs;
  std::vector<std::string> written;  // files whose content changed
  std::vector<std::string> errors;   // non-environment failures (fit, predict)
  std::size_t dataset_rows = 0;
  std::vector<ReportRow> report;

  bool ok() const {
    return errors.empty() && std::none_of(envs.begin(), envs.end(), [](const EnvStatus& e) { return e.failed(); });
  }
};

inline json to_json(const PipelineSummary& s) {
  json envs = json::array();
  for (const auto& e : s.envs) {
    json j = {{"id", e.id}, {"features", to_string(e.features)}, {"eval", to_string(e.eval)}};
    if (!e.message.empty()) j["message"] = e.message;
    envs.push_back(j);
  }
  return {{"ok", s.ok()},     {"environments", envs}, {"written", s.written},
          {"errors", s.errors}, {"dataset_rows", s.dataset_rows}};
}

namespace detail {

struct EnvWork {
  EnvStatus status;
  std::optional<json> features_json;  // freshly computed
  std::optional<json> graph_json;
  std::optional<json> performance_json;
  std::string features_hash;
  std::string eval_hash;
};

inline std::string features_input_hash(const Manifest& m, const EnvironmentRecord& e, const FeatureOptions& fo) {
  const auto map_path = m.resolve(e.map);
  std::uint64_t h = fnv1a_file(map_path);
  if (const auto side = find_sidecar(map_path)) h = fnv1a_file(*side, h);
  json params = {{"sensor", to_json(fo.sensor)},
                 {"rotation_min_dist", fo.traversal.rotation_min_dist},
                 {"ridge", fo.voronoi.ridge_tolerance_px},
                 {"separation", fo.voronoi.site_separation_px},
                 {"thinning", to_string(fo.voronoi.thinning)},
                 {"collinear", fo.voronoi.collinear_tolerance_px},
                 {"spur", fo.voronoi.min_spur_px},
                 {"kernel", fo.voronoi.dilation_kernel},
                 {"version", kToolkitVersion}};
  if (e.resolution) params["resolution"] = *e.resolution;
  if (e.start) params["start"] = {e.start->x, e.start->y, e.start->theta};
  return hex64(fnv1a(params.dump(), h));
}

inline std::string eval_input_hash(const Manifest& m, const EnvironmentRecord& e, const SamplingPolicy& p) {
  std::uint64_t h = fnv1a(to_json(p).dump());
  h = fnv1a(kToolkitVersion, h);
  for (const auto& r : e.runs) {
    h = fnv1a(r, h);
    h = fnv1a_file(m.resolve(r), h);
  }
  return hex64(h);
}

inline json compute_features(const Manifest& m, const EnvironmentRecord& e, FeatureOptions fo, json& graph) {
  const GridMap map = load_environment_map(m, e);
  if (e.start) fo.start = *e.start;
  const FeatureExtraction fx = extract_features_full(map, fo);
  json j = to_json(fx.features);
  j["start"] = {{"x", fx.start.x}, {"y", fx.start.y}, {"theta", fx.start.theta}};
  j["sensor"] = to_json(fo.sensor);
  graph = to_json(fx.skeleton.graph, map, fo.voronoi);
  return j;
}

inline json compute_performance(const Manifest& m, const EnvironmentRecord& e, SamplingPolicy policy,
                                 std::uint64_t master_seed) {
  std::vector<RunError> errors;
  json runs = json::array();
  for (const RunLog& run : load_runs(m, e)) {
    policy.seed = mix_seed(master_seed, e.id + "/" + run.id);
    const RunError err = evaluate_run(run, policy);
    json rj = to_json(err);
    rj["id"] = run.id;
    rj["seed"] = policy.seed;
    runs.push_back(rj);
    errors.push_back(err);
  }
  policy.seed = master_seed;
  json j = {{"performance", to_json(aggregate(errors))}, {"runs", runs}, {"policy", to_json(policy)}};
  if (errors.size() >= policy.pilot_runs) {
    const RunCountEstimate rc = estimate_run_count(errors, policy);
    j["run_count"] = {{"performed", rc.performed}, {"required", rc.required}, {"satisfied", rc.satisfied}};
  }
  return j;
}

/// Runs `fn(i)` for i in [0, n) on up to `jobs` threads; each call writes only its own slot.
inline void parallel_for(std::size_t n, unsigned jobs, const std::function<void(std::size_t)>& fn) {
  if (jobs == 0) jobs = std::max(1u, std::thread::hardware_concurrency());
  jobs = static_cast<unsigned>(std::min<std::size_t>(jobs, std::max<std::size_t>(n, 1)));
  if (jobs <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  for (unsigned t = 0; t < jobs; ++t)
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) fn(i);
    });
  for (auto& th : pool) th.join();
}

inline std::optional<json> read_json_if_exists(const std::filesystem::path& p) {
  if (!std::filesystem::exists(p)) return std::nullopt;
  try {
    return read_json_file(p);
  } catch (const Error&) {
    return std::nullopt;
  }
}

}  // namespace detail

/// Best single-feature OLS model per target by cross-validated R^2 (ties: first feature by name).
inline std::vector<ReportRow> best_single_feature_report(const Dataset& data, const std::vector<Target>& targets,
                                                         std::size_t k, std::uint64_t seed) {
  std::vector<ReportRow> out;
  const std::size_t k_eff = effective_folds(data.size(), k);
  for (const Target t : targets) {
    std::optional<ReportRow> best;
    for (const auto& f : data.feature_names) {
      ModelSpec spec;
      spec.features = {f};
      try {
        const CVReport cv = kfold_cv(data, t, spec, k_eff, seed);
        if (!best || cv.r2 > best->r2) {
          const LinearModel lm = fit_ols(data, t, {f});
          best = ReportRow{t, f, cv.r2, cv.rmse, cv.nrmse, lm.coefficients[0], lm.intercept, k_eff};
        }
      } catch (const SingularDesignError&) {
        // constant feature on this data; cannot be a predictor
      }
    }
    if (best) out.push_back(*best);
  }
  return out;
}

inline std::string report_csv(const std::vector<ReportRow>& rows) {
  std::ostringstream ss;
  ss << "target,feature,r2,rmse,nrmse,slope,intercept,k\n";
  for (const auto& r : rows) {
    ss << to_string(r.target) << ',' << r.feature << ',' << format_double(r.r2) << ',' << format_double(r.rmse) << ','
       << format_double(r.nrmse) << ',' << format_double(r.slope) << ',' << format_double(r.intercept) << ',' << r.k
       << '\n';
  }
  return ss.str();
}

inline PipelineSummary run_pipeline(const std::filesystem::path& manifest_path, const PipelineOptions& opt) {
  namespace fs = std::filesystem;
  const Manifest manifest = validate_manifest(manifest_path);
  ManifestLock lock(manifest_path);
  const fs::path out = opt.out_dir.empty() ? manifest.base_dir / "out" : opt.out_dir;
  const fs::path state_path = out / "state.json";
  const json state = detail::read_json_if_exists(state_path).value_or(json::object());

  PipelineSummary summary;
  auto write = [&](const fs::path& p, const std::string& text) {
    if (write_text_if_changed(p, text)) summary.written.push_back(fs::relative(p, out).generic_string());
  };
  auto has = [&](Stage s) { return opt.stages.count(s) > 0; };

  const auto& envs = manifest.environments;
  std::vector<detail::EnvWork> work(envs.size());

  detail::parallel_for(envs.size(), opt.jobs, [&](std::size_t i) {
    const EnvironmentRecord& e = envs[i];
    detail::EnvWork& w = work[i];
    w.status.id = e.id;
    const fs::path env_dir = out / "envs" / e.id;
    const json prev = state.contains(e.id) ? state[e.id] : json::object();

    if (has(Stage::Features)) {
      try {
        w.features_hash = detail::features_input_hash(manifest, e, opt.features);
        if (!opt.force && prev.value("features_hash", "") == w.features_hash && fs::exists(env_dir / "features.json")) {
          w.status.features = StepStatus::Cached;
        } else {
          json graph;
          w.features_json = detail::compute_features(manifest, e, opt.features, graph);
          w.graph_json = std::move(graph);
          w.status.features = StepStatus::Computed;
        }
      } catch (const std::exception& ex) {
        w.status.features = StepStatus::Failed;
        w.status.message = std::string("features: ") + ex.what();
      }
    }
    if (has(Stage::Eval)) {
      if (e.runs.empty()) {
        w.status.eval = StepStatus::Skipped;
      } else {
        try {
          SamplingPolicy p = opt.policy;
          p.seed = opt.seed;
          w.eval_hash = detail::eval_input_hash(manifest, e, p);
          if (!opt.force && prev.value("eval_hash", "") == w.eval_hash && fs::exists(env_dir / "performance.json")) {
            w.status.eval = StepStatus::Cached;
          } else {
            w.performance_json = detail::compute_performance(manifest, e, p, opt.seed);
            w.status.eval = StepStatus::Computed;
          }
        } catch (const std::exception& ex) {
          w.status.eval = StepStatus::Failed;
          w.status.message += (w.status.message.empty() ? "" : "; ") + std::string("eval: ") + ex.what();
        }
      }
    }
  });

  // Orchestrator: persist per-environment artifacts and the staleness state.
  json new_state = state.is_object() ? state : json::object();
  Manifest resolved = manifest;
  for (std::size_t i = 0; i < envs.size(); ++i) {
    detail::EnvWork& w = work[i];
    const fs::path env_dir = out / "envs" / envs[i].id;
    if (w.features_json) {
      write(env_dir / "features.json", w.features_json->dump(2) + "\n");
      write(env_dir / "graph.json", w.graph_json->dump(2) + "\n");
    }
    if (w.performance_json) write(env_dir / "performance.json", w.performance_json->dump(2) + "\n");
    json& st = new_state[envs[i].id];
    if (!st.is_object()) st = json::object();
    if (w.status.features == StepStatus::Computed) st["features_hash"] = w.features_hash;
    if (w.status.features == StepStatus::Failed) st.erase("features_hash");
    if (w.status.eval == StepStatus::Computed) st["eval_hash"] = w.eval_hash;
    if (w.status.eval == StepStatus::Failed) st.erase("eval_hash");

    EnvironmentRecord& rec = resolved.environments[i];
    if (w.status.features != StepStatus::Failed)
      if (const auto fj = detail::read_json_if_exists(env_dir / "features.json")) rec.features = feature_map_from_json(*fj);
    if (w.status.eval != StepStatus::Failed)
      if (const auto pj = detail::read_json_if_exists(env_dir / "performance.json"))
        rec.performance = performance_from_json(pj->at("performance"));
    summary.envs.push_back(w.status);
  }
  write(state_path, new_state.dump(2) + "\n");

  if (!has(Stage::Fit) && !has(Stage::Predict)) return summary;

  // Training rows: environments that have both features and a performance vector.
  Manifest training = resolved;
  std::erase_if(training.environments, [&](const EnvironmentRecord& e) {
    const auto it = std::find_if(summary.envs.begin(), summary.envs.end(), [&](auto& s) { return s.id == e.id; });
    return !e.features || !e.performance || it->failed();
  });

  std::vector<Model> models;
  if (has(Stage::Fit)) {
    try {
      const Dataset data = assemble_dataset(training);
      summary.dataset_rows = data.size();
      write(out / "dataset.csv", dataset_csv(data));
      if (data.size() < 3) throw ValidationError("fit needs at least 3 complete environments, have " + std::to_string(data.size()));
      const std::size_t k_eff = effective_folds(data.size(), opt.k);
      for (const Target t : kAllTargets) {
        const Model model = fit_model(data, t, opt.model);
        TrainingMeta meta;
        meta.seed = opt.seed;
        meta.k = k_eff;
        meta.date = manifest.created;
        meta.rows = data.size();
        meta.cv = kfold_cv(data, t, opt.model, k_eff, opt.seed);
        write(out / "models" / (std::string(to_string(t)) + ".json"), to_json(model, meta).dump(2) + "\n");
        models.push_back(model);
      }
      summary.report = best_single_feature_report(data, {kAllTargets.begin(), kAllTargets.end()}, opt.k, opt.seed);
      write(out / "report.csv", report_csv(summary.report));
    } catch (const Error& ex) {
      summary.errors.push_back(std::string("fit: ") + ex.what());
      models.clear();
    }
  }

  if (has(Stage::Predict)) {
    try {
      if (models.empty()) {
        for (const Target t : kAllTargets) models.push_back(load_model(out / "models" / (std::string(to_string(t)) + ".json")));
      }
      std::ostringstream ss;
      ss << "env_id";
      for (const Target t : kAllTargets) ss << ",pred_" << to_string(t);
      for (const Target t : kAllTargets) ss << ',' << to_string(t);
      ss << '\n';
      std::vector<const EnvironmentRecord*> recs;
      for (const auto& e : resolved.environments)
        if (e.features) recs.push_back(&e);
      std::sort(recs.begin(), recs.end(), [](auto* a, auto* b) { return a->id < b->id; });
      for (const auto* e : recs) {
        const auto pred = predict_performance(models, *e->features);
        ss << e->id;
        for (const double v : pred) ss << ',' << format_double(v);
        if (e->performance) {
          const auto& p = *e->performance;
          for (const double v : {p.mean_eps_t, p.std_eps_t, p.mean_eps_r, p.std_eps_r}) ss << ',' << format_double(v);
        } else {
          ss << ",,,,";
        }
        ss << '\n';
      }
      write(out / "predictions.csv", ss.str());
    } catch (const Error& ex) {
      summary.errors.push_back(std::string("predict: ") + ex.what());
    }
  }
  return summary;
}

}  // namespace mapbench
