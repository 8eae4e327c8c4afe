#pragma once

// Experiment manifest: the set of environments with their map, run logs and
// derived artifacts. Relative paths resolve against the manifest directory.

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <cstring>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "mapbench/dataset.hpp"
#include "mapbench/error.hpp"
#include "mapbench/features.hpp"
#include "mapbench/json_io.hpp"
#include "mapbench/trajectory.hpp"

namespace mapbench {

inline constexpr int kManifestSchemaVersion = 1;
inline constexpr const char* kToolkitVersion = "0.1.0";

struct EnvironmentRecord {
  std::string id;
  std::string map;                   // as written in the manifest
  std::optional<double> resolution;  // overrides the sidecar
  std::optional<Pose2> start;
  std::optional<FeatureMap> features;
  std::optional<PerformanceVector> performance;
  std::vector<std::string> runs;
  friend bool operator==(const EnvironmentRecord&, const EnvironmentRecord&) = default;
};

struct Manifest {
  int schema_version = kManifestSchemaVersion;
  std::string toolkit_version = kToolkitVersion;
  std::string created;
  std::vector<EnvironmentRecord> environments;
  std::filesystem::path base_dir;  // not serialized

  std::filesystem::path resolve(const std::string& p) const {
    const std::filesystem::path path(p);
    return path.is_absolute() ? path : base_dir / path;
  }

  const EnvironmentRecord& find(const std::string& id) const {
    for (const auto& e : environments)
      if (e.id == id) return e;
    throw ValidationError("manifest has no environment '" + id + "'");
  }
  EnvironmentRecord& find(const std::string& id) {
    return const_cast<EnvironmentRecord&>(std::as_const(*this).find(id));
  }

  friend bool operator==(const Manifest& a, const Manifest& b) {
    return a.schema_version == b.schema_version && a.toolkit_version == b.toolkit_version && a.created == b.created &&
           a.environments == b.environments;
  }
};

inline json to_json(const EnvironmentRecord& e) {
  json j = {{"id", e.id}, {"map", e.map}, {"runs", e.runs}};
  if (e.resolution) j["resolution"] = *e.resolution;
  if (e.start) j["start"] = {{"x", e.start->x}, {"y", e.start->y}, {"theta", e.start->theta}};
  if (e.features) j["features"] = *e.features;
  if (e.performance) j["performance"] = to_json(*e.performance);
  return j;
}

inline json to_json(const Manifest& m) {
  json envs = json::array();
  for (const auto& e : m.environments) envs.push_back(to_json(e));
  return {{"schema_version", m.schema_version},
          {"toolkit_version", m.toolkit_version},
          {"created", m.created},
          {"environments", envs}};
}

namespace detail {

/// Structural parse; appends problems to `errors` instead of throwing.
inline Manifest manifest_from_json(const json& j, std::vector<std::string>& errors) {
  Manifest m;
  if (!j.is_object()) {
    errors.push_back("schema mismatch: manifest must be a JSON object");
    return m;
  }
  if (!j.contains("schema_version")) {
    errors.push_back("schema mismatch: missing schema_version");
  } else if (!j["schema_version"].is_number_integer() || j["schema_version"].get<int>() != kManifestSchemaVersion) {
    errors.push_back("schema mismatch: schema_version " + j["schema_version"].dump() + " (expected " +
                     std::to_string(kManifestSchemaVersion) + ")");
  } else {
    m.schema_version = j["schema_version"].get<int>();
  }
  if (j.contains("toolkit_version") && j["toolkit_version"].is_string()) m.toolkit_version = j["toolkit_version"];
  if (j.contains("created") && j["created"].is_string()) m.created = j["created"];
  if (!j.contains("environments") || !j["environments"].is_array()) {
    errors.push_back("schema mismatch: 'environments' must be an array");
    return m;
  }
  std::size_t index = 0;
  for (const auto& ej : j["environments"]) {
    const std::string where = "environment #" + std::to_string(index++);
    try {
      EnvironmentRecord e;
      e.id = ej.at("id").get<std::string>();
      e.map = ej.at("map").get<std::string>();
      if (ej.contains("resolution")) e.resolution = ej["resolution"].get<double>();
      if (ej.contains("start")) {
        const auto& s = ej["start"];
        e.start = Pose2{s.at("x").get<double>(), s.at("y").get<double>(), s.value("theta", 0.0)};
      }
      if (ej.contains("features")) e.features = feature_map_from_json(ej["features"]);
      if (ej.contains("performance")) e.performance = performance_from_json(ej["performance"]);
      if (ej.contains("runs")) e.runs = ej["runs"].get<std::vector<std::string>>();
      m.environments.push_back(std::move(e));
    } catch (const json::exception& ex) {
      errors.push_back("schema mismatch in " + where + ": " + ex.what());
    }
  }
  return m;
}

inline std::string join_errors(const std::vector<std::string>& errors) {
  std::string out;
  for (const auto& e : errors) out += (out.empty() ? "" : "\n") + e;
  return out;
}

}  // namespace detail

/// Every problem found in one pass; empty when the manifest is valid. Reads only.
inline std::vector<std::string> manifest_problems(const Manifest& m) {
  std::vector<std::string> errors;
  std::set<std::string> ids;
  for (const auto& e : m.environments) {
    if (e.id.empty()) errors.push_back("environment with empty id");
    if (!ids.insert(e.id).second) errors.push_back("duplicate environment id '" + e.id + "'");
    if (e.resolution && !(*e.resolution > 0.0)) errors.push_back("environment '" + e.id + "': resolution must be > 0");
    if (!std::filesystem::exists(m.resolve(e.map))) {
      errors.push_back("environment '" + e.id + "': dangling map path '" + e.map + "'");
    }
    for (const auto& r : e.runs)
      if (!std::filesystem::exists(m.resolve(r))) {
        errors.push_back("environment '" + e.id + "': dangling run path '" + r + "'");
      }
  }
  return errors;
}

inline Manifest parse_manifest(const json& j, const std::filesystem::path& base_dir = ".") {
  std::vector<std::string> errors;
  Manifest m = detail::manifest_from_json(j, errors);
  m.base_dir = base_dir;
  if (!errors.empty()) throw ValidationError(detail::join_errors(errors));
  return m;
}

/// Parses and checks a manifest file; throws one ValidationError listing every problem.
inline Manifest validate_manifest(const std::filesystem::path& path) {
  const json j = read_json_file(path);
  std::vector<std::string> errors;
  Manifest m = detail::manifest_from_json(j, errors);
  m.base_dir = path.has_parent_path() ? path.parent_path() : std::filesystem::path(".");
  for (auto& e : manifest_problems(m)) errors.push_back(std::move(e));
  if (!errors.empty()) throw ValidationError(detail::join_errors(errors));
  return m;
}

inline GridMap load_environment_map(const Manifest& m, const EnvironmentRecord& e) {
  MapMeta meta;
  meta.resolution = e.resolution;
  return load_gridmap(m.resolve(e.map), meta);
}

inline std::vector<RunLog> load_runs(const Manifest& m, const EnvironmentRecord& e) {
  std::vector<RunLog> runs;
  runs.reserve(e.runs.size());
  for (const auto& r : e.runs) runs.push_back(load_run_csv(m.resolve(r)));
  return runs;
}

/// One row per environment in id order; every record must carry features and performance.
inline Dataset assemble_dataset(const Manifest& m) {
  std::vector<std::string> missing;
  for (const auto& e : m.environments) {
    std::vector<std::string> stages;
    if (!e.features) stages.emplace_back("features");
    if (!e.performance) stages.emplace_back("performance");
    if (!stages.empty()) {
      std::string s = "environment '" + e.id + "' is missing";
      for (const auto& st : stages) s += " " + st;
      missing.push_back(s);
    }
  }
  if (!missing.empty()) throw ValidationError("incomplete records:\n" + detail::join_errors(missing));

  std::vector<const EnvironmentRecord*> recs;
  for (const auto& e : m.environments) recs.push_back(&e);
  std::sort(recs.begin(), recs.end(), [](auto* a, auto* b) { return a->id < b->id; });

  Dataset d;
  // Columns are the features every record shares, in name order.
  if (!recs.empty()) {
    for (const auto& [name, v] : *recs.front()->features) {
      const bool shared = std::all_of(recs.begin(), recs.end(), [&](auto* r) { return r->features->count(name) > 0; });
      if (shared) d.feature_names.push_back(name);
    }
  }
  for (const auto* e : recs) {
    DatasetRow row;
    row.env_id = e->id;
    for (const auto& n : d.feature_names) row.features.push_back(e->features->at(n));
    const auto& p = *e->performance;
    row.targets = {p.mean_eps_t, p.std_eps_t, p.mean_eps_r, p.std_eps_r};
    d.rows.push_back(std::move(row));
  }
  d.check();
  return d;
}

/// Advisory writer lock: `<manifest>.lock` created exclusively, removed on destruction.
class ManifestLock {
 public:
  explicit ManifestLock(const std::filesystem::path& manifest) : path_(manifest.string() + ".lock") {
    fd_ = ::open(path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
    if (fd_ < 0) {
      if (errno == EEXIST) throw IoError("manifest is locked by another writer ('" + path_.string() + "' exists)");
      throw IoError("cannot create lock '" + path_.string() + "': " + std::strerror(errno));
    }
    const std::string pid = std::to_string(::getpid()) + "\n";
    [[maybe_unused]] const auto n = ::write(fd_, pid.data(), pid.size());
  }
  ManifestLock(const ManifestLock&) = delete;
  ManifestLock& operator=(const ManifestLock&) = delete;
  ~ManifestLock() {
    ::close(fd_);
    std::error_code ec;
    std::filesystem::remove(path_, ec);
  }

 private:
  std::filesystem::path path_;
  int fd_ = -1;
};

/// Caller must hold the ManifestLock. Returns true if the file changed.
inline bool save_manifest(const std::filesystem::path& path, const Manifest& m) {
  return write_json_file(path, to_json(m));
}

}  // namespace mapbench
