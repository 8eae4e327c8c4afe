#pragma once

// Per-environment modelling table: feature columns plus the four components
// of the performance vector, with a lossless CSV form.

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "mapbench/error.hpp"

namespace mapbench {

enum class Target { MeanEpsT, StdEpsT, MeanEpsR, StdEpsR };

inline constexpr std::array<Target, 4> kAllTargets = {Target::MeanEpsT, Target::StdEpsT, Target::MeanEpsR,
                                                      Target::StdEpsR};

inline const char* to_string(Target t) {
  switch (t) {
    case Target::MeanEpsT: return "mean_eps_t";
    case Target::StdEpsT: return "std_eps_t";
    case Target::MeanEpsR: return "mean_eps_r";
    case Target::StdEpsR: return "std_eps_r";
  }
  return "?";
}

inline Target parse_target(std::string_view s) {
  for (const Target t : kAllTargets)
    if (s == to_string(t)) return t;
  throw ValidationError("unknown target '" + std::string(s) + "' (expected mean_eps_t|std_eps_t|mean_eps_r|std_eps_r)");
}

/// Shortest decimal text that parses back to the same double.
inline std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

inline double parse_double(std::string_view s, const std::string& context) {
  double v = 0.0;
  const auto* first = s.data();
  if (!s.empty() && s.front() == '+') ++first;
  const auto res = std::from_chars(first, s.data() + s.size(), v);
  if (s.empty() || res.ec != std::errc{} || res.ptr != s.data() + s.size()) {
    throw ParseError(context + ": bad number '" + std::string(s) + "'");
  }
  return v;
}

struct DatasetRow {
  std::string env_id;
  std::vector<double> features;  // aligned with Dataset::feature_names
  std::array<double, 4> targets{};
  friend bool operator==(const DatasetRow&, const DatasetRow&) = default;
};

struct Dataset {
  std::vector<std::string> feature_names;
  std::vector<DatasetRow> rows;

  std::size_t size() const { return rows.size(); }

  std::size_t feature_index(const std::string& name) const {
    const auto it = std::find(feature_names.begin(), feature_names.end(), name);
    if (it == feature_names.end()) throw ValidationError("dataset has no feature '" + name + "'");
    return static_cast<std::size_t>(it - feature_names.begin());
  }

  std::vector<double> column(const std::string& name) const {
    const std::size_t j = feature_index(name);
    std::vector<double> out;
    out.reserve(rows.size());
    for (const auto& r : rows) out.push_back(r.features[j]);
    return out;
  }

  std::vector<double> target(Target t) const {
    std::vector<double> out;
    out.reserve(rows.size());
    for (const auto& r : rows) out.push_back(r.targets[static_cast<std::size_t>(t)]);
    return out;
  }

  Dataset subset(const std::vector<std::size_t>& idx) const {
    Dataset d;
    d.feature_names = feature_names;
    d.rows.reserve(idx.size());
    for (const auto i : idx) d.rows.push_back(rows.at(i));
    return d;
  }

  /// Unique ids, consistent widths, finite features.
  void check() const {
    std::set<std::string> ids;
    for (const auto& r : rows) {
      if (!ids.insert(r.env_id).second) throw ValidationError("duplicate environment id '" + r.env_id + "'");
      if (r.features.size() != feature_names.size()) throw ValidationError("row '" + r.env_id + "' has wrong width");
      for (const double v : r.features)
        if (!std::isfinite(v)) throw ValidationError("row '" + r.env_id + "' has a non-finite feature");
    }
  }

  friend bool operator==(const Dataset&, const Dataset&) = default;
};

inline void write_dataset_csv(std::ostream& out, const Dataset& d) {
  out << "env_id";
  for (const auto& n : d.feature_names) out << ',' << n;
  for (const Target t : kAllTargets) out << ',' << to_string(t);
  out << '\n';
  for (const auto& r : d.rows) {
    out << r.env_id;
    for (const double v : r.features) out << ',' << format_double(v);
    for (const double v : r.targets) out << ',' << format_double(v);
    out << '\n';
  }
}

inline std::string dataset_csv(const Dataset& d) {
  std::ostringstream ss;
  write_dataset_csv(ss, d);
  return ss.str();
}

/// `env_id` first, the four target columns anywhere, every other column a feature.
inline Dataset parse_dataset_csv(std::istream& in, const std::string& name = "dataset") {
  auto split = [](const std::string& line) {
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string c;
    while (std::getline(ss, c, ',')) {
      while (!c.empty() && (c.back() == '\r' || c.back() == ' ')) c.pop_back();
      while (!c.empty() && c.front() == ' ') c.erase(c.begin());
      cells.push_back(c);
    }
    return cells;
  };
  std::string line;
  if (!std::getline(in, line)) throw ParseError(name + ": empty dataset");
  const auto header = split(line);
  if (header.empty() || header[0] != "env_id") throw ParseError(name + ": first column must be env_id");

  Dataset d;
  std::array<int, 4> tcol{-1, -1, -1, -1};
  std::vector<std::size_t> fcol;
  for (std::size_t j = 1; j < header.size(); ++j) {
    bool is_target = false;
    for (const Target t : kAllTargets)
      if (header[j] == to_string(t)) {
        tcol[static_cast<std::size_t>(t)] = static_cast<int>(j);
        is_target = true;
      }
    if (!is_target) {
      d.feature_names.push_back(header[j]);
      fcol.push_back(j);
    }
  }
  for (const Target t : kAllTargets)
    if (tcol[static_cast<std::size_t>(t)] < 0) throw ParseError(name + ": missing column '" + to_string(t) + "'");

  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto cells = split(line);
    const std::string ctx = name + " line " + std::to_string(lineno);
    if (cells.size() != header.size()) throw ParseError(ctx + ": expected " + std::to_string(header.size()) + " fields");
    DatasetRow row;
    row.env_id = cells[0];
    for (const auto j : fcol) row.features.push_back(parse_double(cells[j], ctx));
    for (const Target t : kAllTargets)
      row.targets[static_cast<std::size_t>(t)] = parse_double(cells[static_cast<std::size_t>(tcol[static_cast<std::size_t>(t)])], ctx);
    d.rows.push_back(std::move(row));
  }
  d.check();
  return d;
}

inline Dataset load_dataset_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open dataset '" + path.string() + "'");
  return parse_dataset_csv(in, path.filename().string());
}

}  // namespace mapbench
