#pragma once

// Localization error of a SLAM run: relative-displacement residuals between
// estimated and ground-truth trajectories over randomly sampled pose pairs,
// plus per-environment aggregation and run-count estimation.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <numbers>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "mapbench/error.hpp"

namespace mapbench {

/// Wraps an angle into (-pi, pi].
inline double wrap_angle(double a) {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  double r = std::remainder(a, two_pi);
  if (r <= -std::numbers::pi) r += two_pi;
  return r;
}

struct Pose2 {
  double x = 0.0;
  double y = 0.0;
  double theta = 0.0;

  Pose2() = default;
  Pose2(double x_, double y_, double theta_) : x(x_), y(y_), theta(wrap_angle(theta_)) {}
  friend bool operator==(const Pose2&, const Pose2&) = default;
};

struct RelPose {
  double dx = 0.0;
  double dy = 0.0;
  double dtheta = 0.0;

  RelPose() = default;
  RelPose(double dx_, double dy_, double dtheta_) : dx(dx_), dy(dy_), dtheta(wrap_angle(dtheta_)) {}

  double translation() const { return std::hypot(dx, dy); }
  double rotation() const { return std::abs(dtheta); }
};

/// Motion composition: applies `d`, expressed in the frame of `a`.
inline Pose2 compose(const Pose2& a, const RelPose& d) {
  const double c = std::cos(a.theta), s = std::sin(a.theta);
  return {a.x + c * d.dx - s * d.dy, a.y + s * d.dx + c * d.dy, a.theta + d.dtheta};
}

/// Inverse motion composition: `b` expressed in the frame of `a`.
inline RelPose ominus(const Pose2& a, const Pose2& b) {
  const double c = std::cos(a.theta), s = std::sin(a.theta);
  const double tx = b.x - a.x, ty = b.y - a.y;
  return {c * tx + s * ty, -s * tx + c * ty, b.theta - a.theta};
}

inline RelPose ominus(const RelPose& a, const RelPose& b) {
  return ominus(Pose2{a.dx, a.dy, a.dtheta}, Pose2{b.dx, b.dy, b.dtheta});
}

/// Residual between the estimated and true displacement from pose i to pose j.
inline RelPose pair_residual(const Pose2& est_i, const Pose2& est_j, const Pose2& gt_i, const Pose2& gt_j) {
  return ominus(ominus(gt_i, gt_j), ominus(est_i, est_j));
}

struct PoseSample {
  double t = 0.0;
  Pose2 estimated;
  Pose2 truth;
};

struct RunLog {
  std::string id;
  std::vector<PoseSample> samples;

  std::size_t size() const { return samples.size(); }
  std::uint64_t pair_count() const {
    const std::uint64_t n = samples.size();
    return n < 2 ? 0 : n * (n - 1) / 2;
  }
};

/// Throws ValidationError unless T >= 2 and timestamps strictly increase.
inline void validate(const RunLog& run) {
  if (run.samples.size() < 2) throw ValidationError("run '" + run.id + "' has fewer than 2 poses");
  for (std::size_t i = 1; i < run.samples.size(); ++i) {
    if (!(run.samples[i].t > run.samples[i - 1].t)) {
      throw ValidationError("run '" + run.id + "': timestamps not strictly increasing at row " + std::to_string(i + 1));
    }
  }
}

/// CSV with header `t,est_x,est_y,est_theta,gt_x,gt_y,gt_theta` (columns in any order).
inline RunLog parse_run_csv(std::istream& in, std::string id) {
  static const std::vector<std::string> kColumns = {"t", "est_x", "est_y", "est_theta", "gt_x", "gt_y", "gt_theta"};
  auto split = [](const std::string& line) {
    std::vector<std::string> out;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      const auto b = cell.find_first_not_of(" \t\r");
      const auto e = cell.find_last_not_of(" \t\r");
      out.push_back(b == std::string::npos ? std::string{} : cell.substr(b, e - b + 1));
    }
    return out;
  };

  std::string line;
  if (!std::getline(in, line)) throw ParseError("run '" + id + "': empty file");
  const auto header = split(line);
  std::vector<std::size_t> idx;
  for (const auto& name : kColumns) {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw ParseError("run '" + id + "': missing column '" + name + "'");
    idx.push_back(static_cast<std::size_t>(it - header.begin()));
  }

  RunLog run;
  run.id = std::move(id);
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto cells = split(line);
    if (cells.size() != header.size()) {
      throw ParseError("run '" + run.id + "': row " + std::to_string(row) + " has " + std::to_string(cells.size()) +
                       " fields, expected " + std::to_string(header.size()));
    }
    double v[7];
    for (std::size_t k = 0; k < 7; ++k) {
      const std::string& s = cells[idx[k]];
      char* end = nullptr;
      v[k] = std::strtod(s.c_str(), &end);
      if (s.empty() || end != s.c_str() + s.size() || !std::isfinite(v[k])) {
        throw ParseError("run '" + run.id + "': bad number '" + s + "' at row " + std::to_string(row));
      }
    }
    run.samples.push_back({v[0], Pose2{v[1], v[2], v[3]}, Pose2{v[4], v[5], v[6]}});
  }
  validate(run);
  return run;
}

inline RunLog load_run_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open run log '" + path.string() + "'");
  return parse_run_csv(in, path.stem().string());
}

/// Inverse of parse_run_csv; numbers use the shortest round-trip form.
inline void write_run_csv(std::ostream& out, const RunLog& run) {
  auto num = [](double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
  };
  out << "t,est_x,est_y,est_theta,gt_x,gt_y,gt_theta\n";
  for (const auto& s : run.samples) {
    out << num(s.t) << ',' << num(s.estimated.x) << ',' << num(s.estimated.y) << ',' << num(s.estimated.theta) << ','
        << num(s.truth.x) << ',' << num(s.truth.y) << ',' << num(s.truth.theta) << '\n';
  }
}

// ---------------------------------------------------------------------------
// Sampling

enum class ErrorMode { Absolute, Squared };

inline const char* to_string(ErrorMode m) { return m == ErrorMode::Absolute ? "absolute" : "squared"; }

inline ErrorMode parse_error_mode(const std::string& s) {
  if (s == "absolute") return ErrorMode::Absolute;
  if (s == "squared") return ErrorMode::Squared;
  throw ValidationError("unknown error mode '" + s + "' (expected absolute|squared)");
}

/// Name of the generator behind every sampled quantity, recorded in reports.
inline constexpr const char* kRngName = "mt19937_64";

struct SamplingPolicy {
  double confidence = 0.99;
  double margin_t = 0.02;  // m
  double margin_r = 0.01;  // rad
  std::size_t pilot_pairs = 100;
  std::size_t pilot_runs = 10;
  std::uint64_t seed = 0;
  ErrorMode mode = ErrorMode::Absolute;
  /// Standard sample-size law uses z^2; false reproduces the unsquared form.
  bool square_z = true;

  void check() const {
    if (!(confidence > 0.0 && confidence < 1.0)) throw ValidationError("confidence must lie in (0, 1)");
    if (!(margin_t > 0.0) || !(margin_r > 0.0)) throw ValidationError("margins of error must be > 0");
    if (pilot_pairs == 0) throw ValidationError("pilot pair count must be >= 1");
  }
};

/// Two-sided standard-normal critical value for `confidence`, rounded to three
/// decimals like a printed table (0.99 -> 2.576, 0.95 -> 1.960).
inline double z_score(double confidence) {
  if (!(confidence > 0.0 && confidence < 1.0)) throw ValidationError("confidence must lie in (0, 1)");
  const double target = 1.0 - (1.0 - confidence) / 2.0;
  double lo = 0.0, hi = 40.0;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (0.5 * std::erfc(-mid / std::numbers::sqrt2) < target) lo = mid;
    else hi = mid;
  }
  return std::round(0.5 * (lo + hi) * 1000.0) / 1000.0;
}

/// Unclamped requirement ceil(z^2 s^2 / d^2).
inline std::uint64_t required_samples(double variance, double margin, double confidence, bool square_z = true) {
  if (variance < 0.0) throw ValidationError("variance must be >= 0");
  if (!(margin > 0.0)) throw ValidationError("margin of error must be > 0");
  const double z = z_score(confidence);
  const double n = (square_z ? z * z : z) * variance / (margin * margin);
  if (n >= 1e18) return std::numeric_limits<std::uint64_t>::max();
  return static_cast<std::uint64_t>(std::ceil(n));
}

/// Pair count for one error component, clamped to [pilot pairs, available].
inline std::uint64_t sample_size(double variance, double margin, const SamplingPolicy& policy,
                                 std::uint64_t available) {
  std::uint64_t n = required_samples(variance, margin, policy.confidence, policy.square_z);
  n = std::max<std::uint64_t>(n, policy.pilot_pairs);
  return std::min(n, available);
}

/// Translation-margin form (the common case).
inline std::uint64_t sample_size(double variance, const SamplingPolicy& policy, std::uint64_t available) {
  return sample_size(variance, policy.margin_t, policy, available);
}

struct IndexPair {
  std::uint32_t i = 0;
  std::uint32_t j = 0;
  friend bool operator==(const IndexPair&, const IndexPair&) = default;
  friend auto operator<=>(const IndexPair&, const IndexPair&) = default;
};

struct RelationSample {
  std::vector<IndexPair> pairs;
  std::vector<RelPose> residuals;
  std::size_t size() const { return pairs.size(); }
};

struct RunError {
  double eps_t = 0.0;
  double eps_r = 0.0;
  ErrorMode mode = ErrorMode::Absolute;
  std::size_t n = 0;
};

namespace detail {

/// Unbiased integer in [0, bound) from raw generator output.
inline std::uint64_t uniform_below(std::mt19937_64& rng, std::uint64_t bound) {
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % bound;
  std::uint64_t v;
  do {
    v = rng();
  } while (v >= limit);
  return v % bound;
}

/// k-th pair (i < j) of T poses in row-major order.
inline IndexPair pair_from_index(std::uint64_t k, std::uint64_t T) {
  auto offset = [T](std::uint64_t i) { return i * (2 * T - i - 1) / 2; };
  const double tf = static_cast<double>(T);
  const double disc = (2 * tf - 1) * (2 * tf - 1) - 8.0 * static_cast<double>(k);
  std::uint64_t i = static_cast<std::uint64_t>(std::max(0.0, std::floor(((2 * tf - 1) - std::sqrt(std::max(disc, 0.0))) / 2)));
  if (i > T - 2) i = T - 2;
  while (i > 0 && offset(i) > k) --i;
  while (i + 1 <= T - 2 && offset(i + 1) <= k) ++i;
  return {static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(i + 1 + (k - offset(i)))};
}

/// `count` distinct pairs uniformly at random (Floyd's algorithm), sorted.
inline std::vector<IndexPair> draw_pairs(std::uint64_t T, std::uint64_t count, std::mt19937_64& rng) {
  const std::uint64_t total = T * (T - 1) / 2;
  std::vector<IndexPair> out;
  if (count >= total) {
    out.reserve(total);
    for (std::uint64_t i = 0; i + 1 < T; ++i)
      for (std::uint64_t j = i + 1; j < T; ++j) out.push_back({static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(j)});
    return out;
  }
  std::unordered_set<std::uint64_t> chosen;
  chosen.reserve(count * 2);
  for (std::uint64_t m = total - count; m < total; ++m) {
    const std::uint64_t k = uniform_below(rng, m + 1);
    if (!chosen.insert(k).second) chosen.insert(m);
  }
  std::vector<std::uint64_t> ks(chosen.begin(), chosen.end());
  std::sort(ks.begin(), ks.end());
  out.reserve(ks.size());
  for (const auto k : ks) out.push_back(pair_from_index(k, T));
  return out;
}

inline double component_t(const RelPose& r, ErrorMode m) {
  const double t = r.translation();
  return m == ErrorMode::Absolute ? t : r.dx * r.dx + r.dy * r.dy;
}

inline double component_r(const RelPose& r, ErrorMode m) {
  const double a = std::abs(wrap_angle(r.dtheta));
  return m == ErrorMode::Absolute ? a : a * a;
}

inline double unbiased_variance(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return ss / static_cast<double>(v.size() - 1);
}

}  // namespace detail

inline std::vector<RelPose> residuals(const RunLog& run, const std::vector<IndexPair>& pairs) {
  std::vector<RelPose> out;
  out.reserve(pairs.size());
  for (const auto& p : pairs) {
    if (p.i >= p.j || p.j >= run.samples.size()) throw ValidationError("relation index out of range");
    const auto& a = run.samples[p.i];
    const auto& b = run.samples[p.j];
    out.push_back(pair_residual(a.estimated, b.estimated, a.truth, b.truth));
  }
  return out;
}

/// Every (i, j) pair of the run.
inline RelationSample all_relations(const RunLog& run) {
  validate(run);
  std::mt19937_64 unused;
  RelationSample s;
  s.pairs = detail::draw_pairs(run.size(), run.pair_count(), unused);
  s.residuals = residuals(run, s.pairs);
  return s;
}

/// Pilot draw -> residual variance -> required N (max over translation and
/// rotation) -> N fresh uniform pairs. Deterministic for a given seed.
inline RelationSample sample_relations(const RunLog& run, const SamplingPolicy& policy) {
  validate(run);
  policy.check();
  const std::uint64_t T = run.size();
  const std::uint64_t total = run.pair_count();
  std::mt19937_64 rng(policy.seed);

  const auto pilot = detail::draw_pairs(T, std::min<std::uint64_t>(policy.pilot_pairs, total), rng);
  const auto pilot_res = residuals(run, pilot);
  std::vector<double> et, er;
  for (const auto& r : pilot_res) {
    et.push_back(detail::component_t(r, policy.mode));
    er.push_back(detail::component_r(r, policy.mode));
  }
  const std::uint64_t n = std::max(sample_size(detail::unbiased_variance(et), policy.margin_t, policy, total),
                                   sample_size(detail::unbiased_variance(er), policy.margin_r, policy, total));

  RelationSample s;
  s.pairs = detail::draw_pairs(T, n, rng);
  s.residuals = residuals(run, s.pairs);
  return s;
}

/// Mean residual over the sampled pairs. Absolute mode averages norms (m, rad);
/// squared mode averages squared norms.
inline RunError localization_error(const RunLog& run, const RelationSample& rel, ErrorMode mode = ErrorMode::Absolute) {
  if (rel.pairs.empty()) throw ValidationError("empty relation sample");
  const std::vector<RelPose> res = rel.residuals.size() == rel.pairs.size() ? rel.residuals : residuals(run, rel.pairs);
  double st = 0.0, sr = 0.0;
  for (const auto& r : res) {
    st += detail::component_t(r, mode);
    sr += detail::component_r(r, mode);
  }
  const double n = static_cast<double>(res.size());
  return {st / n, sr / n, mode, res.size()};
}

inline RunError evaluate_run(const RunLog& run, const SamplingPolicy& policy) {
  return localization_error(run, sample_relations(run, policy), policy.mode);
}

// ---------------------------------------------------------------------------
// Aggregation over runs

struct PerformanceVector {
  double mean_eps_t = 0.0;
  double std_eps_t = 0.0;
  double mean_eps_r = 0.0;
  double std_eps_r = 0.0;
  std::size_t runs = 0;
  friend bool operator==(const PerformanceVector&, const PerformanceVector&) = default;
};

/// Arithmetic means and population standard deviations over the runs.
/// Accumulates offsets from the first run, so identical runs give std 0 exactly.
inline PerformanceVector aggregate(const std::vector<RunError>& errors) {
  if (errors.empty()) throw ValidationError("cannot aggregate an empty list of runs");
  for (const auto& e : errors)
    if (e.mode != errors.front().mode) throw ValidationError("cannot aggregate runs with mixed error modes");
  const double n = static_cast<double>(errors.size());
  auto moments = [&](auto get, double& mean, double& sd) {
    const double x0 = get(errors.front());
    double s = 0.0, ss = 0.0;
    for (const auto& e : errors) {
      const double d = get(e) - x0;
      s += d;
      ss += d * d;
    }
    mean = x0 + s / n;
    sd = std::sqrt(std::max(0.0, (ss - s * s / n) / n));
  };
  PerformanceVector p;
  p.runs = errors.size();
  moments([](const RunError& e) { return e.eps_t; }, p.mean_eps_t, p.std_eps_t);
  moments([](const RunError& e) { return e.eps_r; }, p.mean_eps_r, p.std_eps_r);
  return p;
}

struct RunCountEstimate {
  std::size_t performed = 0;
  std::size_t required = 0;
  bool satisfied = false;
  std::size_t additional() const { return satisfied ? 0 : required - performed; }
};

/// One step of the iterative run-count search: given the runs performed so
/// far, how many are needed in total. The caller performs more runs and calls
/// again until `satisfied`.
inline RunCountEstimate estimate_run_count(const std::vector<RunError>& batch, const SamplingPolicy& policy) {
  policy.check();
  if (batch.size() < policy.pilot_runs) {
    throw ValidationError("run-count estimation needs at least " + std::to_string(policy.pilot_runs) + " runs, got " +
                          std::to_string(batch.size()));
  }
  std::vector<double> et, er;
  for (const auto& e : batch) {
    et.push_back(e.eps_t);
    er.push_back(e.eps_r);
  }
  auto need = [&](double var, double margin) {
    return std::max<std::uint64_t>(required_samples(var, margin, policy.confidence, policy.square_z), policy.pilot_runs);
  };
  const std::uint64_t req = std::max(need(detail::unbiased_variance(et), policy.margin_t),
                                     need(detail::unbiased_variance(er), policy.margin_r));
  RunCountEstimate out;
  out.performed = batch.size();
  out.required = static_cast<std::size_t>(req);
  out.satisfied = out.required <= out.performed;
  return out;
}

}  // namespace mapbench
