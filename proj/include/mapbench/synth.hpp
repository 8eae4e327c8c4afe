#pragma once

// Synthetic floor plans and drifting-odometry run logs for tests, examples
// and the bundled fixture set.

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include "mapbench/datastore.hpp"
#include "mapbench/features.hpp"
#include "mapbench/gridmap.hpp"
#include "mapbench/raster.hpp"
#include "mapbench/trajectory.hpp"

namespace mapbench::synth {

struct Rect {
  int row0, col0, row1, col1;  // inclusive-exclusive
};

/// Unknown canvas with the given free rectangles carved out and interior wall
/// rectangles added back; every non-free cell touching free space becomes a wall.
inline GridMap building(int height, int width, double resolution, const std::vector<Rect>& free_space,
                        const std::vector<Rect>& walls = {}) {
  GridMap map(width, height, resolution, CellState::Unknown);
  auto fill = [&](const Rect& r, CellState s) {
    for (int i = std::max(r.row0, 0); i < std::min(r.row1, height); ++i)
      for (int j = std::max(r.col0, 0); j < std::min(r.col1, width); ++j) map.set(i, j, s);
  };
  for (const auto& r : free_space) fill(r, CellState::Free);
  for (const auto& r : walls) fill(r, CellState::Occupied);
  GridMap out = map;
  for (int i = 0; i < height; ++i)
    for (int j = 0; j < width; ++j) {
      if (map.at(i, j) != CellState::Unknown) continue;
      for (int di = -1; di <= 1; ++di)
        for (int dj = -1; dj <= 1; ++dj)
          if (map.contains(i + di, j + dj) && map.at(i + di, j + dj) == CellState::Free) {
            out.set(i, j, CellState::Occupied);
          }
    }
  return out;
}

inline constexpr int kMargin = 2;

/// Straight horizontal corridor with a free interior of `length_px` x `width_px`.
inline GridMap corridor(int length_px, int width_px, double resolution) {
  const int m = kMargin + 1;
  return building(width_px + 2 * m, length_px + 2 * m, resolution, {{m, m, m + width_px, m + length_px}});
}

inline GridMap room(int rows_px, int cols_px, double resolution) {
  const int m = kMargin + 1;
  return building(rows_px + 2 * m, cols_px + 2 * m, resolution, {{m, m, m + rows_px, m + cols_px}});
}

/// Two arms of length `arm_px` and width `width_px` meeting at the top-left corner.
inline GridMap l_shape(int arm_px, int width_px, double resolution) {
  const int m = kMargin + 1;
  const int size = arm_px + 2 * m;
  return building(size, size, resolution,
                  {{m, m, m + width_px, m + arm_px}, {m, m, m + arm_px, m + width_px}});
}

/// Two rooms side by side, separated by a wall with a centred door.
inline GridMap two_rooms(int rows_px, int room_cols_px, int door_px, double resolution) {
  const int m = kMargin + 1;
  const int cols = 2 * room_cols_px + 1;
  const int wall_col = m + room_cols_px;
  const int door0 = m + (rows_px - door_px) / 2;
  return building(rows_px + 2 * m, cols + 2 * m, resolution, {{m, m, m + rows_px, m + cols}},
                  {{m, wall_col, door0, wall_col + 1}, {door0 + door_px, wall_col, m + rows_px, wall_col + 1}});
}

/// Room with a solid rectangular pillar in the middle.
inline GridMap ring(int rows_px, int cols_px, int pillar_px, double resolution) {
  const int m = kMargin + 1;
  const int pr = m + (rows_px - pillar_px) / 2, pc = m + (cols_px - pillar_px) / 2;
  return building(rows_px + 2 * m, cols_px + 2 * m, resolution, {{m, m, m + rows_px, m + cols_px}},
                  {{pr, pc, pr + pillar_px, pc + pillar_px}});
}

struct DriftModel {
  double step_m = 0.1;           // ground-truth forward motion per pose
  double turn_sigma = 0.08;      // rad, ground-truth heading change per pose
  double trans_noise = 0.02;     // odometry translation noise per metre
  double rot_noise = 0.004;      // rad of odometry rotation noise per pose
  double dt = 0.1;               // s
};

/// Random-walk ground truth and an estimate integrated from noisy odometry.
inline RunLog drifting_run(std::string id, std::size_t poses, std::uint64_t seed, const DriftModel& dm = {}) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n01(0.0, 1.0);
  RunLog run;
  run.id = std::move(id);
  Pose2 gt, est;
  for (std::size_t k = 0; k < poses; ++k) {
    run.samples.push_back({dm.dt * static_cast<double>(k), est, gt});
    const RelPose step(dm.step_m, 0.0, dm.turn_sigma * n01(rng));
    const RelPose odo(step.dx * (1.0 + dm.trans_noise * n01(rng)), dm.step_m * dm.trans_noise * n01(rng),
                      step.dtheta + dm.rot_noise * n01(rng));
    gt = compose(gt, step);
    est = compose(est, odo);
  }
  return run;
}

struct FixtureSpec {
  std::string id;
  GridMap map;
};

/// The five bundled environments, smallest to largest.
inline std::vector<FixtureSpec> fixture_maps() {
  const double res = 0.5;
  return {{"env_corridor", corridor(120, 12, res)},
          {"env_l_shape", l_shape(90, 14, res)},
          {"env_room", room(60, 80, res)},
          {"env_ring", ring(70, 90, 24, res)},
          {"env_two_rooms", two_rooms(60, 50, 10, res)}};
}

/// Writes maps (PGM + sidecar), three run logs per map and `manifest.json`
/// under `dir`. Run length and odometry drift grow with the map's VTD, so
/// the fixture errors follow the relation the models are meant to learn.
inline std::filesystem::path write_fixture_set(const std::filesystem::path& dir, std::uint64_t seed = 7,
                                               std::size_t runs_per_env = 3) {
  namespace fs = std::filesystem;
  fs::create_directories(dir / "maps");
  fs::create_directories(dir / "runs");
  Manifest m;
  m.created = "fixture";
  std::uint64_t run_seed = seed;
  for (const auto& f : fixture_maps()) {
    const std::string map_rel = "maps/" + f.id + ".pgm";
    write_pgm(dir / map_rel, render(f.map));
    {
      std::ofstream side(dir / ("maps/" + f.id + ".meta"));
      side << "resolution: " << f.map.resolution() << "\norigin_x: 0\norigin_y: 0\n";
    }
    EnvironmentRecord rec;
    rec.id = f.id;
    rec.map = map_rel;
    const double vtd = extract_features(f.map).vtd_m;
    DriftModel dm;
    dm.trans_noise = 0.01 + 2e-4 * vtd;
    dm.rot_noise = 0.002 + 2e-5 * vtd;
    const auto poses = static_cast<std::size_t>(300 + 4 * vtd);
    for (std::size_t k = 0; k < runs_per_env; ++k) {
      const std::string run_rel = "runs/" + f.id + "_run" + std::to_string(k) + ".csv";
      std::ofstream out(dir / run_rel);
      write_run_csv(out, drifting_run(f.id + "_run" + std::to_string(k), poses, run_seed++, dm));
      rec.runs.push_back(run_rel);
    }
    m.environments.push_back(std::move(rec));
  }
  const fs::path manifest = dir / "manifest.json";
  save_manifest(manifest, m);
  return manifest;
}

}  // namespace mapbench::synth
