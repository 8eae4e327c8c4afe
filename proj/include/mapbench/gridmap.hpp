#pragma once

// Occupancy-grid floor plans: loading, thresholding, outer-contour tracing
// and the interior mask that separates the building from its surroundings.

#include <algorithm>
#include <array>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "mapbench/error.hpp"
#include "mapbench/raster.hpp"

namespace mapbench {

enum class CellState : std::uint8_t { Free, Occupied, Unknown };

struct Pixel {
  int row = 0;
  int col = 0;
  friend bool operator==(const Pixel&, const Pixel&) = default;
  friend auto operator<=>(const Pixel&, const Pixel&) = default;
};

/// Dense binary image. Used for interior masks and skeleton images.
class Bitmap {
 public:
  Bitmap() = default;
  Bitmap(int width, int height, bool fill = false)
      : width_(width), height_(height), bits_(static_cast<std::size_t>(width) * height, fill ? 1 : 0) {}

  int width() const { return width_; }
  int height() const { return height_; }
  bool contains(int row, int col) const { return row >= 0 && col >= 0 && row < height_ && col < width_; }
  bool get(int row, int col) const { return bits_[index(row, col)] != 0; }
  /// Out-of-image reads are false.
  bool test(int row, int col) const { return contains(row, col) && get(row, col); }
  void set(int row, int col, bool v = true) { bits_[index(row, col)] = v ? 1 : 0; }

  std::size_t count() const { return static_cast<std::size_t>(std::count(bits_.begin(), bits_.end(), 1)); }
  bool empty() const { return count() == 0; }

  std::vector<Pixel> pixels() const {
    std::vector<Pixel> out;
    for (int r = 0; r < height_; ++r)
      for (int c = 0; c < width_; ++c)
        if (get(r, c)) out.push_back({r, c});
    return out;
  }

  friend bool operator==(const Bitmap&, const Bitmap&) = default;

 private:
  std::size_t index(int row, int col) const { return static_cast<std::size_t>(row) * width_ + col; }

  int width_ = 0;
  int height_ = 0;
  std::vector<std::uint8_t> bits_;
};

/// True for pixels strictly inside the building's outer wall.
struct InteriorMask : Bitmap {
  using Bitmap::Bitmap;
  InteriorMask() = default;
  explicit InteriorMask(Bitmap b) : Bitmap(std::move(b)) {}
};

class GridMap {
 public:
  GridMap() = default;
  GridMap(int width, int height, double resolution, CellState fill = CellState::Free,
          double origin_x = 0.0, double origin_y = 0.0)
      : width_(width), height_(height), resolution_(resolution), origin_x_(origin_x), origin_y_(origin_y),
        cells_(static_cast<std::size_t>(std::max(width, 0)) * std::max(height, 0), fill) {
    if (width <= 0 || height <= 0) throw ValidationError("grid map must have positive width and height");
    if (!(resolution > 0.0)) throw ValidationError("grid map resolution must be > 0");
  }

  int width() const { return width_; }
  int height() const { return height_; }
  double resolution() const { return resolution_; }
  double origin_x() const { return origin_x_; }
  double origin_y() const { return origin_y_; }

  bool contains(int row, int col) const { return row >= 0 && col >= 0 && row < height_ && col < width_; }
  CellState at(int row, int col) const { return cells_[index(row, col)]; }
  void set(int row, int col, CellState s) { cells_[index(row, col)] = s; }

  /// Unknown cells are treated like walls everywhere outside the loader.
  bool blocked(int row, int col) const { return at(row, col) != CellState::Free; }
  bool free(int row, int col) const { return at(row, col) == CellState::Free; }

  const std::vector<CellState>& cells() const { return cells_; }

  std::size_t count(CellState s) const {
    return static_cast<std::size_t>(std::count(cells_.begin(), cells_.end(), s));
  }

  // Metric frame: x grows with columns, y grows with rows, pixel (0,0) sits at the origin.
  double to_x(double col) const { return origin_x_ + col * resolution_; }
  double to_y(double row) const { return origin_y_ + row * resolution_; }
  double to_col(double x) const { return (x - origin_x_) / resolution_; }
  double to_row(double y) const { return (y - origin_y_) / resolution_; }

  friend bool operator==(const GridMap&, const GridMap&) = default;

 private:
  std::size_t index(int row, int col) const { return static_cast<std::size_t>(row) * width_ + col; }

  int width_ = 0;
  int height_ = 0;
  double resolution_ = 1.0;
  double origin_x_ = 0.0;
  double origin_y_ = 0.0;
  std::vector<CellState> cells_;
};

struct MapMeta {
  std::optional<double> resolution;
  std::optional<double> origin_x;
  std::optional<double> origin_y;
  int occ_thresh = 50;
  int free_thresh = 205;
  /// Explicit sidecar; when empty, `<stem>.meta` then `<stem>.yaml` next to the image are tried.
  std::filesystem::path sidecar;
};

/// Pixel intensity to cell state: v <= occ -> Occupied, v >= free -> Free, else Unknown.
inline CellState classify(std::uint8_t v, int occ_thresh, int free_thresh) {
  if (v <= occ_thresh) return CellState::Occupied;
  if (v >= free_thresh) return CellState::Free;
  return CellState::Unknown;
}

inline GridMap threshold(const GrayImage& img, double resolution, int occ_thresh = 50, int free_thresh = 205,
                         double origin_x = 0.0, double origin_y = 0.0) {
  if (img.width <= 0 || img.height <= 0) throw ValidationError("zero-area image");
  if (occ_thresh >= free_thresh) throw ValidationError("occupied threshold must be below free threshold");
  GridMap map(img.width, img.height, resolution, CellState::Free, origin_x, origin_y);
  for (int r = 0; r < img.height; ++r)
    for (int c = 0; c < img.width; ++c) map.set(r, c, classify(img.at(r, c), occ_thresh, free_thresh));
  return map;
}

/// Occupied -> 0, Free -> 255, Unknown -> 128.
inline GrayImage render(const GridMap& map) {
  GrayImage img(map.width(), map.height());
  for (int r = 0; r < map.height(); ++r)
    for (int c = 0; c < map.width(); ++c) {
      switch (map.at(r, c)) {
        case CellState::Occupied: img.at(r, c) = 0; break;
        case CellState::Free: img.at(r, c) = 255; break;
        case CellState::Unknown: img.at(r, c) = 128; break;
      }
    }
  return img;
}

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

inline double parse_double_field(const std::string& key, const std::string& value, const std::string& file) {
  try {
    std::size_t used = 0;
    const double v = std::stod(value, &used);
    if (used != value.size()) throw std::invalid_argument(value);
    return v;
  } catch (const std::exception&) {
    throw ParseError("bad value for '" + key + "' in '" + file + "': " + value);
  }
}

}  // namespace detail

/// Reads `key: value` lines; unknown keys are ignored.
inline MapMeta read_sidecar(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open metadata '" + path.string() + "'");
  MapMeta meta;
  std::string line;
  while (std::getline(in, line)) {
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const auto colon = line.find(':');
    if (colon == std::string::npos) continue;
    const std::string key = detail::trim(line.substr(0, colon));
    const std::string value = detail::trim(line.substr(colon + 1));
    if (key == "resolution") meta.resolution = detail::parse_double_field(key, value, path.string());
    else if (key == "origin_x") meta.origin_x = detail::parse_double_field(key, value, path.string());
    else if (key == "origin_y") meta.origin_y = detail::parse_double_field(key, value, path.string());
    else if (key == "occupied_thresh" || key == "occ_thresh") meta.occ_thresh = static_cast<int>(detail::parse_double_field(key, value, path.string()));
    else if (key == "free_thresh") meta.free_thresh = static_cast<int>(detail::parse_double_field(key, value, path.string()));
  }
  return meta;
}

inline std::optional<std::filesystem::path> find_sidecar(const std::filesystem::path& image) {
  for (const char* ext : {".meta", ".yaml"}) {
    auto candidate = image;
    candidate.replace_extension(ext);
    if (std::filesystem::exists(candidate)) return candidate;
  }
  return std::nullopt;
}

/// Loads a floor plan. Values given in `meta` win over the sidecar; a missing
/// resolution is an error rather than a silent default.
inline GridMap load_gridmap(const std::filesystem::path& path, const MapMeta& meta = {}) {
  const GrayImage img = read_raster(path);
  MapMeta side;
  std::optional<std::filesystem::path> side_path =
      meta.sidecar.empty() ? find_sidecar(path) : std::optional{meta.sidecar};
  if (side_path) side = read_sidecar(*side_path);

  const std::optional<double> res = meta.resolution ? meta.resolution : side.resolution;
  if (!res) {
    throw ValidationError("no resolution for '" + path.string() +
                          "': pass --resolution or provide a sidecar with 'resolution: <m/px>'");
  }
  const double ox = meta.origin_x.value_or(side.origin_x.value_or(0.0));
  const double oy = meta.origin_y.value_or(side.origin_y.value_or(0.0));
  return threshold(img, *res, meta.occ_thresh, meta.free_thresh, ox, oy);
}

// ---------------------------------------------------------------------------
// Contours

// 8-neighbourhood, counter-clockwise on screen starting east (row axis points down).
inline constexpr std::array<Pixel, 8> kRing8 = {{{0, 1}, {-1, 1}, {-1, 0}, {-1, -1}, {0, -1}, {1, -1}, {1, 0}, {1, 1}}};

struct Contour {
  std::vector<Pixel> points;  // traversal order, closed implicitly
  int component = -1;
  std::size_t length() const { return points.size(); }
  Pixel start() const { return points.front(); }
};

/// 8-connected components of blocked cells; -1 for free cells.
inline std::vector<int> label_blocked_components(const GridMap& map, int* count = nullptr) {
  const int w = map.width(), h = map.height();
  std::vector<int> labels(static_cast<std::size_t>(w) * h, -1);
  std::vector<Pixel> stack;
  int next = 0;
  for (int r = 0; r < h; ++r)
    for (int c = 0; c < w; ++c) {
      if (!map.blocked(r, c) || labels[static_cast<std::size_t>(r) * w + c] >= 0) continue;
      labels[static_cast<std::size_t>(r) * w + c] = next;
      stack.push_back({r, c});
      while (!stack.empty()) {
        const Pixel p = stack.back();
        stack.pop_back();
        for (const Pixel d : kRing8) {
          const int nr = p.row + d.row, nc = p.col + d.col;
          if (!map.contains(nr, nc) || !map.blocked(nr, nc)) continue;
          int& l = labels[static_cast<std::size_t>(nr) * w + nc];
          if (l < 0) {
            l = next;
            stack.push_back({nr, nc});
          }
        }
      }
      ++next;
    }
  if (count) *count = next;
  return labels;
}

/// Outer-border following for one 8-connected component, starting at its
/// raster-first pixel (whose west neighbour is necessarily background).
inline Contour trace_outer_border(const std::vector<int>& labels, int width, int height, Pixel start, int component) {
  auto inside = [&](int r, int c) {
    return r >= 0 && c >= 0 && r < height && c < width && labels[static_cast<std::size_t>(r) * width + c] == component;
  };
  auto dir_of = [](Pixel from, Pixel to) {
    for (int k = 0; k < 8; ++k)
      if (kRing8[k].row == to.row - from.row && kRing8[k].col == to.col - from.col) return k;
    return -1;
  };

  Contour contour;
  contour.component = component;

  // First neighbour clockwise from the west.
  std::optional<Pixel> first;
  for (int i = 0; i < 8; ++i) {
    const int k = ((4 - i) % 8 + 8) % 8;
    const Pixel q{start.row + kRing8[k].row, start.col + kRing8[k].col};
    if (inside(q.row, q.col)) {
      first = q;
      break;
    }
  }
  if (!first) {
    contour.points.push_back(start);
    return contour;
  }

  Pixel prev = *first;
  Pixel cur = start;
  while (true) {
    contour.points.push_back(cur);
    const int back = dir_of(cur, prev);
    Pixel next = cur;
    for (int i = 1; i <= 8; ++i) {
      const int k = (back + i) % 8;
      const Pixel q{cur.row + kRing8[k].row, cur.col + kRing8[k].col};
      if (inside(q.row, q.col)) {
        next = q;
        break;
      }
    }
    if (next == start && cur == *first) break;
    prev = cur;
    cur = next;
  }
  return contour;
}

/// Outer contours of every blocked component, in raster order of their start pixels.
inline std::vector<Contour> outer_contours(const GridMap& map) {
  int n = 0;
  const auto labels = label_blocked_components(map, &n);
  std::vector<Contour> out;
  std::vector<bool> done(static_cast<std::size_t>(n), false);
  for (int r = 0; r < map.height(); ++r)
    for (int c = 0; c < map.width(); ++c) {
      const int l = labels[static_cast<std::size_t>(r) * map.width() + c];
      if (l < 0 || done[static_cast<std::size_t>(l)]) continue;
      done[static_cast<std::size_t>(l)] = true;
      out.push_back(trace_outer_border(labels, map.width(), map.height(), {r, c}, l));
    }
  return out;
}

struct BoundaryInfo {
  Contour contour;
  InteriorMask mask;
};

/// Longest outer contour (ties: smallest start row, then column) and the set
/// of pixels it strictly encloses, excluding the wall component itself.
inline BoundaryInfo building_boundary(const GridMap& map) {
  int n = 0;
  const auto labels = label_blocked_components(map, &n);
  if (n == 0) throw NoBoundaryError("no boundary: map has no occupied cells");

  std::optional<Contour> best;
  std::vector<bool> done(static_cast<std::size_t>(n), false);
  for (int r = 0; r < map.height(); ++r)
    for (int c = 0; c < map.width(); ++c) {
      const int l = labels[static_cast<std::size_t>(r) * map.width() + c];
      if (l < 0 || done[static_cast<std::size_t>(l)]) continue;
      done[static_cast<std::size_t>(l)] = true;
      Contour ct = trace_outer_border(labels, map.width(), map.height(), {r, c}, l);
      // Raster order already gives the tie rule, so only strictly longer wins.
      if (!best || ct.length() > best->length()) best = std::move(ct);
    }

  // 4-connected flood from outside the image over everything not in the wall component.
  const int w = map.width(), h = map.height();
  const int pw = w + 2, ph = h + 2;
  std::vector<std::uint8_t> outside(static_cast<std::size_t>(pw) * ph, 0);
  auto wall = [&](int r, int c) {  // padded coordinates
    if (r == 0 || c == 0 || r == ph - 1 || c == pw - 1) return false;
    return labels[static_cast<std::size_t>(r - 1) * w + (c - 1)] == best->component;
  };
  std::vector<Pixel> stack{{0, 0}};
  outside[0] = 1;
  while (!stack.empty()) {
    const Pixel p = stack.back();
    stack.pop_back();
    for (const Pixel d : {Pixel{0, 1}, Pixel{0, -1}, Pixel{1, 0}, Pixel{-1, 0}}) {
      const int nr = p.row + d.row, nc = p.col + d.col;
      if (nr < 0 || nc < 0 || nr >= ph || nc >= pw) continue;
      auto& o = outside[static_cast<std::size_t>(nr) * pw + nc];
      if (o || wall(nr, nc)) continue;
      o = 1;
      stack.push_back({nr, nc});
    }
  }

  InteriorMask mask(w, h);
  bool any = false;
  for (int r = 0; r < h; ++r)
    for (int c = 0; c < w; ++c) {
      if (outside[static_cast<std::size_t>(r + 1) * pw + (c + 1)] || wall(r + 1, c + 1)) continue;
      mask.set(r, c);
      any = true;
    }
  if (!any) throw NoBoundaryError("no boundary: the longest contour encloses no pixels");
  return {std::move(*best), std::move(mask)};
}

inline InteriorMask interior_mask(const GridMap& map) { return building_boundary(map).mask; }

/// Interior pixels a robot can occupy: inside the mask and Free.
inline Bitmap traversable(const GridMap& map, const InteriorMask& mask) {
  Bitmap out(map.width(), map.height());
  for (int r = 0; r < map.height(); ++r)
    for (int c = 0; c < map.width(); ++c)
      if (mask.get(r, c) && map.free(r, c)) out.set(r, c);
  return out;
}

/// Copy of `map` shifted by (rows, cols) into a larger canvas filled with `fill`.
inline GridMap pad(const GridMap& map, int top, int left, int bottom, int right, CellState fill = CellState::Free) {
  GridMap out(map.width() + left + right, map.height() + top + bottom, map.resolution(), fill,
              map.origin_x() - left * map.resolution(), map.origin_y() - top * map.resolution());
  for (int r = 0; r < map.height(); ++r)
    for (int c = 0; c < map.width(); ++c) out.set(r + top, c + left, map.at(r, c));
  return out;
}

}  // namespace mapbench
