#include <gtest/gtest.h>

#include <fstream>

#include "mapbench/gridmap.hpp"
#include "mapbench/synth.hpp"
#include "oracles.hpp"

using namespace mapbench;

namespace {

GridMap bordered_room(int size) {
  GridMap m(size, size, 0.05);
  for (int i = 0; i < size; ++i) {
    m.set(0, i, CellState::Occupied);
    m.set(size - 1, i, CellState::Occupied);
    m.set(i, 0, CellState::Occupied);
    m.set(i, size - 1, CellState::Occupied);
  }
  return m;
}

Bitmap shifted(const Bitmap& b, int top, int left, int bottom, int right) {
  Bitmap out(b.width() + left + right, b.height() + top + bottom);
  for (const Pixel p : b.pixels()) out.set(p.row + top, p.col + left);
  return out;
}

}  // namespace

TEST(Threshold, TwoByTwoExample) {
  GrayImage img(2, 2);
  img.pixels = {0, 255, 255, 0};
  const GridMap m = threshold(img, 0.1, 50, 200);
  EXPECT_EQ(m.at(0, 0), CellState::Occupied);
  EXPECT_EQ(m.at(0, 1), CellState::Free);
  EXPECT_EQ(m.at(1, 0), CellState::Free);
  EXPECT_EQ(m.at(1, 1), CellState::Occupied);
}

TEST(Threshold, UniformWhiteIsAllFree) {
  const GridMap m = threshold(GrayImage(10, 10, 255), 0.1);
  EXPECT_EQ(m.count(CellState::Free), 100u);
  EXPECT_EQ(static_cast<std::size_t>(m.width() * m.height()), m.cells().size());
}

TEST(Threshold, MidGrayIsUnknown) {
  GrayImage img(3, 3, 255);
  img.at(1, 2) = 128;
  const GridMap m = threshold(img, 0.1);
  EXPECT_EQ(m.at(1, 2), CellState::Unknown);
  EXPECT_EQ(m.count(CellState::Unknown), 1u);
}

TEST(Threshold, BoundaryValuesAreInclusive) {
  EXPECT_EQ(classify(50, 50, 205), CellState::Occupied);
  EXPECT_EQ(classify(51, 50, 205), CellState::Unknown);
  EXPECT_EQ(classify(204, 50, 205), CellState::Unknown);
  EXPECT_EQ(classify(205, 50, 205), CellState::Free);
}

TEST(Threshold, RethresholdingRenderedMapIsIdentity) {
  std::mt19937_64 rng(3);
  GridMap m(17, 11, 0.2);
  for (int r = 0; r < m.height(); ++r)
    for (int c = 0; c < m.width(); ++c) m.set(r, c, static_cast<CellState>(rng() % 3));
  EXPECT_EQ(threshold(render(m), 0.2), m);
}

TEST(Threshold, RejectsZeroAreaAndBadResolution) {
  EXPECT_THROW(threshold(GrayImage(0, 4), 0.1), ValidationError);
  EXPECT_THROW(threshold(GrayImage(2, 2, 255), 0.0), ValidationError);
  EXPECT_THROW(threshold(GrayImage(2, 2, 255), 0.1, 200, 100), ValidationError);
}

TEST(Load, PgmAndPngRoundTripWithSidecar) {
  const auto dir = oracle::temp_dir("gridmap");
  const GridMap m = synth::two_rooms(20, 15, 4, 0.25);
  write_pgm(dir / "a.pgm", render(m));
  write_png(dir / "b.png", render(m));
  std::ofstream(dir / "a.meta") << "resolution: 0.25\norigin_x: 1.5\n";
  const GridMap a = load_gridmap(dir / "a.pgm");
  EXPECT_EQ(a.cells(), m.cells());
  EXPECT_DOUBLE_EQ(a.resolution(), 0.25);
  EXPECT_DOUBLE_EQ(a.origin_x(), 1.5);
  EXPECT_DOUBLE_EQ(a.origin_y(), 0.0);

  MapMeta meta;
  meta.resolution = 0.25;
  EXPECT_EQ(load_gridmap(dir / "b.png", meta).cells(), m.cells());
  std::filesystem::remove_all(dir);
}

TEST(Load, MissingResolutionIsAnExplicitError) {
  const auto dir = oracle::temp_dir("gridmap");
  write_pgm(dir / "x.pgm", GrayImage(4, 4, 255));
  try {
    load_gridmap(dir / "x.pgm");
    FAIL() << "expected an error";
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("resolution"), std::string::npos);
  }
  std::filesystem::remove_all(dir);
}

TEST(Load, UnreadableAndCorruptFilesFail) {
  const auto dir = oracle::temp_dir("gridmap");
  MapMeta meta;
  meta.resolution = 0.1;
  EXPECT_THROW(load_gridmap(dir / "missing.pgm", meta), IoError);
  std::ofstream(dir / "bad.pgm") << "P5\n4 4\n255\n";  // no pixel data
  EXPECT_THROW(load_gridmap(dir / "bad.pgm", meta), Error);
  std::ofstream(dir / "bad.meta") << "resolution: fast\n";
  EXPECT_THROW(read_sidecar(dir / "bad.meta"), ParseError);
  std::filesystem::remove_all(dir);
}

TEST(InteriorMask, BorderedRoomIsExactlyTheInterior) {
  const GridMap m = bordered_room(10);
  const InteriorMask mask = interior_mask(m);
  EXPECT_EQ(mask.count(), 64u);
  for (int r = 0; r < 10; ++r)
    for (int c = 0; c < 10; ++c) EXPECT_EQ(mask.get(r, c), r >= 1 && r <= 8 && c >= 1 && c <= 8);
}

TEST(InteriorMask, NestedRectanglesFollowTheOuterContour) {
  GridMap m = bordered_room(20);
  for (int r = 7; r < 12; ++r)
    for (int c = 7; c < 12; ++c) m.set(r, c, CellState::Occupied);
  const BoundaryInfo b = building_boundary(m);
  EXPECT_EQ(b.contour.length(), 76u);  // 4 * 19 ring pixels
  EXPECT_EQ(b.contour.start(), (Pixel{0, 0}));
  EXPECT_EQ(b.mask.count(), 18u * 18u);
  EXPECT_EQ(traversable(m, b.mask).count(), 18u * 18u - 25u);
}

TEST(InteriorMask, LShapeMatchesFloodFillOracle) {
  const GridMap m = oracle::ascii_map({
      "..............",
      ".#######......",
      ".#.....#......",
      ".#.....#......",
      ".#.....######.",
      ".#..........#.",
      ".#..........#.",
      ".############.",
      "..............",
  });
  const InteriorMask mask = interior_mask(m);
  EXPECT_EQ(static_cast<const Bitmap&>(mask), oracle::flood_fill_interior(m));
  EXPECT_EQ(mask.count(), 35u);
}

TEST(InteriorMask, SyntheticPlansMatchFloodFillOracle) {
  for (const auto& f : synth::fixture_maps()) {
    SCOPED_TRACE(f.id);
    // The ring's pillar is a second contour, so compare free interiors.
    Bitmap expected = oracle::flood_fill_interior(f.map);
    for (const Pixel p : expected.pixels())
      if (!f.map.free(p.row, p.col)) expected.set(p.row, p.col, false);
    EXPECT_EQ(traversable(f.map, interior_mask(f.map)), expected);
  }
}

TEST(InteriorMask, UnknownOutsideIsNotInterior) {
  // Unknown padding around a closed wall stays outside.
  const GridMap m = oracle::ascii_map({
      "???????",
      "?#####?",
      "?#...#?",
      "?#####?",
      "???????",
  });
  const InteriorMask mask = interior_mask(m);
  EXPECT_EQ(mask.count(), 3u);
  EXPECT_TRUE(mask.get(2, 2));
}

TEST(InteriorMask, AllFreeMapHasNoBoundary) {
  try {
    interior_mask(GridMap(8, 8, 0.1));
    FAIL() << "expected NoBoundaryError";
  } catch (const NoBoundaryError& e) {
    EXPECT_NE(std::string(e.what()).find("no boundary"), std::string::npos);
  }
}

TEST(InteriorMask, OpenWallEnclosesNothing) {
  const GridMap m = oracle::ascii_map({"......", ".####.", "......"});
  EXPECT_THROW(interior_mask(m), NoBoundaryError);
}

TEST(InteriorMask, TranslationWithPaddingCommutes) {
  const GridMap m = synth::l_shape(30, 8, 0.1);
  const InteriorMask base = interior_mask(m);
  for (const auto& [t, l, b, r] : {std::array{1, 0, 0, 0}, std::array{0, 5, 2, 0}, std::array{7, 3, 4, 9}}) {
    const GridMap moved = pad(m, t, l, b, r);
    EXPECT_EQ(static_cast<const Bitmap&>(interior_mask(moved)), shifted(base, t, l, b, r));
  }
}

TEST(InteriorMask, FreeInteriorIsOneFourConnectedRegion) {
  const GridMap m = synth::ring(30, 40, 10, 0.1);
  const Bitmap free_in = traversable(m, interior_mask(m));
  EXPECT_EQ(free_in.count(), 30u * 40u - 100u);
  const auto px = free_in.pixels();
  Bitmap seen(m.width(), m.height());
  std::vector<Pixel> stack{px.front()};
  seen.set(px.front().row, px.front().col);
  std::size_t reached = 0;
  while (!stack.empty()) {
    const Pixel p = stack.back();
    stack.pop_back();
    ++reached;
    for (const auto& [dr, dc] : {std::pair{1, 0}, std::pair{-1, 0}, std::pair{0, 1}, std::pair{0, -1}}) {
      if (free_in.test(p.row + dr, p.col + dc) && !seen.get(p.row + dr, p.col + dc)) {
        seen.set(p.row + dr, p.col + dc);
        stack.push_back({p.row + dr, p.col + dc});
      }
    }
  }
  EXPECT_EQ(reached, free_in.count());
}

TEST(Contours, LongestWinsAndTiesGoToRasterOrder) {
  // Two identical 3x3 rings: same length, the upper-left one wins.
  const GridMap m = oracle::ascii_map({
      "###..###",
      "#.#..#.#",
      "###..###",
  });
  const auto all = outer_contours(m);
  ASSERT_EQ(all.size(), 2u);
  EXPECT_EQ(all[0].length(), all[1].length());
  const BoundaryInfo b = building_boundary(m);
  EXPECT_EQ(b.contour.start(), (Pixel{0, 0}));
  EXPECT_EQ(b.mask.count(), 1u);
  EXPECT_TRUE(b.mask.get(1, 1));
}
