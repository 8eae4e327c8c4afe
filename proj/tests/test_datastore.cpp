#include <gtest/gtest.h>

#include <fstream>
#include <random>

#include "mapbench/datastore.hpp"
#include "mapbench/synth.hpp"
#include "oracles.hpp"

using namespace mapbench;
namespace fs = std::filesystem;

namespace {

void write(const fs::path& p, const std::string& text) {
  fs::create_directories(p.parent_path());
  std::ofstream(p) << text;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

EnvironmentRecord complete(const std::string& id, double vtd, double eps) {
  EnvironmentRecord e;
  e.id = id;
  e.map = id + ".pgm";
  e.features = FeatureMap{{"vtd_m", vtd}, {"vtr_rad", vtd / 10}};
  e.performance = PerformanceVector{eps, eps / 10, eps / 20, eps / 100, 4};
  return e;
}

class Datastore : public ::testing::Test {
 protected:
  void SetUp() override { dir = oracle::temp_dir("datastore"); }
  void TearDown() override { fs::remove_all(dir); }
  fs::path dir;
};

}  // namespace

TEST_F(Datastore, EmptyEnvironmentListIsValid) {
  write(dir / "m.json", R"({"schema_version": 1, "environments": []})");
  const Manifest m = validate_manifest(dir / "m.json");
  EXPECT_TRUE(m.environments.empty());
  EXPECT_EQ(m.base_dir, dir);
}

TEST_F(Datastore, DuplicateIdIsNamed) {
  write(dir / "a.pgm", "");
  write(dir / "m.json", R"({"schema_version": 1, "environments": [
      {"id": "lab", "map": "a.pgm"}, {"id": "lab", "map": "a.pgm"}]})");
  try {
    validate_manifest(dir / "m.json");
    FAIL() << "expected ValidationError";
  } catch (const ValidationError& e) {
    EXPECT_NE(std::string(e.what()).find("duplicate environment id 'lab'"), std::string::npos);
  }
}

TEST_F(Datastore, EveryProblemIsReportedWithItsEnvironment) {
  write(dir / "ok.pgm", "");
  write(dir / "m.json", R"({"schema_version": 1, "environments": [
      {"id": "a", "map": "missing.pgm"},
      {"id": "b", "map": "ok.pgm", "runs": ["r1.csv"]},
      {"id": "c", "map": "ok.pgm", "resolution": -1}]})");
  try {
    validate_manifest(dir / "m.json");
    FAIL() << "expected ValidationError";
  } catch (const ValidationError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("'a': dangling map path 'missing.pgm'"), std::string::npos) << msg;
    EXPECT_NE(msg.find("'b': dangling run path 'r1.csv'"), std::string::npos) << msg;
    EXPECT_NE(msg.find("'c': resolution must be > 0"), std::string::npos) << msg;
  }
}

TEST_F(Datastore, SchemaMismatch) {
  write(dir / "a.json", R"({"environments": []})");
  EXPECT_THROW(validate_manifest(dir / "a.json"), ValidationError);
  write(dir / "b.json", R"({"schema_version": 2, "environments": []})");
  EXPECT_THROW(validate_manifest(dir / "b.json"), ValidationError);
  write(dir / "c.json", R"({"schema_version": 1, "environments": [{"map": "x"}]})");
  EXPECT_THROW(validate_manifest(dir / "c.json"), ValidationError);
  write(dir / "d.json", R"([1, 2)");
  EXPECT_THROW(validate_manifest(dir / "d.json"), ParseError);
  EXPECT_THROW(validate_manifest(dir / "none.json"), IoError);
}

TEST_F(Datastore, ValidationIsSideEffectFree) {
  const fs::path manifest = synth::write_fixture_set(dir / "fx", 3, 1);
  std::map<fs::path, std::string> before;
  for (const auto& f : fs::recursive_directory_iterator(dir)) before[f.path()] = f.is_regular_file() ? slurp(f) : "";
  validate_manifest(manifest);
  std::map<fs::path, std::string> after;
  for (const auto& f : fs::recursive_directory_iterator(dir)) after[f.path()] = f.is_regular_file() ? slurp(f) : "";
  EXPECT_EQ(before, after);
}

TEST_F(Datastore, ThirtySixRunLogsLoad) {
  Manifest m;
  m.base_dir = dir;
  EnvironmentRecord e;
  e.id = "env";
  e.map = "map.pgm";
  for (int k = 0; k < 36; ++k) {
    const std::string rel = "runs/r" + std::to_string(k) + ".csv";
    fs::create_directories(dir / "runs");
    std::ofstream out(dir / rel);
    write_run_csv(out, synth::drifting_run("r" + std::to_string(k), 20, k));
    e.runs.push_back(rel);
  }
  m.environments.push_back(e);
  const auto runs = load_runs(m, m.environments.front());
  ASSERT_EQ(runs.size(), 36u);
  EXPECT_EQ(runs[35].samples.size(), 20u);
}

TEST_F(Datastore, AssembleSortsById) {
  Manifest m;
  m.environments = {complete("c", 3, 0.3), complete("a", 1, 0.1), complete("b", 2, 0.2)};
  const Dataset d = assemble_dataset(m);
  ASSERT_EQ(d.size(), 3u);
  EXPECT_EQ(d.rows[0].env_id, "a");
  EXPECT_EQ(d.rows[2].env_id, "c");
  EXPECT_EQ(d.feature_names, (std::vector<std::string>{"vtd_m", "vtr_rad"}));
  EXPECT_EQ(d.rows[1].features[0], 2.0);
  EXPECT_EQ(d.rows[1].targets[0], 0.2);
}

TEST_F(Datastore, AssembleKeepsOnlySharedFeatures) {
  Manifest m;
  m.environments = {complete("a", 1, 0.1), complete("b", 2, 0.2)};
  (*m.environments[0].features)["area_m2"] = 4.0;
  EXPECT_EQ(assemble_dataset(m).feature_names, (std::vector<std::string>{"vtd_m", "vtr_rad"}));
}

TEST_F(Datastore, IncompleteRecordsAreListed) {
  Manifest m;
  m.environments = {complete("a", 1, 0.1), complete("b", 2, 0.2), complete("c", 3, 0.3)};
  m.environments[1].features.reset();
  m.environments[2].features.reset();
  m.environments[2].performance.reset();
  try {
    assemble_dataset(m);
    FAIL() << "expected ValidationError";
  } catch (const ValidationError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("'b' is missing features"), std::string::npos) << msg;
    EXPECT_NE(msg.find("'c' is missing features performance"), std::string::npos) << msg;
    EXPECT_EQ(msg.find("'a'"), std::string::npos) << msg;
  }
}

TEST_F(Datastore, DatasetCsvRoundTrip) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-1e3, 1e3);
  Manifest m;
  for (int i = 0; i < 12; ++i) {
    auto e = complete("env_" + std::to_string(i), u(rng), u(rng));
    (*e.features)["vtr_rad"] = u(rng) * 1e-7;
    m.environments.push_back(e);
  }
  const Dataset d = assemble_dataset(m);
  const std::string text = dataset_csv(d);
  std::istringstream in(text);
  const Dataset back = parse_dataset_csv(in);
  EXPECT_EQ(back, d);
  EXPECT_EQ(dataset_csv(back), text);
}

TEST_F(Datastore, DatasetCsvErrors) {
  std::istringstream a("id,vtd_m\n");
  EXPECT_THROW(parse_dataset_csv(a), ParseError);
  const std::string header = "env_id,vtd_m,mean_eps_t,std_eps_t,mean_eps_r,std_eps_r\n";
  std::istringstream b(header + "x,abc,1,1,1,1\n");
  EXPECT_THROW(parse_dataset_csv(b), ParseError);
  std::istringstream c(header + "x,1,1,1,1,1\nx,2,2,2,2,2\n");
  EXPECT_THROW(parse_dataset_csv(c), ValidationError);
  std::istringstream d("env_id,vtd_m,mean_eps_t\nx,1,1\n");
  EXPECT_THROW(parse_dataset_csv(d), ParseError);  // every target column is required
}

TEST_F(Datastore, ManifestJsonRoundTrip) {
  Manifest m;
  m.created = "2024-01-01T00:00:00Z";
  auto e = complete("lab", 123.456789012345, 0.1 + 0.2);
  e.resolution = 0.05;
  e.start = Pose2{1.25, -3.5, 0.75};
  e.runs = {"runs/a.csv", "runs/b.csv"};
  m.environments = {e, complete("hall", 7.0, 1e-17)};
  const fs::path p = dir / "manifest.json";
  EXPECT_TRUE(save_manifest(p, m));
  EXPECT_FALSE(save_manifest(p, m));  // unchanged content is not rewritten
  const std::string first = slurp(p);
  const Manifest back = parse_manifest(read_json_file(p), dir);
  EXPECT_EQ(back, m);
  save_manifest(dir / "again.json", back);
  EXPECT_EQ(slurp(dir / "again.json"), first);
}

TEST_F(Datastore, FeatureAndGraphJsonRoundTrip) {
  const FeatureVector f{12.345678901234567, 0.1 + 0.2, 3.0, 4.5, 7, 6};
  EXPECT_EQ(features_from_json(json::parse(to_json(f).dump())), f);

  const GridMap map = synth::two_rooms(30, 25, 5, 0.1);
  const Skeleton s = build_voronoi(map);
  const json j = to_json(s.graph, map, VoronoiParams{});
  EXPECT_EQ(graph_from_json(json::parse(j.dump())), s.graph);
  EXPECT_THROW(graph_from_json(json::parse(R"({"nodes":[{"id":1,"row":0,"col":0}],"edges":[]})")), ParseError);
  EXPECT_THROW(graph_from_json(json::parse(R"({"nodes":[{"id":0,"row":0,"col":0}],"edges":[{"a":0,"b":3,"weight_px":1}]})")),
               ParseError);

  const PerformanceVector p{0.1, 0.2, 0.3, 0.4, 36};
  EXPECT_EQ(performance_from_json(json::parse(to_json(p).dump())), p);
}

TEST_F(Datastore, LockIsExclusive) {
  const fs::path manifest = dir / "manifest.json";
  {
    ManifestLock lock(manifest);
    EXPECT_TRUE(fs::exists(dir / "manifest.json.lock"));
    EXPECT_THROW(ManifestLock second(manifest), IoError);
  }
  EXPECT_FALSE(fs::exists(dir / "manifest.json.lock"));
  EXPECT_NO_THROW(ManifestLock again(manifest));
}

TEST_F(Datastore, PathsResolveAgainstManifestDirectory) {
  Manifest m;
  m.base_dir = "/data/exp";
  EXPECT_EQ(m.resolve("maps/a.pgm"), fs::path("/data/exp/maps/a.pgm"));
  EXPECT_EQ(m.resolve("/abs/a.pgm"), fs::path("/abs/a.pgm"));
  EXPECT_THROW(m.find("nope"), ValidationError);
}
