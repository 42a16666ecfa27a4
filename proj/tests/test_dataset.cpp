#include "sylva/dataset.hpp"

#include "sylva/random.hpp"

#include <doctest.h>

#include <nlohmann/json.hpp>

#include <filesystem>
#include <set>

using namespace sylva;

namespace {

LidarPoint pt(double x, double y, std::uint8_t semantic = 0, std::uint32_t instance = 0) {
  LidarPoint p;
  p.position = Vec3(x, y, 0);
  p.semantic = semantic;
  p.instance_id = instance;
  p.return_number = 1;
  p.pulse_index = 0;
  return p;
}

// Uniform random cloud with `per_tile` points in each tile of a w x h extent.
PointCloud uniform_cloud(double w, double h, std::size_t n, std::uint64_t seed) {
  PointCloud c;
  c.extent = Rect::from_size(w, h);
  const CounterRng r(seed);
  for (std::size_t i = 0; i < n; ++i) c.points.push_back(pt(w * r.uniform(2 * i), h * r.uniform(2 * i + 1)));
  return c;
}

std::vector<Plot> fake_plots(const std::string& scene, std::size_t n) {
  std::vector<Plot> plots;
  for (std::size_t i = 0; i < n; ++i) {
    Plot p;
    p.scene = scene;
    p.tile_index = {static_cast<int>(i), 0};
    p.bounds = {Vec2(50.0 * i, 0), Vec2(50.0 * (i + 1), 50)};
    p.cloud.points = {pt(50.0 * i + 1, 1)};
    p.density = 1.0 / 2500;
    plots.push_back(p);
  }
  return plots;
}

TreeAsset box_asset() {
  TreeAsset a;
  a.asset_id = "box";
  a.species = "box";
  for (int k = 0; k < 8; ++k) a.mesh.vertices.emplace_back(k & 1, (k >> 1) & 1, (k >> 2) & 1);
  a.mesh.triangles = {{0, 1, 3}, {0, 3, 2}, {4, 7, 5}, {4, 6, 7}, {0, 5, 1}, {0, 4, 5},
                      {2, 3, 7}, {2, 7, 6}, {0, 2, 6}, {0, 6, 4}, {1, 5, 7}, {1, 7, 3}};
  a.mesh.material.assign(12, Material::wood);
  normalize_asset(a);
  return a;
}

}  // namespace

TEST_CASE("identity mapping leaves labels unchanged") {
  PointCloud c;
  for (std::uint8_t s : {0, 1, 2, 2, 1}) c.points.push_back(pt(0, 0, s));
  const auto m = remap_semantics(c, SemanticMapping::identity(native_labels()));
  CHECK(m.points == c.points);
}

TEST_CASE("five-class to binary") {
  const auto five = forest_five_class_labels();
  PointCloud c;
  for (auto name : {"stem", "live_branches", "woody_branches", "ground", "low_vegetation"})
    c.points.push_back(pt(1, 2, *five.code_of(name), 5));
  const auto out = remap_semantics(c, five_class_to_binary());
  const std::vector<std::uint8_t> expect{1, 1, 1, 0, 0};
  for (std::size_t i = 0; i < expect.size(); ++i) {
    CHECK(out.points[i].semantic == expect[i]);
    CHECK(out.points[i].position == c.points[i].position);
    CHECK(out.points[i].instance_id == 5);
  }
}

TEST_CASE("mapping without ground is a data error naming the label") {
  auto m = five_class_to_binary();
  m.table.erase(*m.source.code_of("ground"));
  PointCloud c;
  c.points.push_back(pt(0, 0, *m.source.code_of("stem")));
  c.points.push_back(pt(0, 0, *m.source.code_of("ground")));
  try {
    remap_semantics(c, m);
    FAIL("expected DataError");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find("ground") != std::string::npos);
  }
  CHECK_THROWS_AS(SemanticMapping::from_names(native_labels(), binary_labels(), {{"bark", "tree"}}), ConfigError);
}

TEST_CASE("250 m square tiles into 25 plots") {
  const auto c = uniform_cloud(250, 250, 50000, 3);
  const auto plots = tile(c, 50, "s0");
  REQUIRE(plots.size() == 25);
  std::size_t total = 0;
  for (const auto& p : plots) {
    total += p.cloud.size();
    CHECK(!p.edge);
    CHECK(p.bounds.area() == doctest::Approx(2500));
    for (const auto& q : p.cloud.points) CHECK(p.bounds.contains(q.position.head<2>()));
  }
  CHECK(total == c.size());
  CHECK(plots[0].id() == "s0_0_0");
}

TEST_CASE("tile boundaries are half-open, closed at the far edge") {
  PointCloud c;
  c.extent = Rect::from_size(100, 100);
  c.points = {pt(50, 10), pt(49.999, 10), pt(100, 100), pt(0, 0)};
  const auto plots = tile(c, 50);
  std::map<std::array<int, 2>, std::size_t> count;
  for (const auto& p : plots) count[p.tile_index] = p.cloud.size();
  CHECK(count[{1, 0}] == 1);
  CHECK(count[{0, 0}] == 2);
  CHECK(count[{1, 1}] == 1);
}

TEST_CASE("partial tiles are flagged as edge plots") {
  const auto plots = tile(uniform_cloud(120, 50, 2000, 1), 50);
  REQUIRE(plots.size() == 3);
  CHECK(plots.back().edge);
  CHECK(plots.back().bounds.width() == doctest::Approx(20));
}

TEST_CASE("empty cloud gives no plots") { CHECK(tile(PointCloud{}, 50).empty()); }

TEST_CASE("split sizes") {
  auto c = split_counts(25, {0.7, 0.15, 0.15});
  CHECK(c.train == 17);
  CHECK(c.val == 4);
  CHECK(c.test == 4);
  c = split_counts(20, {0.7, 0.15, 0.15});
  CHECK(c.train == 14);
  CHECK(c.val == 3);
  CHECK(c.test == 3);
  c = split_counts(3, {0.7, 0.15, 0.15});
  CHECK(c.train == 1);
  CHECK(c.val == 1);
  CHECK(c.test == 1);
  for (std::size_t n = 3; n < 200; ++n) {
    const auto s = split_counts(n, {0.6, 0.25, 0.15});
    CHECK(s.train + s.val + s.test == n);
    CHECK(s.val >= 1);
    CHECK(s.test >= 1);
  }
}

TEST_CASE("split partitions plots within each scene") {
  auto plots = fake_plots("a", 25);
  const auto more = fake_plots("b", 20);
  plots.insert(plots.end(), more.begin(), more.end());
  const auto m = split(plots, {0.7, 0.15, 0.15}, 42);
  CHECK(m.name == "Sim_2,45");
  REQUIRE(m.plots.size() == 45);
  std::set<std::string> ids;
  for (const auto& e : m.plots) CHECK(ids.insert(e.plot_id).second);
  const auto ca = m.counts("a"), cb = m.counts("b");
  CHECK(ca.train == 17);
  CHECK(ca.val == 4);
  CHECK(ca.test == 4);
  CHECK(cb.train == 14);
  CHECK(cb.val == 3);
  CHECK(cb.test == 3);

  const auto again = split(plots, {0.7, 0.15, 0.15}, 42);
  CHECK(again.to_json() == m.to_json());
  const auto other = split(plots, {0.7, 0.15, 0.15}, 43);
  CHECK(other.to_json() != m.to_json());
}

TEST_CASE("scenes with fewer than three plots") {
  CHECK_THROWS_AS(split(fake_plots("x", 2), {0.7, 0.15, 0.15}, 1), ValidationError);
  const auto m = split(fake_plots("x", 2), {0.7, 0.15, 0.15}, 1, "Sim", true);
  CHECK(m.counts().train == 2);
  CHECK(dataset_name("Sim", 11, 187) == "Sim_11,187");
}

TEST_CASE("manifest json and file round trip") {
  const auto m = split(fake_plots("a", 7), {0.7, 0.15, 0.15}, 9);
  const auto j = m.to_json();
  CHECK(DatasetManifest::from_json(j).to_json() == j);
  const auto dir = std::filesystem::temp_directory_path() / "sylva_manifest_test";
  std::filesystem::create_directories(dir);
  m.write(dir / "manifest.json");
  CHECK(DatasetManifest::read(dir / "manifest.json").to_json() == j);
  std::filesystem::remove_all(dir);
}

TEST_CASE("density report") {
  PointCloud c;
  c.extent = Rect::from_size(50, 50);
  c.points.reserve(2500000);
  for (int i = 0; i < 2500; ++i)
    for (int j = 0; j < 1000; ++j) c.points.push_back(pt(i * 0.02 + 0.01, j * 0.05 + 0.01));
  const auto plots = tile(c, 50);
  REQUIRE(plots.size() == 1);
  CHECK(plots[0].density == doctest::Approx(1000.0));
  const auto r = density_report(plots, 1000);
  REQUIRE(r.plots.size() == 1);
  CHECK(r.plots[0].density == doctest::Approx(1000.0));
  CHECK_FALSE(r.plots[0].below_threshold);
  REQUIRE(r.scenes.size() == 1);
  CHECK(r.scenes[0].mean_density == doctest::Approx(1000.0));

  const auto empty = density_report(std::vector<Plot>{});
  CHECK(empty.plots.empty());
  CHECK(empty.scenes.empty());
}

TEST_CASE("nodal extraction") {
  AssetLibrary lib;
  lib.add(box_asset());
  ForestScene s;
  s.extent = Rect::from_size(10, 10);
  TreeInstance t;
  t.instance_id = 3;
  t.asset_id = "box";
  t.position = Vec3(5, 5, 0);
  s.instances = {t};
  const auto c = extract_nodal(s, lib);
  REQUIRE(c.size() == 8);
  CHECK(c.provenance == Provenance::nodal);
  for (const auto& p : c.points) {
    CHECK(p.instance_id == 3);
    CHECK(p.semantic == static_cast<std::uint8_t>(Semantic::wood));
    CHECK(p.return_number == 0);
    CHECK(p.pulse_index == -1);
  }
  CHECK(extract_nodal(ForestScene{}, lib).empty());
  CHECK(extract_nodal(s, lib).points == c.points);
}
