#include "sylva/voxel.hpp"

#include "sylva/random.hpp"

#include <doctest.h>

#include <numbers>
#include <set>
#include <sstream>

using namespace sylva;

namespace {

const AssetLibrary& library() {
  static const AssetLibrary lib = default_parametric_library(60);
  return lib;
}

ForestScene small_forest(std::uint64_t seed) {
  return generate_forest(Rect::from_size(20, 20), {coniferous_overstory(), coniferous_understory()}, library(), seed);
}

ForestScene one_tree(const std::string& asset, Vec3 pos = Vec3(5, 5, 0), double scale = 1.0, double yaw = 0.3) {
  ForestScene s;
  s.extent = Rect::from_size(10, 10);
  s.generators = {coniferous_overstory()};
  TreeInstance t;
  t.instance_id = 7;
  t.asset_id = asset;
  t.position = pos;
  t.scale = scale;
  t.yaw = yaw;
  s.instances.push_back(t);
  return s;
}

}  // namespace

TEST_CASE("instance transform") {
  const auto& asset = library().at("beech_medium");
  TreeInstance id;
  id.asset_id = asset.asset_id;
  const auto tris = transform_instance(asset, id);
  REQUIRE(tris.size() == asset.mesh.triangles.size());
  for (std::size_t i = 0; i < tris.size(); ++i) {
    const auto t = asset.mesh.triangle(i);
    CHECK(tris[i].tri.a == t.a);
    CHECK(tris[i].tri.c == t.c);
    CHECK(tris[i].material == asset.mesh.material[i]);
  }

  TreeInstance big = id;
  big.scale = 2.0;
  big.position = Vec3(3, 4, 0);
  const auto scaled = transform_instance(library().at("spruce_sapling"), big);
  double zmax = 0;
  for (const auto& t : scaled) zmax = std::max({zmax, t.tri.a.z(), t.tri.b.z(), t.tri.c.z()});
  CHECK(zmax == doctest::Approx(2.0 * library().at("spruce_sapling").base_height).epsilon(1e-12));
}

TEST_CASE("empty scene gives exactly the ground layer") {
  ForestScene s;
  s.extent = Rect::from_size(10, 10);
  const auto g = voxelize_scene(s, library());
  CHECK(g.size() == 100 * 100);
  g.for_each([&](const Vec3i& v, const VoxelAttr& a) {
    CHECK(a.semantic == Semantic::ground);
    CHECK(a.instance_id == 0);
    CHECK(a.opacity == 1.0f);
    CHECK(v.z() == -1);  // top face at z = 0
  });
}

TEST_CASE("one small triangle occupies a single voxel") {
  const Triangle tri{Vec3(0, 0, 1), Vec3(0.05, 0, 1), Vec3(0.05, 0.05, 1)};
  std::vector<Vec3i> hit;
  rasterize_triangle(tri, 0.1, [&](const Vec3i& v, const Vec3&) { hit.push_back(v); });
  REQUIRE(hit.size() == 1);
  CHECK(hit[0] == Vec3i(0, 0, 10));
}

TEST_CASE("leaf voxels carry the table opacity") {
  const auto s = one_tree("beech_medium");
  VoxelizeOptions opt;
  opt.opacity.leaf = 0.35;
  const auto g = voxelize_scene(s, library(), opt);
  std::size_t leaves = 0, wood = 0;
  g.for_each([&](const Vec3i&, const VoxelAttr& a) {
    if (a.semantic == Semantic::leaf) {
      ++leaves;
      CHECK(a.opacity == doctest::Approx(0.35));
      CHECK(a.instance_id == 7);
    } else if (a.semantic == Semantic::wood) {
      ++wood;
      CHECK(a.opacity == 1.0f);
    } else {
      CHECK(a.instance_id == 0);
    }
  });
  CHECK(leaves > 100);
  CHECK(wood > 10);
}

TEST_CASE("conservative rasterization: sampled surface points land in occupied voxels") {
  const auto s = small_forest(11);
  REQUIRE(!s.instances.empty());
  const auto g = voxelize_scene(s, library());
  const CounterRng rng(5);
  int checked = 0;
  std::uint64_t c = 0;
  while (checked < 10000) {
    const auto& inst = s.instances[rng.below(c++, s.instances.size())];
    const auto tris = transform_instance(library().at(inst.asset_id), inst);
    const auto& t = tris[rng.below(c++, tris.size())];
    double u = rng.uniform(c++), v = rng.uniform(c++);
    if (u + v > 1) {
      u = 1 - u;
      v = 1 - v;
    }
    const Vec3 p = t.tri.a + u * (t.tri.b - t.tri.a) + v * (t.tri.c - t.tri.a);
    if (!s.extent.contains(p.head<2>())) continue;
    const auto* a = g.find(g.index_of(p));
    CHECK(a != nullptr);
    if (a) CHECK(a->semantic != Semantic::ground);
    ++checked;
  }
}

TEST_CASE("label soundness and ground/instance pairing") {
  const auto s = small_forest(12);
  const auto g = voxelize_scene(s, library());
  std::set<std::uint32_t> ids;
  for (const auto& t : s.instances) ids.insert(t.instance_id);
  g.for_each([&](const Vec3i& v, const VoxelAttr& a) {
    CHECK((a.semantic == Semantic::ground) == (a.instance_id == 0));
    if (a.instance_id) CHECK(ids.contains(a.instance_id));
    CHECK(a.opacity >= 0.0f);
    CHECK(a.opacity <= 1.0f);
    for (int k = 0; k < 3; ++k) {
      CHECK(v[k] >= g.min_index()[k]);
      CHECK(v[k] < g.min_index()[k] + g.dims()[k]);
    }
  });
}

TEST_CASE("voxelization is deterministic and worker independent") {
  const auto s = small_forest(13);
  VoxelizeOptions one, four;
  four.workers = 4;
  const auto a = voxelize_scene(s, library(), one), b = voxelize_scene(s, library(), four);
  CHECK(a.sorted_cells() == b.sorted_cells());
  CHECK(a.min_index() == b.min_index());
  CHECK(a.dims() == b.dims());
}

TEST_CASE("halving the voxel size never decreases occupancy") {
  const auto s = one_tree("pine_large", Vec3(5, 5, 0), 0.6);
  std::size_t prev = 0;
  for (double vs : {0.4, 0.2, 0.1}) {
    VoxelizeOptions opt;
    opt.voxel_size = vs;
    const auto n = voxelize_scene(s, library(), opt).size();
    CHECK(n >= prev);
    prev = n;
  }
}

TEST_CASE("wood wins over leaf inside a shared voxel") {
  // A wood and a leaf triangle of the same instance through the same voxel.
  TreeAsset a;
  a.asset_id = "mix";
  a.species = "x";
  a.mesh.vertices = {Vec3(0, 0, 0), Vec3(0.3, 0, 0), Vec3(0, 0, 2), Vec3(0, 0.3, 0), Vec3(0, 0.05, 2)};
  a.mesh.triangles = {{0, 1, 2}, {0, 3, 4}};
  a.mesh.material = {Material::leaf, Material::wood};
  normalize_asset(a);
  AssetLibrary lib;
  lib.add(a);
  ForestScene s;
  s.extent = Rect::from_size(2, 2);
  TreeInstance t;
  t.instance_id = 1;
  t.asset_id = "mix";
  t.position = Vec3(1.05, 1.05, 0);
  s.instances = {t};
  const auto g = voxelize_scene(s, lib);
  const auto* attr = g.find(g.index_of(Vec3(1.06, 1.06, 1.0)));
  REQUIRE(attr);
  CHECK(attr->semantic == Semantic::wood);
}

TEST_CASE("unknown asset reference is a configuration error") {
  auto s = one_tree("nope");
  CHECK_THROWS_AS(voxelize_scene(s, library()), ConfigError);
}

TEST_CASE("grid dump round trip and corruption") {
  const auto s = one_tree("spruce_sapling");
  const auto g = voxelize_scene(s, library());
  std::stringstream buf;
  write_grid(buf, g);
  const std::string bytes = buf.str();
  CHECK(bytes.substr(0, 4) == "SVXG");
  std::istringstream in(bytes);
  const auto h = read_grid(in);
  CHECK(h.sorted_cells() == g.sorted_cells());
  CHECK(h.voxel_size() == g.voxel_size());
  CHECK(h.min_index() == g.min_index());

  std::istringstream cut(bytes.substr(0, bytes.size() - 3));
  CHECK_THROWS_AS(read_grid(cut), ParseError);
  std::string bad = bytes;
  bad[0] = 'X';
  std::istringstream wrong(bad);
  try {
    read_grid(wrong);
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.offset() == 0);
  }
}
