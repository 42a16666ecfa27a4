#include "sylva/assets.hpp"

#include "sylva/random.hpp"

#include <nlohmann/json.hpp>

#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

namespace sylva {

namespace {

constexpr double kDegenerateArea = 1e-12;

// Vertices this close above the lowest point define the trunk footprint.
double trunk_slab_height(double height) { return std::max(0.02 * height, 1e-6); }

}  // namespace

const char* to_string(Semantic s) {
  switch (s) {
    case Semantic::ground: return "ground";
    case Semantic::wood: return "wood";
    case Semantic::leaf: return "leaf";
  }
  return "?";
}

Semantic semantic_from_string(const std::string& name) {
  if (name == "ground") return Semantic::ground;
  if (name == "wood") return Semantic::wood;
  if (name == "leaf") return Semantic::leaf;
  throw ConfigError("unknown semantic class '" + name + "'");
}

const char* to_string(CanopyLevel level) {
  switch (level) {
    case CanopyLevel::large: return "large";
    case CanopyLevel::medium: return "medium";
    case CanopyLevel::sapling: return "sapling";
  }
  return "?";
}

CanopyLevel canopy_level_from_string(const std::string& name) {
  if (name == "large") return CanopyLevel::large;
  if (name == "medium") return CanopyLevel::medium;
  if (name == "sapling") return CanopyLevel::sapling;
  throw ConfigError("unknown canopy level '" + name + "'");
}

std::size_t TriMesh::count(Material m) const {
  return static_cast<std::size_t>(std::count(material.begin(), material.end(), m));
}

Eigen::AlignedBox3d TriMesh::bounds() const {
  Eigen::AlignedBox3d box;
  for (const auto& v : vertices) box.extend(v);
  return box;
}

AssetDescriptor AssetDescriptor::read(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open asset descriptor " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError("descriptor " + path.string() + ": " + e.what(), e.byte);
  }
  AssetDescriptor d;
  d.asset_id = j.value("asset_id", "");
  d.species = j.value("species", "unknown");
  d.canopy_level = canopy_level_from_string(j.value("canopy_level", "large"));
  if (j.contains("groups")) {
    for (const auto& [name, value] : j.at("groups").items()) {
      const auto m = value.get<std::string>();
      if (m == "wood") {
        d.groups[name] = Material::wood;
      } else if (m == "leaf") {
        d.groups[name] = Material::leaf;
      } else {
        throw ConfigError("group '" + name + "' maps to unknown material '" + m + "'");
      }
    }
  }
  return d;
}

LoadedAsset load_asset(const std::filesystem::path& mesh_path, const AssetDescriptor& meta) {
  std::ifstream in(mesh_path);
  if (!in) throw ConfigError("cannot open mesh file " + mesh_path.string());
  AssetDescriptor d = meta;
  if (d.asset_id.empty()) d.asset_id = mesh_path.stem().string();
  return parse_asset(in, d);
}

LoadedAsset parse_asset(std::istream& in, const AssetDescriptor& meta) {
  std::vector<Vec3> vertices;
  struct Face {
    std::array<std::int64_t, 3> idx;
    std::string group;
    std::uint64_t line;
  };
  std::vector<Face> faces;
  std::string group = "default";
  std::string line;
  std::uint64_t line_no = 0;

  auto parse_index = [&](const std::string& tok) -> std::int64_t {
    // Accept OBJ-style "i/t/n" by reading the leading integer.
    std::size_t used = 0;
    std::int64_t value = 0;
    try {
      value = std::stoll(tok, &used);
    } catch (const std::exception&) {
      throw ParseError("bad face index '" + tok + "'", line_no);
    }
    if (used != tok.size() && tok[used] != '/')
      throw ParseError("bad face index '" + tok + "'", line_no);
    return value;
  };

  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream ls(line);
    std::string kw;
    if (!(ls >> kw) || kw[0] == '#') continue;
    if (kw == "v") {
      double x, y, z;
      if (!(ls >> x >> y >> z)) throw ParseError("malformed vertex line", line_no);
      if (!std::isfinite(x) || !std::isfinite(y) || !std::isfinite(z))
        throw ParseError("non-finite vertex coordinate", line_no);
      vertices.emplace_back(x, y, z);
    } else if (kw == "g") {
      std::string name;
      if (!(ls >> name)) throw ParseError("group line without a name", line_no);
      group = name;
    } else if (kw == "f") {
      std::vector<std::string> toks;
      for (std::string t; ls >> t;) toks.push_back(t);
      if (toks.size() != 3) throw ParseError("face must have exactly 3 indices", line_no);
      Face f{{parse_index(toks[0]), parse_index(toks[1]), parse_index(toks[2])}, group, line_no};
      faces.push_back(std::move(f));
    } else if (kw == "vn" || kw == "vt" || kw == "o" || kw == "s" || kw == "usemtl" ||
               kw == "mtllib") {
      continue;
    } else {
      throw ParseError("unknown keyword '" + kw + "'", line_no);
    }
  }

  LoadedAsset out;
  TreeAsset& asset = out.asset;
  asset.asset_id = meta.asset_id;
  asset.species = meta.species;
  asset.canopy_level = meta.canopy_level;

  // Index range is checked against the final vertex count, so faces may
  // precede the vertices they use.
  std::vector<std::int64_t> remap(vertices.size(), -1);
  for (const auto& f : faces) {
    const auto it = meta.groups.find(f.group);
    if (it == meta.groups.end())
      throw ConfigError("mesh group '" + f.group + "' has no material mapping");
    std::array<std::uint32_t, 3> tri{};
    for (int k = 0; k < 3; ++k) {
      const auto i = f.idx[k];
      if (i < 1 || i > static_cast<std::int64_t>(vertices.size()))
        throw ParseError("face index " + std::to_string(i) + " out of range", f.line);
      tri[k] = static_cast<std::uint32_t>(i - 1);
    }
    const Triangle t{vertices[tri[0]], vertices[tri[1]], vertices[tri[2]]};
    if (t.area() <= kDegenerateArea) {
      ++out.dropped_degenerate;
      continue;
    }
    for (auto& v : tri) {
      if (remap[v] < 0) {
        remap[v] = static_cast<std::int64_t>(asset.mesh.vertices.size());
        asset.mesh.vertices.push_back(vertices[v]);
      }
      v = static_cast<std::uint32_t>(remap[v]);
    }
    asset.mesh.triangles.push_back(tri);
    asset.mesh.material.push_back(it->second);
  }
  if (asset.mesh.triangles.empty()) throw DataError("mesh for '" + meta.asset_id + "' has no usable triangles");

  normalize_asset(asset);
  validate(asset);
  return out;
}

void write_mesh(std::ostream& out, const TriMesh& mesh) {
  out.precision(17);
  for (const auto& v : mesh.vertices) out << "v " << v.x() << ' ' << v.y() << ' ' << v.z() << '\n';
  for (Material m : {Material::wood, Material::leaf}) {
    bool header = false;
    for (std::size_t i = 0; i < mesh.triangles.size(); ++i) {
      if (mesh.material[i] != m) continue;
      if (!header) {
        out << "g " << (m == Material::wood ? "wood" : "leaf") << '\n';
        header = true;
      }
      const auto& t = mesh.triangles[i];
      out << "f " << t[0] + 1 << ' ' << t[1] + 1 << ' ' << t[2] + 1 << '\n';
    }
  }
}

void normalize_asset(TreeAsset& asset) {
  auto& verts = asset.mesh.vertices;
  if (verts.empty()) throw DataError("asset '" + asset.asset_id + "' has an empty mesh");
  const auto box = asset.mesh.bounds();
  const double zmin = box.min().z();
  const double height = box.max().z() - zmin;
  const double slab = trunk_slab_height(height);

  // Trunk axis: xy centroid of the lowest slab, preferring wood vertices.
  std::vector<char> is_wood(verts.size(), 0);
  for (std::size_t i = 0; i < asset.mesh.triangles.size(); ++i)
    if (asset.mesh.material[i] == Material::wood)
      for (auto v : asset.mesh.triangles[i]) is_wood[v] = 1;
  const bool any_wood = std::find(is_wood.begin(), is_wood.end(), 1) != is_wood.end();

  Vec2 axis = Vec2::Zero();
  std::size_t n = 0;
  for (std::size_t i = 0; i < verts.size(); ++i) {
    if (verts[i].z() - zmin > slab || (any_wood && !is_wood[i])) continue;
    axis += verts[i].head<2>();
    ++n;
  }
  if (n == 0) {
    for (const auto& v : verts)
      if (v.z() - zmin <= slab) {
        axis += v.head<2>();
        ++n;
      }
  }
  axis /= static_cast<double>(n);

  const Vec3 shift(axis.x(), axis.y(), zmin);
  for (auto& v : verts) v -= shift;

  double trunk = 0.0, crown = 0.0;
  const bool any_leaf = asset.mesh.count(Material::leaf) > 0;
  std::vector<char> is_leaf(verts.size(), 0);
  for (std::size_t i = 0; i < asset.mesh.triangles.size(); ++i)
    if (asset.mesh.material[i] == Material::leaf)
      for (auto v : asset.mesh.triangles[i]) is_leaf[v] = 1;
  for (std::size_t i = 0; i < verts.size(); ++i) {
    const double r = verts[i].head<2>().norm();
    if (verts[i].z() <= slab && (!any_wood || is_wood[i])) trunk = std::max(trunk, r);
    if (!any_leaf || is_leaf[i]) crown = std::max(crown, r);
  }
  asset.base_height = height;
  asset.trunk_radius = std::max(trunk, 0.01);
  asset.crown_radius = std::max(crown, asset.trunk_radius);
}

void validate(const TreeAsset& asset) {
  const auto fail = [&](const std::string& what) {
    throw ValidationError("asset '" + asset.asset_id + "': " + what);
  };
  const auto& mesh = asset.mesh;
  if (mesh.triangles.empty()) fail("mesh is empty");
  if (mesh.material.size() != mesh.triangles.size()) fail("material count differs from triangle count");
  if (!(asset.base_height > 0)) fail("base_height must be positive");
  if (!(asset.crown_radius > 0)) fail("crown_radius must be positive");
  if (!(asset.trunk_radius > 0)) fail("trunk_radius must be positive");
  double zmin = std::numeric_limits<double>::infinity();
  for (const auto& v : mesh.vertices) {
    if (!v.allFinite()) fail("non-finite vertex");
    zmin = std::min(zmin, v.z());
  }
  if (std::abs(zmin) > 1e-9) fail("mesh is not normalized to min z = 0");
  for (const auto& t : mesh.triangles)
    for (auto v : t)
      if (v >= mesh.vertices.size()) fail("triangle index out of range");
}

TreeAsset make_parametric_tree(const ParametricTreeSpec& spec) {
  if (!(spec.height > 0)) throw ValidationError("parametric tree height must be positive");
  if (!(spec.crown_radius > 0)) throw ValidationError("parametric tree crown_radius must be positive");
  if (!(spec.crown_base_fraction > 0 && spec.crown_base_fraction < 1))
    throw ValidationError("crown_base_fraction must lie in (0, 1)");
  if (spec.leaf_panel_count < 0) throw ValidationError("leaf_panel_count must be non-negative");

  TreeAsset asset;
  asset.asset_id = spec.asset_id;
  asset.species = spec.species;
  asset.canopy_level = spec.canopy_level;
  TriMesh& mesh = asset.mesh;

  auto add_triangle = [&mesh](const Vec3& a, const Vec3& b, const Vec3& c, Material m) {
    if (Triangle{a, b, c}.area() <= kDegenerateArea) return;
    const auto base = static_cast<std::uint32_t>(mesh.vertices.size());
    mesh.vertices.push_back(a);
    mesh.vertices.push_back(b);
    mesh.vertices.push_back(c);
    mesh.triangles.push_back({base, base + 1, base + 2});
    mesh.material.push_back(m);
  };

  // Trunk: closed cylinder, shared ring vertices.
  const double h = spec.height;
  const double trunk_r = std::min(0.05 + 0.012 * h, 0.5 * spec.crown_radius);
  constexpr int kSides = 12;
  const auto ring0 = static_cast<std::uint32_t>(mesh.vertices.size());
  for (int ring = 0; ring < 2; ++ring)
    for (int s = 0; s < kSides; ++s) {
      const double a = 2.0 * std::numbers::pi * s / kSides;
      mesh.vertices.emplace_back(trunk_r * std::cos(a), trunk_r * std::sin(a), ring * h);
    }
  const auto bottom = static_cast<std::uint32_t>(mesh.vertices.size());
  mesh.vertices.emplace_back(0.0, 0.0, 0.0);
  const auto top = bottom + 1;
  mesh.vertices.emplace_back(0.0, 0.0, h);
  for (std::uint32_t s = 0; s < kSides; ++s) {
    const std::uint32_t s1 = (s + 1) % kSides;
    const std::uint32_t a = ring0 + s, b = ring0 + s1, c = ring0 + kSides + s1, d = ring0 + kSides + s;
    mesh.triangles.push_back({a, b, c});
    mesh.triangles.push_back({a, c, d});
    mesh.triangles.push_back({bottom, b, a});
    mesh.triangles.push_back({top, d, c});
    for (int k = 0; k < 4; ++k) mesh.material.push_back(Material::wood);
  }

  // Crown shell. Surface parameter v runs 0 (top) .. 1 (crown base).
  const double zb = spec.crown_base_fraction * h;
  const double R = spec.crown_radius;
  auto surface = [&](double v, double theta) -> Vec3 {
    if (spec.crown_shape == CrownShape::cone) {
      const double r = R * v;
      return {r * std::cos(theta), r * std::sin(theta), h - v * (h - zb)};
    }
    const double phi = v * std::numbers::pi;
    const double zc = 0.5 * (zb + h), c = 0.5 * (h - zb);
    return {R * std::sin(phi) * std::cos(theta), R * std::sin(phi) * std::sin(theta),
            zc + c * std::cos(phi)};
  };

  const int panels = spec.leaf_panel_count;
  if (panels > 0) {
    const int rows = std::max(1, static_cast<int>(std::lround(std::sqrt(panels / 2.0))));
    const CounterRng rng(spec.rng_seed, {fnv1a("leaf-panels")});
    int panel = 0;
    for (int row = 0; row < rows; ++row) {
      const int cols = panels / rows + (row < panels % rows ? 1 : 0);
      const double v0 = static_cast<double>(row) / rows, v1 = static_cast<double>(row + 1) / rows;
      const double dv = v1 - v0, dt = 2.0 * std::numbers::pi / cols;
      const double phase = rng.uniform(static_cast<std::uint64_t>(1'000'000 + row)) * dt;
      for (int col = 0; col < cols; ++col, ++panel) {
        const auto p = rng.child(static_cast<std::uint64_t>(panel));
        auto corner = [&](int k, double v, double t) {
          const double jv = std::clamp(v + (p.uniform(2 * k) - 0.5) * 0.3 * dv, 0.0, 1.0);
          const double jt = t + (p.uniform(2 * k + 1) - 0.5) * 0.3 * dt;
          return surface(jv, jt);
        };
        const double t0 = phase + col * dt, t1 = t0 + dt;
        const Vec3 c00 = corner(0, v0, t0), c10 = corner(1, v0, t1);
        const Vec3 c11 = corner(2, v1, t1), c01 = corner(3, v1, t0);
        add_triangle(c00, c10, c11, Material::leaf);
        add_triangle(c00, c11, c01, Material::leaf);
      }
    }
  }

  normalize_asset(asset);
  validate(asset);
  return asset;
}

void AssetLibrary::add(TreeAsset asset) {
  if (by_id_.contains(asset.asset_id))
    throw ConfigError("duplicate asset_id '" + asset.asset_id + "'");
  by_id_.emplace(asset.asset_id, assets_.size());
  assets_.push_back(std::make_shared<const TreeAsset>(std::move(asset)));
}

bool AssetLibrary::contains(const std::string& asset_id) const { return by_id_.contains(asset_id); }

const TreeAsset& AssetLibrary::at(const std::string& asset_id) const {
  const auto it = by_id_.find(asset_id);
  if (it == by_id_.end()) throw ConfigError("unknown asset_id '" + asset_id + "'");
  return *assets_[it->second];
}

std::vector<const TreeAsset*> AssetLibrary::find(const std::string& species, CanopyLevel level) const {
  std::vector<const TreeAsset*> out;
  for (const auto& a : assets_)
    if (a->species == species && a->canopy_level == level) out.push_back(a.get());
  return out;
}

AssetLibrary default_parametric_library(int leaf_panels) {
  const int small_panels = std::max(0, leaf_panels / 3);
  const std::vector<ParametricTreeSpec> specs{
      {"spruce_large", "spruce", CanopyLevel::large, 24.0, CrownShape::cone, 3.5, 0.30, leaf_panels, 11},
      {"pine_large", "pine", CanopyLevel::large, 21.0, CrownShape::ellipsoid, 3.8, 0.55, leaf_panels, 12},
      {"beech_large", "beech", CanopyLevel::large, 19.0, CrownShape::ellipsoid, 4.5, 0.40, leaf_panels, 13},
      {"spruce_medium", "spruce", CanopyLevel::medium, 13.0, CrownShape::cone, 2.4, 0.25, leaf_panels, 14},
      {"beech_medium", "beech", CanopyLevel::medium, 11.0, CrownShape::ellipsoid, 3.0, 0.40, leaf_panels, 15},
      {"spruce_sapling", "spruce", CanopyLevel::sapling, 4.0, CrownShape::cone, 1.1, 0.15, small_panels, 16},
      {"hazel_sapling", "hazel", CanopyLevel::sapling, 3.0, CrownShape::ellipsoid, 1.3, 0.20, small_panels, 17},
  };
  AssetLibrary lib;
  for (const auto& s : specs) lib.add(make_parametric_tree(s));
  return lib;
}

}  // namespace sylva
