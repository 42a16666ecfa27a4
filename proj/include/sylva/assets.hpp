#pragma once

#include "sylva/common.hpp"
#include "sylva/geometry.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <string>
#include <unordered_map>
#include <vector>

namespace sylva {

enum class Material : std::uint8_t { wood = 1, leaf = 2 };

inline Semantic to_semantic(Material m) {
  return m == Material::wood ? Semantic::wood : Semantic::leaf;
}

enum class CanopyLevel : std::uint8_t { large, medium, sapling };

const char* to_string(CanopyLevel level);
CanopyLevel canopy_level_from_string(const std::string& name);

struct TriMesh {
  std::vector<Vec3> vertices;
  std::vector<std::array<std::uint32_t, 3>> triangles;
  std::vector<Material> material;  // one per triangle

  std::size_t count(Material m) const;
  Triangle triangle(std::size_t i) const {
    const auto& t = triangles[i];
    return {vertices[t[0]], vertices[t[1]], vertices[t[2]]};
  }
  Eigen::AlignedBox3d bounds() const;
};

struct TreeAsset {
  std::string asset_id;
  std::string species;
  CanopyLevel canopy_level = CanopyLevel::large;
  TriMesh mesh;
  double base_height = 0.0;
  double crown_radius = 0.0;
  double trunk_radius = 0.0;
};

/// Result of `load_asset`; `dropped_degenerate` counts zero-area input faces.
struct LoadedAsset {
  TreeAsset asset;
  std::size_t dropped_degenerate = 0;
};

/// Descriptor sidecar for a mesh file: species, canopy level, and the
/// material class of every named group.
struct AssetDescriptor {
  std::string asset_id;  // defaults to the mesh file stem when empty
  std::string species;
  CanopyLevel canopy_level = CanopyLevel::large;
  std::map<std::string, Material> groups;

  static AssetDescriptor read(const std::filesystem::path& path);
};

/// Parses the ASCII mesh format (`v`, `g`, `f` lines; 1-based faces) and
/// normalizes the result. Faces before the first `g` belong to group "default".
LoadedAsset load_asset(const std::filesystem::path& mesh_path, const AssetDescriptor& meta);
LoadedAsset parse_asset(std::istream& mesh, const AssetDescriptor& meta);

void write_mesh(std::ostream& out, const TriMesh& mesh);

enum class CrownShape : std::uint8_t { cone, ellipsoid };

struct ParametricTreeSpec {
  std::string asset_id;
  std::string species = "generic";
  CanopyLevel canopy_level = CanopyLevel::large;
  double height = 20.0;
  CrownShape crown_shape = CrownShape::cone;
  double crown_radius = 4.0;
  double crown_base_fraction = 0.4;
  int leaf_panel_count = 400;
  std::uint64_t rng_seed = 0;
};

/// Closed wood cylinder from the ground to the tree top plus a leaf shell of
/// `leaf_panel_count` quads over the crown surface. Pure function of `spec`.
TreeAsset make_parametric_tree(const ParametricTreeSpec& spec);

/// Recomputes base height, crown and trunk radii from the mesh and shifts it so
/// min z = 0 with the trunk axis on the z axis.
void normalize_asset(TreeAsset& asset);

/// Throws ValidationError if any TreeAsset invariant is violated.
void validate(const TreeAsset& asset);

class AssetLibrary {
 public:
  AssetLibrary() = default;

  void add(TreeAsset asset);
  bool contains(const std::string& asset_id) const;
  const TreeAsset& at(const std::string& asset_id) const;
  std::vector<const TreeAsset*> find(const std::string& species, CanopyLevel level) const;
  const std::vector<std::shared_ptr<const TreeAsset>>& assets() const { return assets_; }
  std::size_t size() const { return assets_.size(); }

 private:
  std::vector<std::shared_ptr<const TreeAsset>> assets_;
  std::unordered_map<std::string, std::size_t> by_id_;
};

/// A small built-in library (conifers, broadleaves and saplings) used when no
/// external meshes are configured.
AssetLibrary default_parametric_library(int leaf_panels = 400);

}  // namespace sylva
