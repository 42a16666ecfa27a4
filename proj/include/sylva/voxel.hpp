#pragma once

#include "sylva/assets.hpp"
#include "sylva/common.hpp"
#include "sylva/procgen.hpp"

#include <absl/container/flat_hash_map.h>

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <vector>

namespace sylva {

struct VoxelAttr {
  std::uint32_t instance_id = 0;  // 0 = ground / none
  Semantic semantic = Semantic::ground;
  float opacity = 1.0f;  // probability that a traversing pulse returns here

  bool operator==(const VoxelAttr&) const = default;
};

/// Sparse attributed voxel grid. Voxel (i, j, k) covers the half-open box
/// [i, i+1) x [j, j+1) x [k, k+1) scaled by `voxel_size`; indices are absolute,
/// so a point's voxel is floor(p / voxel_size) regardless of the grid bounds.
class VoxelGrid {
 public:
  VoxelGrid() = default;
  explicit VoxelGrid(double voxel_size);

  double voxel_size() const { return voxel_size_; }
  const Vec3i& min_index() const { return min_index_; }
  const Vec3i& dims() const { return dims_; }
  Vec3 origin() const { return min_index_.cast<double>() * voxel_size_; }
  Vec3 upper() const { return (min_index_ + dims_).cast<double>() * voxel_size_; }

  /// Ground rectangle the grid was built for; survey output is cropped to it.
  const Rect& extent() const { return extent_; }
  void set_extent(const Rect& r) { extent_ = r; }

  std::size_t size() const { return cells_.size(); }
  bool empty() const { return cells_.empty(); }

  const VoxelAttr* find(const Vec3i& v) const {
    const auto it = cells_.find(pack(v));
    return it == cells_.end() ? nullptr : &it->second;
  }
  Vec3i index_of(const Vec3& p) const {
    return (p / voxel_size_).array().floor().cast<int>().matrix();
  }
  Eigen::AlignedBox3d box_of(const Vec3i& v) const {
    const Vec3 lo = v.cast<double>() * voxel_size_;
    return {lo, lo + Vec3::Constant(voxel_size_)};
  }

  /// Inserts or overwrites; grows the bounds to include `v`.
  void set(const Vec3i& v, const VoxelAttr& attr);

  /// Occupied voxels sorted by (x, y, z).
  std::vector<std::pair<Vec3i, VoxelAttr>> sorted_cells() const;

  template <typename Fn>
  void for_each(Fn&& fn) const {
    for (const auto& [key, attr] : cells_) fn(unpack(key), attr);
  }

  static std::uint64_t pack(const Vec3i& v) {
    constexpr std::int64_t off = std::int64_t{1} << 20;
    return (static_cast<std::uint64_t>(v.x() + off) << 42) | (static_cast<std::uint64_t>(v.y() + off) << 21) |
           static_cast<std::uint64_t>(v.z() + off);
  }
  static Vec3i unpack(std::uint64_t key) {
    constexpr std::int64_t off = std::int64_t{1} << 20;
    constexpr std::uint64_t mask = (std::uint64_t{1} << 21) - 1;
    return {static_cast<int>(static_cast<std::int64_t>((key >> 42) & mask) - off),
            static_cast<int>(static_cast<std::int64_t>((key >> 21) & mask) - off),
            static_cast<int>(static_cast<std::int64_t>(key & mask) - off)};
  }

 private:
  double voxel_size_ = 0.1;
  Vec3i min_index_ = Vec3i::Zero();
  Vec3i dims_ = Vec3i::Zero();
  Rect extent_;
  absl::flat_hash_map<std::uint64_t, VoxelAttr> cells_;
};

/// Opacity per semantic class. Ground is always opaque.
struct OpacityTable {
  double wood = 1.0;
  double leaf = 0.35;

  double operator[](Semantic s) const {
    switch (s) {
      case Semantic::ground: return 1.0;
      case Semantic::wood: return wood;
      case Semantic::leaf: return leaf;
    }
    return 1.0;
  }
};

struct WorldTriangle {
  Triangle tri;
  Material material = Material::wood;
};

/// World-space triangles of one placed instance: R_yaw(v * scale) + position.
std::vector<WorldTriangle> transform_instance(const TreeAsset& asset, const TreeInstance& instance);

/// Conservative rasterization of triangles into one instance's voxels.
/// Candidate voxels are those between floor(bbox min) and floor(bbox max).
template <typename Fn>
void rasterize_triangle(const Triangle& tri, double voxel_size, Fn&& visit);

struct VoxelizeOptions {
  double voxel_size = 0.1;
  OpacityTable opacity;
  int workers = 1;
};

VoxelGrid voxelize_scene(const ForestScene& scene, const AssetLibrary& library,
                         const VoxelizeOptions& options = {});

/// Binary grid dump ("SVXG", little-endian). Coordinates are written relative
/// to the grid's min index.
void write_grid(std::ostream& out, const VoxelGrid& grid);
VoxelGrid read_grid(std::istream& in);

// -- implementation ---------------------------------------------------------

template <typename Fn>
void rasterize_triangle(const Triangle& tri, double voxel_size, Fn&& visit) {
  const Vec3 lo = tri.a.cwiseMin(tri.b).cwiseMin(tri.c);
  const Vec3 hi = tri.a.cwiseMax(tri.b).cwiseMax(tri.c);
  const Vec3i i0 = (lo / voxel_size).array().floor().cast<int>().matrix();
  const Vec3i i1 = (hi / voxel_size).array().floor().cast<int>().matrix();
  const Vec3 half = Vec3::Constant(0.5 * voxel_size * (1.0 + 1e-9));
  for (int x = i0.x(); x <= i1.x(); ++x)
    for (int y = i0.y(); y <= i1.y(); ++y)
      for (int z = i0.z(); z <= i1.z(); ++z) {
        const Vec3i v(x, y, z);
        const Vec3 center = (v.cast<double>() + Vec3::Constant(0.5)) * voxel_size;
        if (triangle_box_overlap(center, half, tri)) visit(v, center);
      }
}

}  // namespace sylva
