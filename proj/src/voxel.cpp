#include "sylva/voxel.hpp"

#include "binary_io.hpp"

#include <algorithm>
#include <cmath>
#include <thread>
#include <tuple>

namespace sylva {

VoxelGrid::VoxelGrid(double voxel_size) : voxel_size_(voxel_size) {
  if (!(voxel_size > 0)) throw ValidationError("voxel_size must be positive");
}

void VoxelGrid::set(const Vec3i& v, const VoxelAttr& attr) {
  if (cells_.empty()) {
    min_index_ = v;
    dims_ = Vec3i::Ones();
  } else {
    const Vec3i hi = (min_index_ + dims_ - Vec3i::Ones()).cwiseMax(v);
    min_index_ = min_index_.cwiseMin(v);
    dims_ = hi - min_index_ + Vec3i::Ones();
  }
  cells_[pack(v)] = attr;
}

std::vector<std::pair<Vec3i, VoxelAttr>> VoxelGrid::sorted_cells() const {
  std::vector<std::pair<std::uint64_t, VoxelAttr>> raw(cells_.begin(), cells_.end());
  // Packed keys order by (x, y, z) because each field is offset to non-negative.
  std::sort(raw.begin(), raw.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
  std::vector<std::pair<Vec3i, VoxelAttr>> out;
  out.reserve(raw.size());
  for (const auto& [k, a] : raw) out.emplace_back(unpack(k), a);
  return out;
}

std::vector<WorldTriangle> transform_instance(const TreeAsset& asset, const TreeInstance& instance) {
  const auto& mesh = asset.mesh;
  std::vector<Vec3> world(mesh.vertices.size());
  for (std::size_t i = 0; i < world.size(); ++i)
    world[i] = rotate_yaw<double>(mesh.vertices[i] * instance.scale, instance.yaw) + instance.position;
  std::vector<WorldTriangle> out;
  out.reserve(mesh.triangles.size());
  for (std::size_t i = 0; i < mesh.triangles.size(); ++i) {
    const auto& t = mesh.triangles[i];
    out.push_back({{world[t[0]], world[t[1]], world[t[2]]}, mesh.material[i]});
  }
  return out;
}

namespace {

struct Candidate {
  bool leaf = false;
  double dist2 = 0.0;
  std::uint32_t instance_id = 0;

  // Wood before leaf, then nearest triangle centroid, then smaller id.
  bool beats(const Candidate& o) const {
    return std::tie(leaf, dist2, instance_id) < std::tie(o.leaf, o.dist2, o.instance_id);
  }
};

using CandidateMap = absl::flat_hash_map<std::uint64_t, Candidate>;

void offer(CandidateMap& map, std::uint64_t key, const Candidate& c) {
  auto [it, inserted] = map.try_emplace(key, c);
  if (!inserted && c.beats(it->second)) it->second = c;
}

void rasterize_instance(const TreeAsset& asset, const TreeInstance& inst, double voxel_size, CandidateMap& out) {
  for (const auto& wt : transform_instance(asset, inst)) {
    const Vec3 centroid = wt.tri.centroid();
    const bool leaf = wt.material == Material::leaf;
    rasterize_triangle(wt.tri, voxel_size, [&](const Vec3i& v, const Vec3& center) {
      offer(out, VoxelGrid::pack(v), {leaf, (centroid - center).squaredNorm(), inst.instance_id});
    });
  }
}

}  // namespace

VoxelGrid voxelize_scene(const ForestScene& scene, const AssetLibrary& library, const VoxelizeOptions& options) {
  if (!(options.voxel_size > 0)) throw ValidationError("voxel_size must be positive");
  for (double o : {options.opacity.wood, options.opacity.leaf})
    if (!(o >= 0 && o <= 1)) throw ValidationError("opacity values must lie in [0, 1]");
  std::vector<const TreeAsset*> assets;
  assets.reserve(scene.instances.size());
  for (const auto& inst : scene.instances) {
    if (!(inst.scale > 0)) throw ValidationError("instance scale must be positive");
    assets.push_back(&library.at(inst.asset_id));
  }

  const int workers = std::max(1, std::min<int>(options.workers, static_cast<int>(scene.instances.size())));
  std::vector<CandidateMap> partial(static_cast<std::size_t>(workers));
  auto work = [&](int w) {
    for (std::size_t i = static_cast<std::size_t>(w); i < scene.instances.size(); i += static_cast<std::size_t>(workers))
      rasterize_instance(*assets[i], scene.instances[i], options.voxel_size, partial[static_cast<std::size_t>(w)]);
  };
  if (workers == 1) {
    work(0);
  } else {
    std::vector<std::jthread> threads;
    for (int w = 0; w < workers; ++w) threads.emplace_back(work, w);
  }
  for (std::size_t w = 1; w < partial.size(); ++w) {
    for (const auto& [k, c] : partial[w]) offer(partial[0], k, c);
    CandidateMap().swap(partial[w]);
  }

  VoxelGrid grid(options.voxel_size);
  grid.set_extent(scene.extent);
  for (const auto& [k, c] : partial[0]) {
    const Semantic s = c.leaf ? Semantic::leaf : Semantic::wood;
    grid.set(VoxelGrid::unpack(k), {c.instance_id, s, static_cast<float>(options.opacity[s])});
  }

  // One-voxel ground layer whose top face sits at the terrain height. Tree
  // voxels take precedence.
  const double vs = options.voxel_size;
  constexpr double eps = 1e-9;
  const int i0 = static_cast<int>(std::floor(scene.extent.min.x() / vs + eps));
  const int i1 = static_cast<int>(std::ceil(scene.extent.max.x() / vs - eps));
  const int j0 = static_cast<int>(std::floor(scene.extent.min.y() / vs + eps));
  const int j1 = static_cast<int>(std::ceil(scene.extent.max.y() / vs - eps));
  for (int i = i0; i < i1; ++i)
    for (int j = j0; j < j1; ++j) {
      const double h = scene.terrain.height(Vec2((i + 0.5) * vs, (j + 0.5) * vs));
      const Vec3i v(i, j, static_cast<int>(std::ceil(h / vs - eps)) - 1);
      if (!grid.find(v)) grid.set(v, {0, Semantic::ground, 1.0f});
    }
  return grid;
}

void write_grid(std::ostream& out, const VoxelGrid& grid) {
  detail::ByteWriter w;
  w.put_bytes("SVXG", 4);
  w.put<double>(grid.voxel_size());
  const Vec3 o = grid.origin();
  for (int a = 0; a < 3; ++a) w.put<double>(o[a]);
  for (int a = 0; a < 3; ++a) w.put<std::int32_t>(grid.dims()[a]);
  const auto cells = grid.sorted_cells();
  w.put<std::uint64_t>(cells.size());
  for (const auto& [v, attr] : cells) {
    const Vec3i rel = v - grid.min_index();
    for (int a = 0; a < 3; ++a) w.put<std::int32_t>(rel[a]);
    w.put<std::uint32_t>(attr.instance_id);
    w.put<std::uint8_t>(static_cast<std::uint8_t>(attr.semantic));
    w.put<float>(attr.opacity);
    if (w.size() > (1u << 20)) w.flush_to(out);
  }
  w.flush_to(out);
}

VoxelGrid read_grid(std::istream& in) {
  detail::ByteReader r(in);
  r.expect_magic("SVXG");
  const double vs = r.get<double>("voxel_size");
  if (!(vs > 0)) throw ParseError("non-positive voxel size", r.offset() - 8);
  Vec3 origin;
  for (int a = 0; a < 3; ++a) origin[a] = r.get<double>("origin");
  Vec3i dims;
  for (int a = 0; a < 3; ++a) dims[a] = r.get<std::int32_t>("dims");
  const auto count = r.get<std::uint64_t>("cell count");
  constexpr std::size_t kRecord = 3 * 4 + 4 + 1 + 4;
  if (count > r.remaining() / kRecord) r.require(count * kRecord, "cell records");
  const Vec3i min_index = (origin / vs).array().round().cast<int>().matrix();

  VoxelGrid grid(vs);
  for (std::uint64_t c = 0; c < count; ++c) {
    const auto at = r.offset();
    Vec3i v;
    for (int a = 0; a < 3; ++a) v[a] = r.get<std::int32_t>("cell coordinate");
    if ((v.array() < 0).any() || (v.array() >= dims.array()).any())
      throw ParseError("cell coordinate outside grid dims", at);
    VoxelAttr attr;
    attr.instance_id = r.get<std::uint32_t>("instance id");
    const auto s = r.get<std::uint8_t>("semantic");
    if (s > 2) throw ParseError("unknown semantic code " + std::to_string(s), r.offset() - 1);
    attr.semantic = static_cast<Semantic>(s);
    attr.opacity = r.get<float>("opacity");
    grid.set(v + min_index, attr);
  }
  const Vec3 lo = grid.origin(), hi = grid.upper();
  grid.set_extent({lo.head<2>(), hi.head<2>()});
  return grid;
}

}  // namespace sylva
