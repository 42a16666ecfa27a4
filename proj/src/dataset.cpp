#include "sylva/dataset.hpp"

#include "sylva/random.hpp"
#include "sylva/voxel.hpp"

#include <nlohmann/json.hpp>

#include <absl/container/flat_hash_map.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

namespace sylva {

std::optional<std::uint8_t> LabelSet::code_of(const std::string& label) const {
  for (const auto& [code, name] : labels)
    if (name == label) return code;
  return std::nullopt;
}

std::string LabelSet::name_of(std::uint8_t code) const {
  for (const auto& [c, name] : labels)
    if (c == code) return name;
  return "#" + std::to_string(code);
}

LabelSet native_labels() { return {"native", {{0, "ground"}, {1, "wood"}, {2, "leaf"}}}; }

LabelSet forest_five_class_labels() {
  return {"five_class",
          {{1, "low_vegetation"}, {2, "ground"}, {4, "stem"}, {5, "live_branches"}, {6, "woody_branches"}}};
}

LabelSet binary_labels() { return {"binary", {{0, "non_tree"}, {1, "tree"}}}; }

SemanticMapping SemanticMapping::identity(const LabelSet& labels) {
  SemanticMapping m{labels, labels, {}};
  for (const auto& [code, name] : labels.labels) m.table[code] = code;
  return m;
}

SemanticMapping SemanticMapping::from_names(const LabelSet& source, const LabelSet& target,
                                            const std::map<std::string, std::string>& names) {
  SemanticMapping m{source, target, {}};
  for (const auto& [from, to] : names) {
    const auto a = source.code_of(from);
    if (!a) throw ConfigError("label '" + from + "' is not in label set '" + source.name + "'");
    const auto b = target.code_of(to);
    if (!b) throw ConfigError("label '" + to + "' is not in label set '" + target.name + "'");
    m.table[*a] = *b;
  }
  return m;
}

SemanticMapping five_class_to_binary() {
  return SemanticMapping::from_names(forest_five_class_labels(), binary_labels(),
                                     {{"stem", "tree"},
                                      {"woody_branches", "tree"},
                                      {"live_branches", "tree"},
                                      {"low_vegetation", "non_tree"},
                                      {"ground", "non_tree"}});
}

SemanticMapping native_to_binary() {
  return SemanticMapping::from_names(native_labels(), binary_labels(),
                                     {{"ground", "non_tree"}, {"wood", "tree"}, {"leaf", "tree"}});
}

PointCloud remap_semantics(const PointCloud& cloud, const SemanticMapping& mapping) {
  std::array<int, 256> lut;
  lut.fill(-1);
  for (const auto& [a, b] : mapping.table) lut[a] = b;
  PointCloud out = cloud;
  for (auto& p : out.points) {
    const int to = lut[p.semantic];
    if (to < 0)
      throw DataError("label '" + mapping.source.name_of(p.semantic) + "' has no entry in the semantic mapping");
    p.semantic = static_cast<std::uint8_t>(to);
  }
  return out;
}

std::string Plot::id() const {
  return scene + "_" + std::to_string(tile_index[0]) + "_" + std::to_string(tile_index[1]);
}

std::vector<Plot> tile(const PointCloud& cloud, double tile_size, const std::string& scene) {
  if (!(tile_size > 0)) throw ValidationError("tile_size must be > 0");
  if (cloud.empty()) return {};
  const Rect& ext = cloud.extent;
  const auto tiles_along = [&](double width) {
    return std::max<int>(1, static_cast<int>(std::ceil(width / tile_size - 1e-9)));
  };
  const int nx = tiles_along(ext.width()), ny = tiles_along(ext.depth());

  std::map<std::pair<int, int>, std::vector<LidarPoint>> buckets;
  for (const auto& p : cloud.points) {
    if (!ext.contains(p.position.head<2>()))
      throw DataError("point outside the cloud extent cannot be tiled");
    const int i = std::min(nx - 1, static_cast<int>(std::floor((p.position.x() - ext.min.x()) / tile_size)));
    const int j = std::min(ny - 1, static_cast<int>(std::floor((p.position.y() - ext.min.y()) / tile_size)));
    buckets[{i, j}].push_back(p);
  }

  std::vector<Plot> plots;
  plots.reserve(buckets.size());
  for (auto& [ij, pts] : buckets) {
    Plot plot;
    plot.scene = scene;
    plot.tile_index = {ij.first, ij.second};
    const Vec2 lo = ext.min + tile_size * Vec2(ij.first, ij.second);
    const Vec2 hi = (lo + Vec2::Constant(tile_size)).cwiseMin(ext.max);
    plot.bounds = {lo, hi};
    plot.edge = (hi - lo).minCoeff() < tile_size - 1e-9;
    plot.cloud.points = std::move(pts);
    plot.cloud.extent = plot.bounds;
    plot.cloud.provenance = cloud.provenance;
    plot.density = static_cast<double>(plot.cloud.size()) / plot.bounds.area();
    plots.push_back(std::move(plot));
  }
  return plots;
}

const char* to_string(Split s) {
  switch (s) {
    case Split::train: return "train";
    case Split::val: return "val";
    case Split::test: return "test";
  }
  return "?";
}

Split split_from_string(const std::string& s) {
  if (s == "train") return Split::train;
  if (s == "val") return Split::val;
  if (s == "test") return Split::test;
  throw ConfigError("unknown split '" + s + "'");
}

namespace {

std::size_t round_half_down(double x) {
  return static_cast<std::size_t>(std::max(0.0, std::ceil(x - 0.5 - 1e-9)));
}

void check_fractions(const std::array<double, 3>& f) {
  for (double v : f)
    if (!(v >= 0)) throw ValidationError("split fractions must be non-negative");
  if (std::abs(f[0] + f[1] + f[2] - 1.0) > 1e-9) throw ValidationError("split fractions must sum to 1");
}

}  // namespace

SplitCounts split_counts(std::size_t n, const std::array<double, 3>& fractions) {
  check_fractions(fractions);
  std::array<std::size_t, 3> c{};
  c[0] = std::min(n, round_half_down(static_cast<double>(n) * fractions[0]));
  c[1] = std::min(n - c[0], round_half_down(static_cast<double>(n) * fractions[1]));
  c[2] = n - c[0] - c[1];
  if (n >= 3) {
    for (int k = 0; k < 3; ++k) {
      if (c[k] > 0 || fractions[k] <= 0) continue;
      const auto donor = static_cast<std::size_t>(std::max_element(c.begin(), c.end()) - c.begin());
      --c[donor];
      ++c[k];
    }
  }
  return {c[0], c[1], c[2]};
}

std::string dataset_name(const std::string& prefix, std::size_t scenes, std::size_t plots) {
  return prefix + "_" + std::to_string(scenes) + "," + std::to_string(plots);
}

DatasetManifest split(const std::vector<Plot>& plots, const std::array<double, 3>& fractions, std::uint64_t seed,
                      const std::string& prefix, bool allow_small) {
  check_fractions(fractions);
  DatasetManifest m;
  m.fractions = fractions;
  m.seed = seed;

  std::map<std::string, std::vector<const Plot*>> by_scene;
  std::vector<std::string> scene_order;
  for (const auto& p : plots) {
    if (!by_scene.contains(p.scene)) scene_order.push_back(p.scene);
    by_scene[p.scene].push_back(&p);
  }
  for (const auto& scene : scene_order) {
    auto group = by_scene[scene];
    if (group.size() < 3 && !allow_small)
      throw ValidationError("scene '" + scene + "' has " + std::to_string(group.size()) +
                            " plots; at least 3 are needed to populate train/val/test");
    std::sort(group.begin(), group.end(), [](const Plot* a, const Plot* b) { return a->tile_index < b->tile_index; });
    for (std::size_t i = 1; i < group.size(); ++i)
      if (group[i]->tile_index == group[i - 1]->tile_index)
        throw ValidationError("plot '" + group[i]->id() + "' appears more than once");

    // Fisher-Yates with a per-scene counter stream.
    const CounterRng rng(seed, {fnv1a("split"), fnv1a(scene)});
    for (std::size_t i = group.size() - 1; i > 0; --i) std::swap(group[i], group[rng.below(i, i + 1)]);

    const auto counts = group.size() < 3 ? SplitCounts{group.size(), 0, 0} : split_counts(group.size(), fractions);
    std::vector<ManifestEntry> entries;
    for (std::size_t k = 0; k < group.size(); ++k) {
      const Plot& p = *group[k];
      ManifestEntry e;
      e.scene = scene;
      e.plot_id = p.id();
      e.tile_index = p.tile_index;
      e.bounds = p.bounds;
      e.split = k < counts.train ? Split::train : (k < counts.train + counts.val ? Split::val : Split::test);
      e.points = p.cloud.size();
      e.density = p.density;
      e.edge = p.edge;
      e.file = "plots/" + p.id() + ".bin";
      entries.push_back(std::move(e));
    }
    std::sort(entries.begin(), entries.end(),
              [](const ManifestEntry& a, const ManifestEntry& b) { return a.tile_index < b.tile_index; });
    m.plots.insert(m.plots.end(), entries.begin(), entries.end());
    m.scenes.push_back(scene);
  }
  m.name = dataset_name(prefix, m.scenes.size(), m.plots.size());
  return m;
}

SplitCounts DatasetManifest::counts(const std::string& scene) const {
  SplitCounts c;
  for (const auto& p : plots) {
    if (!scene.empty() && p.scene != scene) continue;
    switch (p.split) {
      case Split::train: ++c.train; break;
      case Split::val: ++c.val; break;
      case Split::test: ++c.test; break;
    }
  }
  return c;
}

nlohmann::json DatasetManifest::to_json() const {
  nlohmann::json plots_json = nlohmann::json::array();
  for (const auto& p : plots)
    plots_json.push_back({{"scene", p.scene},
                          {"plot_id", p.plot_id},
                          {"tile", {p.tile_index[0], p.tile_index[1]}},
                          {"bounds", {p.bounds.min.x(), p.bounds.min.y(), p.bounds.max.x(), p.bounds.max.y()}},
                          {"split", to_string(p.split)},
                          {"points", p.points},
                          {"density", p.density},
                          {"edge", p.edge},
                          {"file", p.file}});
  nlohmann::json labels_json = nlohmann::json::object();
  for (const auto& [code, name] : labels) labels_json[name] = code;
  nlohmann::json splits = nlohmann::json::object();
  for (const auto& s : scenes) {
    const auto c = counts(s);
    splits[s] = {{"train", c.train}, {"val", c.val}, {"test", c.test}};
  }
  return {{"format", "sylva-manifest v1"},
          {"name", name},
          {"scenes", scenes},
          {"fractions", fractions},
          {"seed", seed},
          {"label_set", label_set},
          {"labels", labels_json},
          {"split_counts", splits},
          {"plots", plots_json}};
}

DatasetManifest DatasetManifest::from_json(const nlohmann::json& j) {
  DatasetManifest m;
  try {
    m.name = j.at("name").get<std::string>();
    m.scenes = j.at("scenes").get<std::vector<std::string>>();
    m.fractions = j.at("fractions").get<std::array<double, 3>>();
    m.seed = j.value("seed", std::uint64_t{0});
    m.label_set = j.value("label_set", "native");
    if (j.contains("labels"))
      for (const auto& [name, code] : j.at("labels").items()) m.labels.emplace_back(code.get<std::uint8_t>(), name);
    std::sort(m.labels.begin(), m.labels.end());
    for (const auto& pj : j.at("plots")) {
      ManifestEntry e;
      e.scene = pj.at("scene").get<std::string>();
      e.plot_id = pj.at("plot_id").get<std::string>();
      e.tile_index = pj.at("tile").get<std::array<int, 2>>();
      const auto b = pj.at("bounds").get<std::array<double, 4>>();
      e.bounds = {Vec2(b[0], b[1]), Vec2(b[2], b[3])};
      e.split = split_from_string(pj.at("split").get<std::string>());
      e.points = pj.at("points").get<std::uint64_t>();
      e.density = pj.at("density").get<double>();
      e.edge = pj.value("edge", false);
      e.file = pj.at("file").get<std::string>();
      m.plots.push_back(std::move(e));
    }
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed manifest: ") + e.what());
  }
  return m;
}

void DatasetManifest::write(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot write manifest " + path.string());
  out << to_json().dump(2) << '\n';
}

DatasetManifest DatasetManifest::read(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open manifest " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError("manifest " + path.string() + ": " + e.what(), e.byte);
  }
  return from_json(j);
}

namespace {

DensityReport build_report(std::vector<DensityRow> rows, double threshold) {
  DensityReport r;
  r.threshold = threshold;
  std::vector<std::string> order;
  std::map<std::string, SceneDensity> scenes;
  for (auto& row : rows) {
    row.below_threshold = row.density < threshold;
    auto [it, fresh] = scenes.try_emplace(row.scene);
    if (fresh) order.push_back(row.scene);
    auto& s = it->second;
    s.scene = row.scene;
    ++s.plots;
    s.mean_density += row.density;
    s.below_threshold += row.below_threshold ? 1 : 0;
  }
  for (const auto& name : order) {
    auto s = scenes[name];
    s.mean_density /= static_cast<double>(s.plots);
    r.scenes.push_back(s);
  }
  r.plots = std::move(rows);
  return r;
}

}  // namespace

DensityReport density_report(const std::vector<Plot>& plots, double threshold) {
  std::vector<DensityRow> rows;
  for (const auto& p : plots)
    rows.push_back({p.scene, p.id(), p.cloud.size(), p.bounds.area(), p.density, false});
  return build_report(std::move(rows), threshold);
}

DensityReport density_report(const DatasetManifest& manifest, double threshold) {
  std::vector<DensityRow> rows;
  for (const auto& p : manifest.plots)
    rows.push_back({p.scene, p.plot_id, p.points, p.bounds.area(), p.density, false});
  return build_report(std::move(rows), threshold);
}

PointCloud extract_nodal(const ForestScene& scene, const AssetLibrary& library) {
  PointCloud cloud;
  cloud.extent = scene.extent;
  cloud.provenance = Provenance::nodal;
  constexpr double kMerge = 1e-6;

  for (const auto& inst : scene.instances) {
    const TreeAsset& asset = library.at(inst.asset_id);
    const auto& mesh = asset.mesh;

    struct Node {
      Vec3 position;
      int wood = 0, leaf = 0;
    };
    std::vector<Node> nodes;
    std::vector<std::size_t> node_of(mesh.vertices.size());
    absl::flat_hash_map<std::array<std::int64_t, 3>, std::size_t> seen;
    for (std::size_t v = 0; v < mesh.vertices.size(); ++v) {
      const Vec3 w = rotate_yaw<double>(mesh.vertices[v] * inst.scale, inst.yaw) + inst.position;
      const std::array<std::int64_t, 3> key{std::llround(w.x() / kMerge), std::llround(w.y() / kMerge),
                                            std::llround(w.z() / kMerge)};
      auto [it, fresh] = seen.try_emplace(key, nodes.size());
      if (fresh) nodes.push_back({w});
      node_of[v] = it->second;
    }
    for (std::size_t t = 0; t < mesh.triangles.size(); ++t)
      for (auto v : mesh.triangles[t]) {
        auto& n = nodes[node_of[v]];
        (mesh.material[t] == Material::wood ? n.wood : n.leaf) += 1;
      }
    for (const auto& n : nodes) {
      if (!scene.extent.contains(n.position.head<2>())) continue;
      LidarPoint p;
      p.position = n.position;
      p.instance_id = inst.instance_id;
      p.semantic = static_cast<std::uint8_t>(n.leaf > n.wood ? Semantic::leaf : Semantic::wood);
      p.return_number = 0;
      p.pulse_index = -1;
      cloud.points.push_back(p);
    }
  }
  return cloud;
}

}  // namespace sylva
