#pragma once

#include "sylva/assets.hpp"
#include "sylva/pointcloud.hpp"
#include "sylva/procgen.hpp"

#include <nlohmann/json_fwd.hpp>

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace sylva {

// ---- semantic labels --------------------------------------------------------

/// A named vocabulary of label codes.
struct LabelSet {
  std::string name;
  std::vector<std::pair<std::uint8_t, std::string>> labels;

  std::optional<std::uint8_t> code_of(const std::string& label) const;
  std::string name_of(std::uint8_t code) const;  // "#<code>" when unknown
};

/// ground 0, wood 1, leaf 2: the labels the simulator emits.
LabelSet native_labels();
/// The five-class forest vocabulary: low_vegetation 1, ground 2, stem 4,
/// live_branches 5, woody_branches 6.
LabelSet forest_five_class_labels();
/// non_tree 0, tree 1.
LabelSet binary_labels();

struct SemanticMapping {
  LabelSet source;
  LabelSet target;
  std::map<std::uint8_t, std::uint8_t> table;

  static SemanticMapping identity(const LabelSet& labels);
  /// Builds a mapping from label names; throws ConfigError on unknown names.
  static SemanticMapping from_names(const LabelSet& source, const LabelSet& target,
                                    const std::map<std::string, std::string>& names);
};

/// stem, woody and live branches -> tree; low vegetation and ground -> non-tree.
SemanticMapping five_class_to_binary();
/// wood and leaf -> tree; ground -> non-tree.
SemanticMapping native_to_binary();

/// Rewrites labels only. Throws DataError naming the first unmapped label.
PointCloud remap_semantics(const PointCloud& cloud, const SemanticMapping& mapping);

// ---- tiling and splits ------------------------------------------------------

struct Plot {
  std::string scene;
  std::array<int, 2> tile_index{0, 0};
  Rect bounds;
  PointCloud cloud;
  double density = 0.0;  // points per m^2 of `bounds`
  bool edge = false;     // narrower than the nominal tile size

  std::string id() const;  // "<scene>_<i>_<j>"
};

/// Grid anchored at the cloud extent's min corner; each point goes to the
/// tile floor((p - min) / tile_size). Points on the extent's max edge join the
/// last tile. Empty tiles are omitted; output is ordered by tile index.
std::vector<Plot> tile(const PointCloud& cloud, double tile_size = 50.0, const std::string& scene = "scene");

enum class Split : std::uint8_t { train, val, test };
const char* to_string(Split s);
Split split_from_string(const std::string& s);

struct SplitCounts {
  std::size_t train = 0, val = 0, test = 0;
};

/// Per-scene split sizes: train and val are n * fraction rounded half down
/// (so 25 plots give 17/4/4), test takes the remainder. When n >= 3 every
/// split with a positive fraction receives at least one plot.
SplitCounts split_counts(std::size_t n, const std::array<double, 3>& fractions);

struct ManifestEntry {
  std::string scene;
  std::string plot_id;
  std::array<int, 2> tile_index{0, 0};
  Rect bounds;
  Split split = Split::train;
  std::uint64_t points = 0;
  double density = 0.0;
  bool edge = false;
  std::string file;  // relative to the manifest's directory
};

struct DatasetManifest {
  std::string name;  // e.g. "Sim_1,25"
  std::vector<std::string> scenes;
  std::vector<ManifestEntry> plots;
  std::array<double, 3> fractions{0.70, 0.15, 0.15};
  std::uint64_t seed = 0;
  std::string label_set = "native";
  std::vector<std::pair<std::uint8_t, std::string>> labels;

  SplitCounts counts(const std::string& scene = "") const;
  nlohmann::json to_json() const;
  static DatasetManifest from_json(const nlohmann::json& j);
  void write(const std::filesystem::path& path) const;
  static DatasetManifest read(const std::filesystem::path& path);
};

/// "<prefix>_<scenes>,<plots>", e.g. "Sim_11,187".
std::string dataset_name(const std::string& prefix, std::size_t scenes, std::size_t plots);

/// Shuffles each scene's plots with a seeded stream and assigns splits.
/// Throws ValidationError when a scene has fewer than 3 plots, unless
/// `allow_small` is set, in which case such a scene goes entirely to train.
DatasetManifest split(const std::vector<Plot>& plots, const std::array<double, 3>& fractions = {0.70, 0.15, 0.15},
                      std::uint64_t seed = 0, const std::string& prefix = "Sim", bool allow_small = false);

struct DensityRow {
  std::string scene;
  std::string plot_id;
  std::uint64_t points = 0;
  double area = 0.0;
  double density = 0.0;
  bool below_threshold = false;
};

struct SceneDensity {
  std::string scene;
  std::size_t plots = 0;
  double mean_density = 0.0;  // unweighted mean of plot densities
  std::size_t below_threshold = 0;
};

struct DensityReport {
  std::vector<DensityRow> plots;
  std::vector<SceneDensity> scenes;
  double threshold = 1000.0;
};

DensityReport density_report(const std::vector<Plot>& plots, double threshold = 1000.0);
DensityReport density_report(const DatasetManifest& manifest, double threshold = 1000.0);

// ---- nodal baseline ---------------------------------------------------------

/// One point per world-space mesh vertex (deduplicated within 1e-6 m per
/// instance), labeled with the instance id and the majority material of the
/// adjacent triangles (ties go to wood). Cropped to the scene extent.
PointCloud extract_nodal(const ForestScene& scene, const AssetLibrary& library);

}  // namespace sylva
