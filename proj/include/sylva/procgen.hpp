#pragma once

#include "sylva/assets.hpp"
#include "sylva/common.hpp"

#include <nlohmann/json_fwd.hpp>

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace sylva {

/// Parameters of one foliage layer (e.g. overstory or understory). All
/// lengths in meters.
struct FoliageGeneratorParams {
  struct WeightedAsset {
    std::string asset_id;
    double weight = 1.0;
  };

  std::string name;
  std::vector<WeightedAsset> assets;
  double initial_seed_density = 0.0;  // seeds along a 10 m line
  double collision_radius = 1.0;
  double shade_radius = 0.0;
  double scale_min = 1.0;
  double scale_max = 1.0;
  double average_spread_distance = 0.0;
  double spread_variance = 0.0;  // standard deviation of dispersal distance
  int num_steps = 1;
  int max_age = 1;
  bool can_grow_in_shade = false;

  void validate() const;
};

/// Coniferous overstory and understory layers with the assets of
/// `default_parametric_library`. Where a range is given for a radius the
/// midpoint is used.
FoliageGeneratorParams coniferous_overstory();
FoliageGeneratorParams coniferous_understory();

struct TreeInstance {
  std::uint32_t instance_id = 0;
  std::string asset_id;
  Vec3 position = Vec3::Zero();
  double scale = 1.0;
  double yaw = 0.0;
  int age = 0;
  std::uint32_t generator = 0;  // index into ForestScene::generators

  bool operator==(const TreeInstance&) const = default;
};

/// Ground surface: flat plane at `base` or a regular heightfield sampled
/// bilinearly (clamped at the borders).
struct Terrain {
  double base = 0.0;
  Vec2 origin = Vec2::Zero();
  double cell = 0.0;
  int nx = 0, ny = 0;
  std::vector<double> heights;  // row-major, ny rows of nx samples

  bool flat() const { return heights.empty(); }
  double height(const Vec2& p) const;

  bool operator==(const Terrain&) const = default;
};

struct ForestScene {
  std::string name = "scene";
  Rect extent = Rect::from_size(250.0, 250.0);
  Terrain terrain;
  std::vector<FoliageGeneratorParams> generators;
  std::vector<TreeInstance> instances;
  std::uint64_t rng_seed = 0;
};

/// Diagnostic counters from a generation run.
struct GenerationLog {
  std::size_t initial_seeds = 0;  // step-0 spawns before any pruning
  std::size_t spawned = 0;
  std::size_t shade_pruned = 0;
  std::size_t collision_pruned = 0;
  std::size_t aged_out = 0;
};

ForestScene generate_forest(const Rect& extent, const std::vector<FoliageGeneratorParams>& generators,
                            const AssetLibrary& library, std::uint64_t rng_seed,
                            GenerationLog* log = nullptr, const Terrain& terrain = {});

/// Number of step-0 seeds for one generator: round(density^2 * area / 100 m^2).
std::size_t initial_seed_count(double initial_seed_density, const Rect& extent);

/// Pruning rules as free functions over an instance set; `generate_forest`
/// applies them in order shade, collision. Each returns the number removed.
std::size_t prune_shade(std::vector<TreeInstance>& instances,
                        const std::vector<FoliageGeneratorParams>& generators);
std::size_t prune_collisions(std::vector<TreeInstance>& instances,
                             const std::vector<FoliageGeneratorParams>& generators);

struct CompositionRow {
  std::string asset_id;
  std::size_t count = 0;
  double percentage = 0.0;
};

/// Instance counts per asset, sorted by asset_id.
std::vector<CompositionRow> scene_composition(const ForestScene& scene);

FoliageGeneratorParams generator_from_json(const nlohmann::json& j);
nlohmann::json generator_to_json(const FoliageGeneratorParams& g);

void write_scene(std::ostream& out, const ForestScene& scene);
ForestScene read_scene(std::istream& in);

}  // namespace sylva
