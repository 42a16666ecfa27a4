#pragma once

#include "sylva/dataset.hpp"
#include "sylva/pointcloud.hpp"

#include <nlohmann/json_fwd.hpp>

#include <cstdint>
#include <string>
#include <vector>

namespace sylva {

struct CylinderSample {
  Vec2 center = Vec2::Zero();
  double radius = 8.0;
  std::vector<LidarPoint> points;
  std::string source_plot;

  nlohmann::json sidecar() const;
};

/// Points of `plot` within `radius` (closed) of `center` in xy, in plot order.
CylinderSample cut_cylinder(const Plot& plot, const Vec2& center, double radius);

/// Centers drawn uniformly over the plot bounds:
/// x = lerp(min.x, max.x, u(2k)), y = lerp(min.y, max.y, u(2k+1)) with the
/// stream CounterRng(seed, {fnv1a("cylinders")}).
std::vector<CylinderSample> sample_cylinders_random(const Plot& plot, double radius, std::size_t count,
                                                    std::uint64_t seed);
std::vector<Vec2> random_cylinder_centers(const Rect& bounds, std::size_t count, std::uint64_t seed);

/// Square lattice with step `stride`, centered on the plot: per axis
/// n = ceil(L / stride) centers at min + (L - (n-1) * stride) / 2 + k * stride;
/// an axis no longer than 2 * radius gets a single centered cylinder. With
/// stride <= radius * sqrt(2) every point of a plot wider than 2 * radius is
/// covered.
std::vector<CylinderSample> sample_cylinders_grid(const Plot& plot, double radius, double stride);
std::vector<Vec2> grid_cylinder_centers(const Rect& bounds, double radius, double stride);

struct MixResult {
  CylinderSample sample;
  std::vector<std::uint32_t> removed;   // instance ids taken out of sample_a
  std::vector<std::uint32_t> donors;    // instance ids taken from sample_b
  std::vector<std::uint32_t> inserted;  // fresh ids given to the donors
};

/// Number of trees replaced: 0 when fraction is 0, else max(1, round(fraction * n)).
std::size_t mix_count(std::size_t trees, double fraction);

/// Replaces mix_count(#trees(a), fraction) trees of `a` with trees of `b`, each
/// moved so its xy centroid lands on a removed tree's centroid and its lowest
/// point on the local ground of `a`. Inserted points outside the cylinder
/// radius are clipped. Throws AugmentationError when `b` has too few trees.
MixResult tree_mix(const CylinderSample& a, const CylinderSample& b, double fraction, std::uint64_t seed);

/// Instance ids present in a point list, excluding 0, ascending.
std::vector<std::uint32_t> instance_ids(const std::vector<LidarPoint>& points);

struct SegmentationResult {
  std::vector<std::uint32_t> instance;
  std::vector<std::uint8_t> semantic;

  static SegmentationResult from_cloud(const std::vector<LidarPoint>& points);
};

struct InstanceMatch {
  std::uint32_t pred = 0;
  std::uint32_t gt = 0;
  double iou = 0.0;
};

struct InstanceMetrics {
  double mean_iou = 0.0;  // percentages
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t true_positives = 0;
  std::size_t pred_instances = 0;
  std::size_t gt_instances = 0;
  std::vector<InstanceMatch> matches;  // true-positive pairs

  nlohmann::json to_json() const;
};

enum class MeanIouMode : std::uint8_t { matched_only, all_ground_truth };

struct InstanceEvalOptions {
  double iou_threshold = 0.5;
  MeanIouMode mean_iou = MeanIouMode::matched_only;
};

/// IoU of every (pred, gt) instance pair, instance 0 excluded on both sides.
struct IouTable {
  std::vector<std::uint32_t> pred_ids, gt_ids;
  std::vector<std::size_t> pred_sizes, gt_sizes;
  std::vector<InstanceMatch> pairs;  // only pairs with non-empty overlap
};
IouTable instance_ious(const std::vector<std::uint32_t>& pred, const std::vector<std::uint32_t>& gt);

/// Greedy one-to-one matching in descending IoU order (ties: smaller pred id,
/// then smaller gt id); pairs at or above the threshold count as true positives.
std::vector<InstanceMatch> greedy_match(const IouTable& table, double iou_threshold);

InstanceMetrics evaluate_instances(const SegmentationResult& pred, const std::vector<LidarPoint>& gt,
                                   const InstanceEvalOptions& options = {});

/// Unweighted (or point-count weighted) mean of per-sample metrics.
InstanceMetrics mean_metrics(const std::vector<InstanceMetrics>& samples,
                             const std::vector<double>& weights = {});

struct ClassMetrics {
  std::uint8_t label = 0;
  double iou = 0.0;  // percentages
  double precision = 0.0;
  double recall = 0.0;
};

struct SemanticMetrics {
  std::vector<ClassMetrics> classes;  // ascending label; classes absent from both sides omitted
  double accuracy = 0.0;

  nlohmann::json to_json(const LabelSet* labels = nullptr) const;
};

SemanticMetrics evaluate_semantics(const std::vector<std::uint8_t>& pred, const std::vector<std::uint8_t>& gt);

}  // namespace sylva
