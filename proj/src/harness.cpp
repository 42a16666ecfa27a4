#include "sylva/harness.hpp"

#include "sylva/random.hpp"

#include <nlohmann/json.hpp>

#include <absl/container/flat_hash_map.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <set>

namespace sylva {

nlohmann::json CylinderSample::sidecar() const {
  return {{"center", {center.x(), center.y()}},
          {"radius", radius},
          {"source_plot", source_plot},
          {"points", points.size()}};
}

CylinderSample cut_cylinder(const Plot& plot, const Vec2& center, double radius) {
  CylinderSample s;
  s.center = center;
  s.radius = radius;
  s.source_plot = plot.id();
  const double r2 = radius * radius;
  for (const auto& p : plot.cloud.points)
    if ((p.position.head<2>() - center).squaredNorm() <= r2) s.points.push_back(p);
  return s;
}

std::vector<Vec2> random_cylinder_centers(const Rect& bounds, std::size_t count, std::uint64_t seed) {
  const CounterRng rng(seed, {fnv1a("cylinders")});
  std::vector<Vec2> centers;
  centers.reserve(count);
  for (std::size_t k = 0; k < count; ++k)
    centers.emplace_back(rng.uniform(2 * k, bounds.min.x(), bounds.max.x()),
                         rng.uniform(2 * k + 1, bounds.min.y(), bounds.max.y()));
  return centers;
}

std::vector<CylinderSample> sample_cylinders_random(const Plot& plot, double radius, std::size_t count,
                                                    std::uint64_t seed) {
  if (!(radius > 0)) throw ValidationError("cylinder radius must be > 0");
  std::vector<CylinderSample> out;
  for (const auto& c : random_cylinder_centers(plot.bounds, count, seed)) out.push_back(cut_cylinder(plot, c, radius));
  return out;
}

std::vector<Vec2> grid_cylinder_centers(const Rect& bounds, double radius, double stride) {
  if (!(radius > 0)) throw ValidationError("cylinder radius must be > 0");
  if (!(stride > 0)) throw ValidationError("grid stride must be > 0");
  std::array<std::vector<double>, 2> axes;
  for (int a = 0; a < 2; ++a) {
    const double lo = bounds.min[a], len = bounds.max[a] - lo;
    if (len <= 2.0 * radius) {
      axes[a].push_back(lo + 0.5 * len);
      continue;
    }
    const auto n = static_cast<int>(std::ceil(len / stride - 1e-9));
    const double start = lo + 0.5 * (len - (n - 1) * stride);
    for (int k = 0; k < n; ++k) axes[a].push_back(start + k * stride);
  }
  std::vector<Vec2> centers;
  for (double y : axes[1])
    for (double x : axes[0]) centers.emplace_back(x, y);
  return centers;
}

std::vector<CylinderSample> sample_cylinders_grid(const Plot& plot, double radius, double stride) {
  std::vector<CylinderSample> out;
  for (const auto& c : grid_cylinder_centers(plot.bounds, radius, stride)) out.push_back(cut_cylinder(plot, c, radius));
  return out;
}

std::vector<std::uint32_t> instance_ids(const std::vector<LidarPoint>& points) {
  std::set<std::uint32_t> ids;
  for (const auto& p : points)
    if (p.instance_id != 0) ids.insert(p.instance_id);
  return {ids.begin(), ids.end()};
}

std::size_t mix_count(std::size_t trees, double fraction) {
  if (fraction <= 0) return 0;
  return std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(fraction * static_cast<double>(trees))));
}

namespace {

std::vector<std::uint32_t> choose(std::vector<std::uint32_t> ids, std::size_t k, const CounterRng& rng) {
  for (std::size_t i = 0; i < k; ++i) std::swap(ids[i], ids[i + rng.below(i, ids.size() - i)]);
  ids.resize(k);
  return ids;
}

}  // namespace

MixResult tree_mix(const CylinderSample& a, const CylinderSample& b, double fraction, std::uint64_t seed) {
  if (!(fraction >= 0 && fraction <= 1)) throw ValidationError("mix fraction must lie in [0, 1]");
  MixResult result;
  result.sample = a;
  const auto trees_a = instance_ids(a.points);
  const std::size_t k = mix_count(trees_a.size(), fraction);
  if (k == 0) return result;
  if (trees_a.empty()) throw AugmentationError("sample_a contains no trees");
  const auto trees_b = instance_ids(b.points);
  if (trees_b.size() < k)
    throw AugmentationError("sample_b has " + std::to_string(trees_b.size()) + " trees, " + std::to_string(k) +
                            " needed");

  const CounterRng rng(seed, {fnv1a("treemix")});
  result.removed = choose(trees_a, k, rng.child(0));
  result.donors = choose(trees_b, k, rng.child(1));
  const std::set<std::uint32_t> removed(result.removed.begin(), result.removed.end());

  auto& out = result.sample.points;
  out.clear();
  std::map<std::uint32_t, std::pair<Vec2, std::size_t>> removed_centroid;
  std::vector<const LidarPoint*> ground;
  for (const auto& p : a.points) {
    if (removed.contains(p.instance_id)) {
      auto& [sum, n] = removed_centroid[p.instance_id];
      if (n == 0) sum.setZero();
      sum += p.position.head<2>();
      ++n;
      continue;
    }
    if (p.instance_id == 0) ground.push_back(&p);
    out.push_back(p);
  }

  auto ground_height = [&](const Vec2& xy, double fallback) {
    constexpr double kReach2 = 2.0 * 2.0;
    double best = std::numeric_limits<double>::infinity();
    double nearest_d2 = std::numeric_limits<double>::infinity(), nearest_z = fallback;
    for (const auto* g : ground) {
      const double d2 = (g->position.head<2>() - xy).squaredNorm();
      if (d2 <= kReach2) best = std::min(best, g->position.z());
      if (d2 < nearest_d2) {
        nearest_d2 = d2;
        nearest_z = g->position.z();
      }
    }
    return std::isfinite(best) ? best : nearest_z;
  };

  std::uint32_t next_id = trees_a.back() + 1;
  const double r2 = a.radius * a.radius;
  for (std::size_t i = 0; i < k; ++i) {
    const std::uint32_t rid = result.removed[i], did = result.donors[i];
    const auto& [sum, n] = removed_centroid.at(rid);
    const Vec2 target = sum / static_cast<double>(n);
    double removed_min_z = std::numeric_limits<double>::infinity();
    for (const auto& p : a.points)
      if (p.instance_id == rid) removed_min_z = std::min(removed_min_z, p.position.z());

    Vec2 donor_sum = Vec2::Zero();
    std::size_t donor_n = 0;
    double donor_min_z = std::numeric_limits<double>::infinity();
    for (const auto& p : b.points)
      if (p.instance_id == did) {
        donor_sum += p.position.head<2>();
        ++donor_n;
        donor_min_z = std::min(donor_min_z, p.position.z());
      }
    const Vec2 donor_centroid = donor_sum / static_cast<double>(donor_n);
    const double z = ground_height(target, removed_min_z);
    const Vec3 shift((target - donor_centroid).x(), (target - donor_centroid).y(), z - donor_min_z);

    const std::uint32_t fresh = next_id++;
    result.inserted.push_back(fresh);
    for (const auto& p : b.points) {
      if (p.instance_id != did) continue;
      LidarPoint q = p;
      q.position += shift;
      q.instance_id = fresh;
      if ((q.position.head<2>() - a.center).squaredNorm() <= r2) out.push_back(q);
    }
  }
  return result;
}

SegmentationResult SegmentationResult::from_cloud(const std::vector<LidarPoint>& points) {
  SegmentationResult r;
  r.instance.reserve(points.size());
  r.semantic.reserve(points.size());
  for (const auto& p : points) {
    r.instance.push_back(p.instance_id);
    r.semantic.push_back(p.semantic);
  }
  return r;
}

nlohmann::json InstanceMetrics::to_json() const {
  nlohmann::json m = nlohmann::json::array();
  for (const auto& x : matches) m.push_back({{"pred", x.pred}, {"gt", x.gt}, {"iou", x.iou}});
  return {{"mean_iou", mean_iou},         {"precision", precision},     {"recall", recall},
          {"f1", f1},                     {"true_positives", true_positives},
          {"pred_instances", pred_instances}, {"gt_instances", gt_instances}, {"matches", m}};
}

IouTable instance_ious(const std::vector<std::uint32_t>& pred, const std::vector<std::uint32_t>& gt) {
  if (pred.size() != gt.size()) throw ValidationError("prediction and ground truth lengths differ");
  std::map<std::uint32_t, std::size_t> psize, gsize;
  std::map<std::pair<std::uint32_t, std::uint32_t>, std::size_t> inter;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (pred[i] != 0) ++psize[pred[i]];
    if (gt[i] != 0) ++gsize[gt[i]];
    if (pred[i] != 0 && gt[i] != 0) ++inter[{pred[i], gt[i]}];
  }
  IouTable t;
  for (const auto& [id, n] : psize) {
    t.pred_ids.push_back(id);
    t.pred_sizes.push_back(n);
  }
  for (const auto& [id, n] : gsize) {
    t.gt_ids.push_back(id);
    t.gt_sizes.push_back(n);
  }
  for (const auto& [key, n] : inter) {
    const double uni = static_cast<double>(psize[key.first] + gsize[key.second] - n);
    t.pairs.push_back({key.first, key.second, static_cast<double>(n) / uni});
  }
  return t;
}

std::vector<InstanceMatch> greedy_match(const IouTable& table, double iou_threshold) {
  auto pairs = table.pairs;
  std::sort(pairs.begin(), pairs.end(), [](const InstanceMatch& a, const InstanceMatch& b) {
    if (a.iou != b.iou) return a.iou > b.iou;
    if (a.pred != b.pred) return a.pred < b.pred;
    return a.gt < b.gt;
  });
  std::set<std::uint32_t> used_pred, used_gt;
  std::vector<InstanceMatch> matches;
  for (const auto& p : pairs) {
    if (p.iou < iou_threshold) break;
    if (used_pred.contains(p.pred) || used_gt.contains(p.gt)) continue;
    used_pred.insert(p.pred);
    used_gt.insert(p.gt);
    matches.push_back(p);
  }
  return matches;
}

namespace {

double f1_of(double p, double r) { return p + r > 0 ? 2.0 * p * r / (p + r) : 0.0; }

}  // namespace

InstanceMetrics evaluate_instances(const SegmentationResult& pred, const std::vector<LidarPoint>& gt,
                                   const InstanceEvalOptions& options) {
  std::vector<std::uint32_t> gt_ids(gt.size());
  for (std::size_t i = 0; i < gt.size(); ++i) gt_ids[i] = gt[i].instance_id;
  const auto table = instance_ious(pred.instance, gt_ids);

  InstanceMetrics m;
  m.matches = greedy_match(table, options.iou_threshold);
  m.true_positives = m.matches.size();
  m.pred_instances = table.pred_ids.size();
  m.gt_instances = table.gt_ids.size();
  const auto tp = static_cast<double>(m.true_positives);

  if (m.pred_instances == 0 && m.gt_instances == 0) {
    // Nothing to find and nothing predicted.
    m.mean_iou = m.precision = m.recall = m.f1 = 100.0;
    return m;
  }
  m.precision = m.pred_instances ? 100.0 * tp / static_cast<double>(m.pred_instances) : 0.0;
  m.recall = m.gt_instances ? 100.0 * tp / static_cast<double>(m.gt_instances) : 0.0;
  m.f1 = f1_of(m.precision, m.recall);
  double iou_sum = 0;
  for (const auto& x : m.matches) iou_sum += x.iou;
  if (options.mean_iou == MeanIouMode::matched_only) {
    m.mean_iou = m.true_positives ? 100.0 * iou_sum / tp : 0.0;
  } else {
    m.mean_iou = m.gt_instances ? 100.0 * iou_sum / static_cast<double>(m.gt_instances) : 0.0;
  }
  return m;
}

InstanceMetrics mean_metrics(const std::vector<InstanceMetrics>& samples, const std::vector<double>& weights) {
  if (!weights.empty() && weights.size() != samples.size())
    throw ValidationError("weights must match the number of samples");
  InstanceMetrics out;
  double total = 0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const double w = weights.empty() ? 1.0 : weights[i];
    const auto& s = samples[i];
    out.mean_iou += w * s.mean_iou;
    out.precision += w * s.precision;
    out.recall += w * s.recall;
    out.f1 += w * s.f1;
    out.true_positives += s.true_positives;
    out.pred_instances += s.pred_instances;
    out.gt_instances += s.gt_instances;
    total += w;
  }
  if (total > 0) {
    out.mean_iou /= total;
    out.precision /= total;
    out.recall /= total;
    out.f1 /= total;
  }
  return out;
}

nlohmann::json SemanticMetrics::to_json(const LabelSet* labels) const {
  nlohmann::json cls = nlohmann::json::array();
  for (const auto& c : classes)
    cls.push_back({{"label", c.label},
                   {"name", labels ? labels->name_of(c.label) : std::to_string(c.label)},
                   {"iou", c.iou},
                   {"precision", c.precision},
                   {"recall", c.recall}});
  return {{"accuracy", accuracy}, {"classes", cls}};
}

SemanticMetrics evaluate_semantics(const std::vector<std::uint8_t>& pred, const std::vector<std::uint8_t>& gt) {
  if (pred.size() != gt.size()) throw ValidationError("prediction and ground truth lengths differ");
  std::array<std::array<std::uint64_t, 256>, 256> confusion{};
  std::array<bool, 256> present{};
  std::uint64_t correct = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    ++confusion[gt[i]][pred[i]];
    present[gt[i]] = present[pred[i]] = true;
    correct += pred[i] == gt[i] ? 1 : 0;
  }
  SemanticMetrics m;
  m.accuracy = pred.empty() ? 100.0 : 100.0 * static_cast<double>(correct) / static_cast<double>(pred.size());
  for (int c = 0; c < 256; ++c) {
    if (!present[c]) continue;
    std::uint64_t row = 0, col = 0;
    for (int k = 0; k < 256; ++k) {
      row += confusion[c][k];
      col += confusion[k][c];
    }
    const auto tp = static_cast<double>(confusion[c][c]);
    const double fn = static_cast<double>(row) - tp, fp = static_cast<double>(col) - tp;
    ClassMetrics cm;
    cm.label = static_cast<std::uint8_t>(c);
    cm.iou = tp + fp + fn > 0 ? 100.0 * tp / (tp + fp + fn) : 0.0;
    cm.precision = tp + fp > 0 ? 100.0 * tp / (tp + fp) : 0.0;
    cm.recall = tp + fn > 0 ? 100.0 * tp / (tp + fn) : 0.0;
    m.classes.push_back(cm);
  }
  return m;
}

}  // namespace sylva
