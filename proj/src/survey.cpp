#include "sylva/survey.hpp"

#include "sylva/random.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numbers>
#include <thread>

namespace sylva {

void ScannerConfig::validate() const {
  if (!(pulse_frequency > 0)) throw ValidationError("pulse_frequency must be > 0");
  if (!(scan_line_rate > 0)) throw ValidationError("scan_line_rate must be > 0");
  if (!(fov_half_angle > 0 && fov_half_angle < 90)) throw ValidationError("fov_half_angle must lie in (0, 90)");
  if (max_returns < 1) throw ValidationError("max_returns must be >= 1");
  if (!(max_range > 0)) throw ValidationError("max_range must be > 0");
  if (pulses_per_line() < 1) throw ValidationError("pulse_frequency / scan_line_rate must round to >= 1");
}

std::int64_t ScannerConfig::pulses_per_line() const { return std::llround(pulse_frequency / scan_line_rate); }

const char* to_string(FlightPattern p) { return p == FlightPattern::parallel ? "parallel" : "criss_cross"; }

FlightPattern flight_pattern_from_string(const std::string& name) {
  if (name == "parallel" || name == "Parallel") return FlightPattern::parallel;
  if (name == "criss_cross" || name == "criss-cross" || name == "Criss-cross") return FlightPattern::criss_cross;
  throw ConfigError("unknown flight pattern '" + name + "'");
}

double FlightPlan::duration() const {
  return legs.empty() ? 0.0 : legs.back().start_time + legs.back().duration();
}

FlightPlan plan_flight(const Rect& extent, double spacing, double altitude, double speed, FlightPattern pattern) {
  if (!(extent.width() > 0 && extent.depth() > 0)) throw ValidationError("flight extent must have positive area");
  if (!(spacing > 0)) throw ValidationError("flight spacing must be > 0");
  if (!(altitude > 0)) throw ValidationError("altitude must be > 0");
  if (!(speed > 0)) throw ValidationError("speed must be > 0");

  FlightPlan plan;
  plan.pattern = pattern;
  plan.spacing = spacing;

  // along = 0 flies along x (offsets in y); along = 1 flies along y.
  auto add_set = [&](int along) {
    const int across = 1 - along;
    const double lo = extent.min[across], width = extent.max[across] - lo;
    std::vector<double> offsets;
    const auto n = static_cast<std::int64_t>(std::floor(width / spacing + 1e-9));
    for (std::int64_t k = 0; k <= n; ++k) offsets.push_back(lo + static_cast<double>(k) * spacing);
    if (width - static_cast<double>(n) * spacing > 1e-9 * std::max(1.0, width)) offsets.push_back(extent.max[across]);
    for (double off : offsets) {
      FlightLeg leg;
      leg.altitude = altitude;
      leg.speed = speed;
      Vec2 a, b;
      a[along] = extent.min[along] - spacing;
      b[along] = extent.max[along] + spacing;
      a[across] = b[across] = off;
      if (plan.legs.size() % 2 == 1) std::swap(a, b);
      leg.start = a;
      leg.end = b;
      plan.legs.push_back(leg);
    }
  };
  const int long_axis = extent.width() >= extent.depth() ? 0 : 1;
  add_set(long_axis);
  if (pattern == FlightPattern::criss_cross) add_set(1 - long_axis);

  double t = 0.0;
  for (auto& leg : plan.legs) {
    leg.start_time = t;
    t += leg.duration();
  }
  return plan;
}

PulseSchedule::PulseSchedule(const FlightPlan& plan, const ScannerConfig& scanner) : plan_(plan), scanner_(scanner) {
  scanner_.validate();
  per_line_ = scanner_.pulses_per_line();
  offsets_.push_back(0);
  for (const auto& leg : plan_.legs) {
    const auto lines = static_cast<std::int64_t>(std::ceil(leg.duration() * scanner_.scan_line_rate - 1e-9));
    lines_.push_back(std::max<std::int64_t>(lines, 0));
    offsets_.push_back(offsets_.back() + lines_.back() * per_line_);
  }
  total_ = offsets_.back();
}

Pulse PulseSchedule::at(std::int64_t pulse_index) const {
  const auto it = std::upper_bound(offsets_.begin(), offsets_.end(), pulse_index);
  const auto leg_no = static_cast<std::size_t>(it - offsets_.begin() - 1);
  const FlightLeg& leg = plan_.legs[leg_no];
  const std::int64_t local = pulse_index - offsets_[leg_no];
  const std::int64_t line = local / per_line_, p = local % per_line_;

  const double t = static_cast<double>(line) / scanner_.scan_line_rate +
                   static_cast<double>(p) / scanner_.pulse_frequency;
  const Vec2 heading = leg.direction();
  const Vec2 xy = leg.start + heading * (leg.speed * t);

  const double fov = scanner_.fov_half_angle * std::numbers::pi / 180.0;
  const double angle = -fov + 2.0 * fov * static_cast<double>(p) / static_cast<double>(per_line_);
  const Vec3 cross(-heading.y(), heading.x(), 0.0);

  Pulse pulse;
  pulse.pulse_index = pulse_index;
  pulse.origin = Vec3(xy.x(), xy.y(), plan_.ground_elevation + leg.altitude);
  pulse.direction = (std::sin(angle) * cross - std::cos(angle) * Vec3::UnitZ()).normalized();
  pulse.time = leg.start_time + t;
  return pulse;
}

PulseSchedule generate_pulses(const FlightPlan& plan, const ScannerConfig& scanner) {
  return PulseSchedule(plan, scanner);
}

void trace_pulse(const Pulse& pulse, const VoxelGrid& grid, const ScannerConfig& scanner, std::uint64_t survey_seed,
                 std::vector<LidarPoint>& out) {
  if (grid.empty()) return;
  const Vec3& o = pulse.origin;
  const Vec3& d = pulse.direction;
  const auto hit = ray_box<double>(o, d, grid.origin(), grid.upper());
  if (!hit) return;
  double t = hit->first;
  const double t_end = std::min(hit->second, scanner.max_range);
  if (t >= t_end) return;

  const double vs = grid.voxel_size();
  const Vec3i lo = grid.min_index(), hi = grid.min_index() + grid.dims() - Vec3i::Ones();
  Vec3i idx = grid.index_of(o + d * t).cwiseMax(lo).cwiseMin(hi);

  Vec3i step;
  Vec3 t_max, t_delta;
  for (int a = 0; a < 3; ++a) {
    if (d[a] > 0) {
      step[a] = 1;
      t_max[a] = ((idx[a] + 1) * vs - o[a]) / d[a];
      t_delta[a] = vs / d[a];
    } else if (d[a] < 0) {
      step[a] = -1;
      t_max[a] = (idx[a] * vs - o[a]) / d[a];
      t_delta[a] = -vs / d[a];
    } else {
      step[a] = 0;
      t_max[a] = std::numeric_limits<double>::infinity();
      t_delta[a] = std::numeric_limits<double>::infinity();
    }
  }

  const CounterRng rng(survey_seed, {static_cast<std::uint64_t>(pulse.pulse_index)});
  std::uint64_t ordinal = 0;
  int returns = 0;
  while (t < t_end) {
    int axis = 0;
    if (t_max[1] < t_max[axis]) axis = 1;
    if (t_max[2] < t_max[axis]) axis = 2;
    const double t_next = std::min(t_max[axis], t_end);

    // Zero-length visits (edge or corner grazes) are skipped.
    if (t_next - t > 1e-12) {
      if (const VoxelAttr* attr = grid.find(idx)) {
        const double u = rng.uniform(ordinal++);
        if (u < attr->opacity) {
          // Entry point, moved just inside so the point falls in this voxel.
          Vec3 p = o + d * (t + std::min(1e-7, 0.5 * (t_next - t)));
          for (int a = 0; a < 3; ++a) {
            const double vlo = idx[a] * vs, vhi = (idx[a] + 1) * vs;
            while (std::floor(p[a] / vs) < idx[a] || p[a] < vlo) p[a] = std::nextafter(p[a], vhi);
            while (std::floor(p[a] / vs) > idx[a] || p[a] >= vhi) p[a] = std::nextafter(p[a], vlo);
          }
          LidarPoint pt;
          pt.position = p;
          pt.instance_id = attr->instance_id;
          pt.semantic = static_cast<std::uint8_t>(attr->semantic);
          pt.return_number = static_cast<std::uint8_t>(++returns);
          pt.pulse_index = pulse.pulse_index;
          pt.time = pulse.time;
          out.push_back(pt);
          if (attr->opacity >= 1.0f || returns >= scanner.max_returns) return;
        }
      }
    }
    t = t_max[axis];
    idx[axis] += step[axis];
    t_max[axis] += t_delta[axis];
    if (idx[axis] < lo[axis] || idx[axis] > hi[axis]) return;
  }
}

std::vector<LidarPoint> trace_pulse(const Pulse& pulse, const VoxelGrid& grid, const ScannerConfig& scanner,
                                    std::uint64_t survey_seed) {
  std::vector<LidarPoint> out;
  trace_pulse(pulse, grid, scanner, survey_seed, out);
  return out;
}

SurveyResult run_survey(const VoxelGrid& grid, const FlightPlan& plan, const ScannerConfig& scanner,
                        std::uint64_t survey_seed, int workers) {
  const PulseSchedule schedule(plan, scanner);
  const Rect extent = grid.extent();

  constexpr std::int64_t kChunk = 1 << 15;
  const std::int64_t chunks = (schedule.size() + kChunk - 1) / kChunk;
  std::vector<std::vector<LidarPoint>> parts(static_cast<std::size_t>(chunks));
  std::atomic<std::int64_t> next{0};

  auto work = [&] {
    std::vector<LidarPoint> scratch;
    for (std::int64_t c; (c = next.fetch_add(1)) < chunks;) {
      auto& part = parts[static_cast<std::size_t>(c)];
      const std::int64_t end = std::min(schedule.size(), (c + 1) * kChunk);
      for (std::int64_t i = c * kChunk; i < end; ++i) {
        scratch.clear();
        trace_pulse(schedule.at(i), grid, scanner, survey_seed, scratch);
        part.insert(part.end(), scratch.begin(), scratch.end());
      }
    }
  };
  workers = std::max(1, workers);
  if (workers == 1) {
    work();
  } else {
    std::vector<std::jthread> threads;
    for (int w = 0; w < workers; ++w) threads.emplace_back(work);
  }

  SurveyResult result;
  std::size_t total = 0;
  for (const auto& p : parts) total += p.size();
  auto& points = result.cloud.points;
  points.reserve(total);
  for (auto& p : parts) {
    points.insert(points.end(), p.begin(), p.end());
    std::vector<LidarPoint>().swap(p);
  }
  result.cloud.extent = extent;
  result.cloud.provenance = Provenance::simulated;

  auto& s = result.stats;
  s.pulse_count = schedule.size();
  s.point_count = static_cast<std::int64_t>(points.size());
  for (const auto& p : points) s.max_returns_observed = std::max<std::int64_t>(s.max_returns_observed, p.return_number);
  s.area = extent.area();
  const auto inside = std::count_if(points.begin(), points.end(),
                                    [&](const LidarPoint& p) { return extent.contains(p.position.head<2>()); });
  s.mean_density = s.area > 0 ? static_cast<double>(inside) / s.area : 0.0;
  return result;
}

double swath_density(const ScannerConfig& scanner, const FlightLeg& leg) {
  const double swath = 2.0 * leg.altitude * std::tan(scanner.fov_half_angle * std::numbers::pi / 180.0);
  return scanner.pulse_frequency / (leg.speed * swath);
}

}  // namespace sylva
