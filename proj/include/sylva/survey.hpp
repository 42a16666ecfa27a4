#pragma once

#include "sylva/common.hpp"
#include "sylva/pointcloud.hpp"
#include "sylva/voxel.hpp"

#include <cstdint>
#include <vector>

namespace sylva {

struct ScannerConfig {
  double pulse_frequency = 100'000.0;  // Hz
  double scan_line_rate = 100.0;       // lines per second
  double fov_half_angle = 60.0;        // degrees off nadir
  int max_returns = 15;
  double max_range = 1000.0;  // meters

  void validate() const;
  /// round(pulse_frequency / scan_line_rate)
  std::int64_t pulses_per_line() const;
};

enum class FlightPattern : std::uint8_t { parallel, criss_cross };

const char* to_string(FlightPattern p);
FlightPattern flight_pattern_from_string(const std::string& name);

struct FlightLeg {
  Vec2 start = Vec2::Zero();
  Vec2 end = Vec2::Zero();
  double altitude = 60.0;  // above ground
  double speed = 5.0;      // m/s
  double start_time = 0.0;

  double length() const { return (end - start).norm(); }
  double duration() const { return length() / speed; }
  Vec2 direction() const { return (end - start) / length(); }
};

struct FlightPlan {
  std::vector<FlightLeg> legs;
  FlightPattern pattern = FlightPattern::criss_cross;
  double spacing = 20.0;
  double ground_elevation = 0.0;  // altitudes are relative to this height

  double duration() const;
};

/// Boustrophedon legs along the extent's long axis at cross-axis offsets
/// 0, spacing, ..., plus one at the far edge when the width is not a multiple
/// of the spacing. Legs overshoot both ends by one spacing. Criss-cross adds
/// the same construction rotated by 90 degrees.
FlightPlan plan_flight(const Rect& extent, double spacing, double altitude, double speed, FlightPattern pattern);

struct Pulse {
  std::int64_t pulse_index = 0;
  Vec3 origin = Vec3::Zero();
  Vec3 direction = -Vec3::UnitZ();
  double time = 0.0;
};

/// Random-access view of the pulses fired over a flight plan, in firing order.
class PulseSchedule {
 public:
  PulseSchedule(const FlightPlan& plan, const ScannerConfig& scanner);

  std::int64_t size() const { return total_; }
  Pulse at(std::int64_t pulse_index) const;
  std::int64_t lines_on_leg(std::size_t leg) const { return lines_[leg]; }
  std::int64_t pulses_per_line() const { return per_line_; }
  /// First global pulse index fired on `leg`.
  std::int64_t first_pulse_of_leg(std::size_t leg) const { return offsets_[leg]; }

  template <typename Fn>
  void for_each(Fn&& fn) const {
    for (std::int64_t i = 0; i < total_; ++i) fn(at(i));
  }

 private:
  FlightPlan plan_;
  ScannerConfig scanner_;
  std::int64_t per_line_ = 0;
  std::vector<std::int64_t> lines_;
  std::vector<std::int64_t> offsets_;  // cumulative, size legs + 1
  std::int64_t total_ = 0;
};

PulseSchedule generate_pulses(const FlightPlan& plan, const ScannerConfig& scanner);

/// Walks the grid along the pulse (3D DDA) and appends its returns to `out`.
/// Each occupied voxel returns with probability equal to its opacity, drawn
/// from the stream keyed by (survey_seed, pulse_index, occupied-voxel ordinal).
void trace_pulse(const Pulse& pulse, const VoxelGrid& grid, const ScannerConfig& scanner, std::uint64_t survey_seed,
                 std::vector<LidarPoint>& out);
std::vector<LidarPoint> trace_pulse(const Pulse& pulse, const VoxelGrid& grid, const ScannerConfig& scanner,
                                    std::uint64_t survey_seed);

struct SurveyStats {
  std::int64_t pulse_count = 0;
  std::int64_t point_count = 0;
  std::int64_t max_returns_observed = 0;
  double area = 0.0;
  double mean_density = 0.0;  // points inside the grid extent per m^2 of it
};

struct SurveyResult {
  PointCloud cloud;
  SurveyStats stats;
};

/// All returns of all pulses, ordered by pulse index then return number.
/// Returns from geometry overhanging the grid's extent are kept so every
/// pulse's sequence stays complete; crop() before tiling. Output is identical
/// for any worker count.
SurveyResult run_survey(const VoxelGrid& grid, const FlightPlan& plan, const ScannerConfig& scanner,
                        std::uint64_t survey_seed, int workers = 1);

/// Mean ground density of one leg over flat open terrain:
/// pulse_frequency / (speed * 2 * altitude * tan(fov)).
double swath_density(const ScannerConfig& scanner, const FlightLeg& leg);

}  // namespace sylva
