#pragma once

#include "sylva/common.hpp"

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <vector>

namespace sylva {

struct LidarPoint {
  Vec3 position = Vec3::Zero();
  std::uint32_t instance_id = 0;
  std::uint8_t semantic = 0;       // Semantic code, or a remapped label code
  std::uint8_t return_number = 0;  // 1-based; 0 for nodal points
  std::int64_t pulse_index = -1;   // -1 for nodal points
  double time = 0.0;

  bool operator==(const LidarPoint&) const = default;
};

enum class Provenance : std::uint8_t { simulated, nodal };

struct PointCloud {
  std::vector<LidarPoint> points;
  Rect extent;
  Provenance provenance = Provenance::simulated;

  std::size_t size() const { return points.size(); }
  bool empty() const { return points.empty(); }
  /// Tight xy bounding rectangle of the points (zero rectangle when empty).
  Rect bounds() const;
};

/// Points whose xy lies in `rect` (closed), in order; the result's extent is `rect`.
PointCloud crop(const PointCloud& cloud, const Rect& rect);

enum class CloudFormat { binary, ascii };

/// Binary: "SVPC", u16 version, u64 count, then 46-byte packed records
/// {f64 x,y,z; u32 instance; u8 semantic; u8 return; i64 pulse; f64 time}.
/// ASCII: "# sylva-pc v1" then `x y z instance semantic return` rows.
void write_cloud(std::ostream& out, const PointCloud& cloud, CloudFormat format);
void write_cloud(const std::filesystem::path& path, const PointCloud& cloud, CloudFormat format);

/// Detects the format from the leading bytes. The extent of the result is the
/// points' bounding rectangle; provenance is nodal when every point has
/// return number 0.
PointCloud read_cloud(std::istream& in);
PointCloud read_cloud(const std::filesystem::path& path);

inline constexpr std::uint16_t kCloudFormatVersion = 1;
inline constexpr std::size_t kCloudRecordBytes = 46;

}  // namespace sylva
