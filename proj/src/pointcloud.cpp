#include "sylva/pointcloud.hpp"

#include "binary_io.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace sylva {

Rect PointCloud::bounds() const {
  if (points.empty()) return {};
  Vec2 lo = points.front().position.head<2>(), hi = lo;
  for (const auto& p : points) {
    lo = lo.cwiseMin(p.position.head<2>());
    hi = hi.cwiseMax(p.position.head<2>());
  }
  return {lo, hi};
}

PointCloud crop(const PointCloud& cloud, const Rect& rect) {
  PointCloud out;
  out.extent = rect;
  out.provenance = cloud.provenance;
  for (const auto& p : cloud.points)
    if (rect.contains(p.position.head<2>())) out.points.push_back(p);
  return out;
}

void write_cloud(std::ostream& out, const PointCloud& cloud, CloudFormat format) {
  if (format == CloudFormat::ascii) {
    out << "# sylva-pc v1\n";
    char buf[160];
    for (const auto& p : cloud.points) {
      const int n = std::snprintf(buf, sizeof buf, "%.6f %.6f %.6f %u %u %u\n", p.position.x(), p.position.y(),
                                  p.position.z(), p.instance_id, static_cast<unsigned>(p.semantic),
                                  static_cast<unsigned>(p.return_number));
      out.write(buf, n);
    }
    return;
  }
  detail::ByteWriter w;
  w.put_bytes("SVPC", 4);
  w.put<std::uint16_t>(kCloudFormatVersion);
  w.put<std::uint64_t>(cloud.points.size());
  for (const auto& p : cloud.points) {
    w.put<double>(p.position.x());
    w.put<double>(p.position.y());
    w.put<double>(p.position.z());
    w.put<std::uint32_t>(p.instance_id);
    w.put<std::uint8_t>(p.semantic);
    w.put<std::uint8_t>(p.return_number);
    w.put<std::int64_t>(p.pulse_index);
    w.put<double>(p.time);
    if (w.size() > (1u << 20)) w.flush_to(out);
  }
  w.flush_to(out);
}

void write_cloud(const std::filesystem::path& path, const PointCloud& cloud, CloudFormat format) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  write_cloud(out, cloud, format);
  if (!out) throw DataError("write failed for " + path.string());
}

namespace {

PointCloud finish(std::vector<LidarPoint> points) {
  PointCloud cloud;
  cloud.points = std::move(points);
  cloud.extent = cloud.bounds();
  const bool nodal = !cloud.points.empty() &&
                     std::all_of(cloud.points.begin(), cloud.points.end(),
                                 [](const LidarPoint& p) { return p.return_number == 0; });
  cloud.provenance = nodal ? Provenance::nodal : Provenance::simulated;
  return cloud;
}

PointCloud read_ascii(std::istream& in) {
  std::vector<LidarPoint> points;
  std::string line;
  std::uint64_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line_no == 1) {
      if (line.rfind("# sylva-pc v1", 0) != 0) throw ParseError("missing '# sylva-pc v1' header", 1);
      continue;
    }
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    LidarPoint p;
    double x, y, z;
    unsigned instance, semantic, ret;
    if (!(ls >> x >> y >> z >> instance >> semantic >> ret) || semantic > 255 || ret > 255)
      throw ParseError("malformed point row", line_no);
    p.position = Vec3(x, y, z);
    p.instance_id = instance;
    p.semantic = static_cast<std::uint8_t>(semantic);
    p.return_number = static_cast<std::uint8_t>(ret);
    p.pulse_index = ret == 0 ? -1 : 0;
    points.push_back(p);
  }
  return finish(std::move(points));
}

PointCloud read_binary(std::istream& in) {
  detail::ByteReader r(in);
  r.expect_magic("SVPC");
  const auto version = r.get<std::uint16_t>("version");
  if (version != kCloudFormatVersion)
    throw ParseError("unsupported point cloud version " + std::to_string(version), r.offset() - 2);
  const auto count = r.get<std::uint64_t>("point count");
  if (count > r.remaining() / kCloudRecordBytes) r.require(count * kCloudRecordBytes, "point records");
  if (r.remaining() != count * kCloudRecordBytes)
    throw ParseError("trailing bytes after point records", r.offset() + count * kCloudRecordBytes);
  std::vector<LidarPoint> points(count);
  for (auto& p : points) {
    p.position.x() = r.get<double>("x");
    p.position.y() = r.get<double>("y");
    p.position.z() = r.get<double>("z");
    p.instance_id = r.get<std::uint32_t>("instance");
    p.semantic = r.get<std::uint8_t>("semantic");
    p.return_number = r.get<std::uint8_t>("return");
    p.pulse_index = r.get<std::int64_t>("pulse index");
    p.time = r.get<double>("time");
  }
  return finish(std::move(points));
}

}  // namespace

PointCloud read_cloud(std::istream& in) {
  if (in.peek() == '#') return read_ascii(in);
  return read_binary(in);
}

PointCloud read_cloud(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open point cloud " + path.string());
  return read_cloud(in);
}

}  // namespace sylva
