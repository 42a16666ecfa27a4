#include "sylva/pointcloud.hpp"

#include <doctest.h>

#include <algorithm>
#include <cstring>
#include <limits>
#include <sstream>

using namespace sylva;

namespace {

PointCloud sample_cloud() {
  PointCloud c;
  c.points.push_back({Vec3(12.345678, 0.1, 3.0), 42, 2, 1, 9, 0.25});
  c.points.push_back({Vec3(-1e-7, 1.0 / 3.0, std::numeric_limits<double>::max()), 0, 0, 15, 1LL << 40, 1e9});
  c.points.push_back({Vec3(0, 0, 0), 4294967295u, 255, 0, -1, 0});
  return c;
}

}  // namespace

TEST_CASE("binary round trip is bitwise") {
  const auto c = sample_cloud();
  std::stringstream a;
  write_cloud(a, c, CloudFormat::binary);
  const std::string bytes = a.str();
  CHECK(bytes.size() == 4 + 2 + 8 + 3 * kCloudRecordBytes);
  CHECK(bytes.substr(0, 4) == "SVPC");
  std::istringstream in(bytes);
  const auto d = read_cloud(in);
  REQUIRE(d.size() == c.size());
  for (std::size_t i = 0; i < c.size(); ++i) {
    CHECK(std::memcmp(d.points[i].position.data(), c.points[i].position.data(), 3 * sizeof(double)) == 0);
    CHECK(d.points[i] == c.points[i]);
  }
  std::stringstream again;
  write_cloud(again, d, CloudFormat::binary);
  CHECK(again.str() == bytes);
}

TEST_CASE("ascii rows use six decimals") {
  PointCloud c;
  c.points.push_back({Vec3(12.345678, 0.1, 3.0), 42, 2, 1, 0, 0});
  std::ostringstream out;
  write_cloud(out, c, CloudFormat::ascii);
  std::istringstream lines(out.str());
  std::string header, row;
  std::getline(lines, header);
  std::getline(lines, row);
  CHECK(header == "# sylva-pc v1");
  CHECK(row == "12.345678 0.100000 3.000000 42 2 1");

  std::istringstream in(out.str());
  const auto d = read_cloud(in);
  REQUIRE(d.size() == 1);
  CHECK(d.points[0].instance_id == 42);
  CHECK(d.points[0].semantic == 2);
  CHECK(d.points[0].return_number == 1);
  CHECK(d.points[0].position.x() == doctest::Approx(12.345678));
}

TEST_CASE("empty cloud round trips in both formats") {
  for (auto f : {CloudFormat::binary, CloudFormat::ascii}) {
    std::stringstream s;
    write_cloud(s, PointCloud{}, f);
    CHECK(read_cloud(s).empty());
  }
}

TEST_CASE("truncated or foreign input is a parse error with an offset") {
  std::stringstream s;
  write_cloud(s, sample_cloud(), CloudFormat::binary);
  const std::string bytes = s.str();
  {
    std::istringstream in(bytes.substr(0, bytes.size() - 10));
    try {
      read_cloud(in);
      FAIL("expected ParseError");
    } catch (const ParseError& e) {
      CHECK(e.offset() >= 14);
      CHECK(e.offset() <= bytes.size());
    }
  }
  {
    std::string bad = bytes;
    bad.replace(0, 4, "XXXX");
    std::istringstream in(bad);
    try {
      read_cloud(in);
      FAIL("expected ParseError");
    } catch (const ParseError& e) {
      CHECK(e.offset() == 0);
    }
  }
  {
    std::istringstream in("# sylva-pc v1\n1 2 3 4 5 6\n1 2 x 4 5 6\n");
    CHECK_THROWS_AS(read_cloud(in), ParseError);
  }
}

TEST_CASE("provenance and bounds") {
  PointCloud nodal;
  nodal.points.push_back({Vec3(1, 2, 0), 1, 1, 0, -1, 0});
  nodal.points.push_back({Vec3(4, -2, 0), 1, 1, 0, -1, 0});
  std::stringstream s;
  write_cloud(s, nodal, CloudFormat::binary);
  const auto d = read_cloud(s);
  CHECK(d.provenance == Provenance::nodal);
  CHECK(d.extent.min == Vec2(1, -2));
  CHECK(d.extent.max == Vec2(4, 2));
}

TEST_CASE("crop keeps points inside the closed rectangle") {
  PointCloud c;
  for (double x : {-1.0, 0.0, 5.0, 10.0, 10.5}) c.points.push_back({Vec3(x, 1, 0), 1, 1, 1, 0, 0});
  const auto r = crop(c, Rect::from_size(10, 10));
  REQUIRE(r.size() == 3);
  CHECK(r.points[0].position.x() == 0.0);
  CHECK(r.points[2].position.x() == 10.0);
  CHECK(r.extent == Rect::from_size(10, 10));
}
