#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <cstdint>
#include <stdexcept>
#include <string>

namespace sylva {

template <typename Scalar>
using Vector2 = Eigen::Matrix<Scalar, 2, 1>;
template <typename Scalar>
using Vector3 = Eigen::Matrix<Scalar, 3, 1>;

using Vec2 = Vector2<double>;
using Vec3 = Vector3<double>;
using Vec3i = Eigen::Vector3i;

/// Axis-aligned rectangle on the ground plane, closed on the min side.
template <typename Scalar>
struct Rectangle {
  Vector2<Scalar> min{Vector2<Scalar>::Zero()};
  Vector2<Scalar> max{Vector2<Scalar>::Zero()};

  static Rectangle from_size(Scalar width, Scalar depth) {
    return {Vector2<Scalar>::Zero(), Vector2<Scalar>(width, depth)};
  }

  Scalar width() const { return max.x() - min.x(); }
  Scalar depth() const { return max.y() - min.y(); }
  Scalar area() const { return width() * depth(); }
  bool contains(const Vector2<Scalar>& p) const {
    return p.x() >= min.x() && p.x() <= max.x() && p.y() >= min.y() && p.y() <= max.y();
  }
  bool operator==(const Rectangle&) const = default;
};

using Rect = Rectangle<double>;

/// Labels carried by voxels and simulated points. Values are the on-disk codes.
enum class Semantic : std::uint8_t { ground = 0, wood = 1, leaf = 2 };

const char* to_string(Semantic s);
Semantic semantic_from_string(const std::string& name);

// Error taxonomy. The CLI maps each family onto its own exit code.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class ValidationError : public Error {
 public:
  using Error::Error;
};

class DataError : public Error {
 public:
  using Error::Error;
};

class AugmentationError : public Error {
 public:
  using Error::Error;
};

/// Malformed input. `offset` is a 1-based line number for text formats and a
/// byte offset for binary ones.
class ParseError : public DataError {
 public:
  ParseError(const std::string& what, std::uint64_t offset)
      : DataError(what + " (at " + std::to_string(offset) + ")"), offset_(offset) {}
  std::uint64_t offset() const { return offset_; }

 private:
  std::uint64_t offset_;
};

}  // namespace sylva
