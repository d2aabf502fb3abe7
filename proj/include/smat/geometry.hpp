#ifndef SMAT_GEOMETRY_HPP
#define SMAT_GEOMETRY_HPP

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace smat {

using Point3 = Eigen::Vector3d;

/// Raised when input data fails validation (non-finite values, bad indices).
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Raised for invalid parameters (non-positive resolution, malformed FOV).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline bool is_finite(const Point3& p) {
  return std::isfinite(p.x()) && std::isfinite(p.y()) && std::isfinite(p.z());
}

/// Horizontal radius sqrt(x^2 + y^2); used for the R_bound crop.
inline double radius_2d(const Point3& p) { return std::hypot(p.x(), p.y()); }

/// Full Euclidean range; used for range images.
inline double range_3d(const Point3& p) { return p.norm(); }

// ============================================================================
// PoseSE3
// ============================================================================

/**
 * Rigid transform x -> R x + t. The rotation is kept as an orthonormal
 * matrix; constructors reject anything that is not a proper rotation.
 */
class PoseSE3 {
 public:
  static constexpr double kOrthoTolerance = 1e-9;

  PoseSE3() : rotation_(Eigen::Matrix3d::Identity()), translation_(Point3::Zero()) {}

  PoseSE3(const Eigen::Matrix3d& rotation, const Point3& translation)
      : rotation_(rotation), translation_(translation) {
    validate();
  }

  /// Quaternion is normalized before use; a zero quaternion is rejected.
  PoseSE3(const Eigen::Quaterniond& q, const Point3& translation) : translation_(translation) {
    const double n = q.norm();
    if (!(n > 0.0) || !std::isfinite(n)) throw ValidationError("pose quaternion has zero or non-finite norm");
    rotation_ = q.normalized().toRotationMatrix();
    validate();
  }

  static PoseSE3 identity() { return {}; }

  static PoseSE3 from_translation(const Point3& t) { return {Eigen::Matrix3d::Identity(), t}; }

  static PoseSE3 from_yaw(double yaw, const Point3& t) {
    return {Eigen::Quaterniond(Eigen::AngleAxisd(yaw, Eigen::Vector3d::UnitZ())), t};
  }

  const Eigen::Matrix3d& rotation() const { return rotation_; }
  const Point3& translation() const { return translation_; }
  Eigen::Quaterniond quaternion() const { return Eigen::Quaterniond(rotation_).normalized(); }

  Point3 operator*(const Point3& p) const { return rotation_ * p + translation_; }

  PoseSE3 operator*(const PoseSE3& rhs) const {
    PoseSE3 out;
    out.rotation_ = rotation_ * rhs.rotation_;
    out.translation_ = rotation_ * rhs.translation_ + translation_;
    return out;
  }

  PoseSE3 inverse() const {
    PoseSE3 out;
    out.rotation_ = rotation_.transpose();
    out.translation_ = -(out.rotation_ * translation_);
    return out;
  }

  bool is_valid() const {
    if (!rotation_.allFinite() || !is_finite(translation_)) return false;
    const double ortho = (rotation_.transpose() * rotation_ - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff();
    return ortho <= kOrthoTolerance && std::abs(rotation_.determinant() - 1.0) <= kOrthoTolerance;
  }

 private:
  void validate() const {
    if (!is_valid()) throw ValidationError("pose rotation is not a proper orthonormal matrix or has non-finite entries");
  }

  Eigen::Matrix3d rotation_;
  Point3 translation_;
};

/// Applies `pose` to every point. Throws ValidationError naming the first
/// non-finite input index.
inline std::vector<Point3> transform_points(const PoseSE3& pose, std::span<const Point3> points) {
  std::vector<Point3> out;
  out.reserve(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (!is_finite(points[i])) throw ValidationError("non-finite point at index " + std::to_string(i));
    out.push_back(pose * points[i]);
  }
  return out;
}

// ============================================================================
// Voxel keys
// ============================================================================

struct VoxelKey {
  std::int32_t ix = 0;
  std::int32_t iy = 0;
  std::int32_t iz = 0;

  friend bool operator==(const VoxelKey&, const VoxelKey&) = default;
  friend auto operator<=>(const VoxelKey&, const VoxelKey&) = default;

  VoxelKey operator+(const VoxelKey& o) const { return {ix + o.ix, iy + o.iy, iz + o.iz}; }
};

struct VoxelKeyHash {
  std::size_t operator()(const VoxelKey& k) const noexcept {
    // Teschner et al. spatial hash primes.
    const auto h = (static_cast<std::uint64_t>(static_cast<std::uint32_t>(k.ix)) * 73856093ULL) ^
                   (static_cast<std::uint64_t>(static_cast<std::uint32_t>(k.iy)) * 19349663ULL) ^
                   (static_cast<std::uint64_t>(static_cast<std::uint32_t>(k.iz)) * 83492791ULL);
    return static_cast<std::size_t>(h);
  }
};

inline void check_resolution(double resolution) {
  if (!(resolution > 0.0) || !std::isfinite(resolution))
    throw ConfigError("voxel resolution must be positive and finite, got " + std::to_string(resolution));
}

/// Floor-convention voxel index. A point on a cell boundary belongs to the
/// cell whose lower face it lies on.
inline VoxelKey voxel_key(const Point3& p, double resolution) {
  check_resolution(resolution);
  return {static_cast<std::int32_t>(std::floor(p.x() / resolution)),
          static_cast<std::int32_t>(std::floor(p.y() / resolution)),
          static_cast<std::int32_t>(std::floor(p.z() / resolution))};
}

inline Point3 voxel_center(const VoxelKey& k, double resolution) {
  return {(k.ix + 0.5) * resolution, (k.iy + 0.5) * resolution, (k.iz + 0.5) * resolution};
}

// ============================================================================
// Scans
// ============================================================================

enum class PointLabel : std::uint8_t { static_point = 0, dynamic_point = 1 };

struct LabeledScan {
  std::vector<Point3> points;                      // sensor frame
  std::optional<std::vector<PointLabel>> labels;   // parallel to points when present
  double timestamp = 0.0;

  bool labels_consistent() const { return !labels || labels->size() == points.size(); }

  void validate() const {
    if (!labels_consistent()) throw ValidationError("scan labels length does not match point count");
    for (std::size_t i = 0; i < points.size(); ++i)
      if (!is_finite(points[i])) throw ValidationError("non-finite scan point at index " + std::to_string(i));
  }
};

}  // namespace smat

#endif  // SMAT_GEOMETRY_HPP
