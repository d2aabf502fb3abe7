#ifndef SMAT_RANGE_IMAGE_HPP
#define SMAT_RANGE_IMAGE_HPP

#include "smat/geometry.hpp"

#include <numbers>

namespace smat {

inline constexpr double deg_to_rad(double deg) { return deg * std::numbers::pi / 180.0; }

/**
 * Spherical projection geometry. Rows bin elevation (row 0 at the lowest
 * elevation), columns bin azimuth (column 0 at `h_min`). Both use floor
 * binning, so a direction on a bin boundary belongs to the bin it opens.
 * The vertical interval is closed at the top; the horizontal interval is
 * half-open and wraps when it spans the full circle.
 */
struct RangeImageGeometry {
  int rows = 32;
  int cols = 900;
  double v_min = deg_to_rad(-16.0);
  double v_max = deg_to_rad(16.0);
  double h_min = -std::numbers::pi;
  double h_max = std::numbers::pi;

  void validate() const {
    if (rows < 1 || cols < 1) throw ConfigError("range image needs at least one row and one column");
    if (!(v_min < v_max) || !(h_min < h_max) || !std::isfinite(v_min) || !std::isfinite(v_max) ||
        !std::isfinite(h_min) || !std::isfinite(h_max))
      throw ConfigError("range image FOV bounds must be finite and strictly ordered");
    if (v_min < -std::numbers::pi / 2 || v_max > std::numbers::pi / 2)
      throw ConfigError("vertical FOV must lie within [-pi/2, pi/2]");
    if (h_max - h_min > 2.0 * std::numbers::pi + 1e-12) throw ConfigError("horizontal FOV wider than a full turn");
  }

  bool full_circle() const { return h_max - h_min >= 2.0 * std::numbers::pi - 1e-12; }

  std::size_t pixel_count() const { return static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols); }

  /// Direction through the centre of pixel (row, col), unit length.
  Point3 pixel_direction(int row, int col) const {
    const double el = v_min + (row + 0.5) * (v_max - v_min) / rows;
    const double az = h_min + (col + 0.5) * (h_max - h_min) / cols;
    return {std::cos(el) * std::cos(az), std::cos(el) * std::sin(az), std::sin(el)};
  }
};

struct Pixel {
  int row = 0;
  int col = 0;
  friend bool operator==(const Pixel&, const Pixel&) = default;
};

enum class PixelMiss { none, zero_range, outside_fov, non_finite };

/// Pixel whose angular cone contains the direction of `p`, or nullopt.
/// When `why` is given it receives the reason for a miss.
inline std::optional<Pixel> pixel_of(const Point3& p, const RangeImageGeometry& g, PixelMiss* why = nullptr) {
  auto miss = [&](PixelMiss m) -> std::optional<Pixel> {
    if (why) *why = m;
    return std::nullopt;
  };
  if (why) *why = PixelMiss::none;
  if (!is_finite(p)) return miss(PixelMiss::non_finite);
  const double horiz = std::hypot(p.x(), p.y());
  if (horiz == 0.0 && p.z() == 0.0) return miss(PixelMiss::zero_range);

  const double el = std::atan2(p.z(), horiz);
  if (el < g.v_min || el > g.v_max) return miss(PixelMiss::outside_fov);
  int row = static_cast<int>(std::floor((el - g.v_min) / (g.v_max - g.v_min) * g.rows));
  if (row == g.rows) row = g.rows - 1;  // el == v_max

  const double az = std::atan2(p.y(), p.x());
  int col;
  if (g.full_circle()) {
    double u = (az - g.h_min) / (g.h_max - g.h_min);
    u -= std::floor(u);
    col = static_cast<int>(std::floor(u * g.cols));
    if (col >= g.cols) col = 0;
  } else {
    if (az < g.h_min || az >= g.h_max) return miss(PixelMiss::outside_fov);
    col = static_cast<int>(std::floor((az - g.h_min) / (g.h_max - g.h_min) * g.cols));
    if (col >= g.cols) return miss(PixelMiss::outside_fov);
  }
  return Pixel{row, col};
}

/// Dense range image. Empty pixels carry no value.
class RangeImage {
 public:
  explicit RangeImage(RangeImageGeometry geometry)
      : geometry_(geometry), ranges_(geometry.pixel_count(), 0.0), filled_(geometry.pixel_count(), 0) {
    geometry_.validate();
  }

  const RangeImageGeometry& geometry() const { return geometry_; }
  int rows() const { return geometry_.rows; }
  int cols() const { return geometry_.cols; }

  std::optional<double> at(int row, int col) const {
    const auto i = index(row, col);
    if (!filled_[i]) return std::nullopt;
    return ranges_[i];
  }
  std::optional<double> at(const Pixel& px) const { return at(px.row, px.col); }

  /// Keeps the minimum of the current value and `range`.
  void insert(const Pixel& px, double range) {
    const auto i = index(px.row, px.col);
    if (!filled_[i] || range < ranges_[i]) {
      ranges_[i] = range;
      filled_[i] = 1;
    }
  }

  std::size_t filled_count() const {
    std::size_t n = 0;
    for (auto f : filled_) n += f;
    return n;
  }

  friend bool operator==(const RangeImage& a, const RangeImage& b) {
    if (a.geometry_.rows != b.geometry_.rows || a.geometry_.cols != b.geometry_.cols) return false;
    for (std::size_t i = 0; i < a.filled_.size(); ++i) {
      if (a.filled_[i] != b.filled_[i]) return false;
      if (a.filled_[i] && a.ranges_[i] != b.ranges_[i]) return false;
    }
    return true;
  }

 private:
  std::size_t index(int row, int col) const {
    return static_cast<std::size_t>(row) * static_cast<std::size_t>(geometry_.cols) + static_cast<std::size_t>(col);
  }

  RangeImageGeometry geometry_;
  std::vector<double> ranges_;
  std::vector<std::uint8_t> filled_;
};

/// Minimum-range spherical projection of `points` (already in the viewing
/// frame). Points outside the FOV or at the origin are ignored.
inline RangeImage project_range_image(std::span<const Point3> points, const RangeImageGeometry& g) {
  RangeImage image(g);
  for (const auto& p : points) {
    if (auto px = pixel_of(p, g)) image.insert(*px, range_3d(p));
  }
  return image;
}

}  // namespace smat

#endif  // SMAT_RANGE_IMAGE_HPP
