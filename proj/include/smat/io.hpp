#ifndef SMAT_IO_HPP
#define SMAT_IO_HPP

#include "smat/eval_metrics.hpp"
#include "smat/geometry.hpp"
#include "smat/voxel_map.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>

namespace smat {

/// Malformed file content; what() reads "<source>:<line>: <message>".
class FormatError : public std::runtime_error {
 public:
  FormatError(const std::string& source, std::size_t line, const std::string& message)
      : std::runtime_error(source + ":" + std::to_string(line) + ": " + message), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

namespace detail {

inline std::vector<std::string_view> split_ws(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && (s[i] == ' ' || s[i] == '\t' || s[i] == '\r')) ++i;
    const std::size_t b = i;
    while (i < s.size() && s[i] != ' ' && s[i] != '\t' && s[i] != '\r') ++i;
    if (i > b) out.push_back(s.substr(b, i - b));
  }
  return out;
}

class LineReader {
 public:
  LineReader(std::istream& in, std::string source) : in_(in), source_(std::move(source)) {}

  bool next(std::string& line) {
    if (!std::getline(in_, line)) return false;
    ++line_no_;
    return true;
  }
  std::size_t line_no() const { return line_no_; }
  [[noreturn]] void fail(const std::string& msg) const { throw FormatError(source_, line_no_, msg); }
  [[noreturn]] void fail_at(std::size_t line, const std::string& msg) const { throw FormatError(source_, line, msg); }

  double number(std::string_view tok, const char* what) const {
    double v = 0.0;
    const auto* end = tok.data() + tok.size();
    const auto [ptr, ec] = std::from_chars(tok.data(), end, v);
    if (ec != std::errc() || ptr != end) fail(std::string("malformed number for ") + what + ": '" + std::string(tok) + "'");
    if (!std::isfinite(v)) fail(std::string("non-finite number for ") + what);
    return v;
  }

  long long integer(std::string_view tok, const char* what) const {
    long long v = 0;
    const auto* end = tok.data() + tok.size();
    const auto [ptr, ec] = std::from_chars(tok.data(), end, v);
    if (ec != std::errc() || ptr != end) fail(std::string("malformed integer for ") + what + ": '" + std::string(tok) + "'");
    return v;
  }

 private:
  std::istream& in_;
  std::string source_;
  std::size_t line_no_ = 0;
};

inline std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  std::string s(buf);
  if (s.starts_with("-") && s.find_first_not_of("0.", 1) == std::string::npos) s.erase(0, 1);  // no negative zero
  return s;
}

inline std::ifstream open_in(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw FormatError(path, 0, "cannot open file");
  return f;
}

inline std::ofstream open_out(const std::string& path) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw FormatError(path, 0, "cannot create file");
  return f;
}

}  // namespace detail

// ---------------------------------------------------------------- scans

inline void write_scan(std::ostream& out, const LabeledScan& scan) {
  scan.validate();
  const bool labeled = scan.labels.has_value();
  out << "SMAT-SCAN v1 " << detail::fixed(scan.timestamp, 6) << ' ' << scan.points.size() << ' ' << (labeled ? 1 : 0)
      << '\n';
  for (std::size_t i = 0; i < scan.points.size(); ++i) {
    const auto& p = scan.points[i];
    out << detail::fixed(p.x(), 6) << ' ' << detail::fixed(p.y(), 6) << ' ' << detail::fixed(p.z(), 6);
    if (labeled) out << ' ' << static_cast<int>((*scan.labels)[i]);
    out << '\n';
  }
}

inline LabeledScan read_scan(std::istream& in, const std::string& source = "<scan>") {
  detail::LineReader r(in, source);
  std::string line;
  if (!r.next(line)) r.fail_at(1, "empty file, expected SMAT-SCAN header");
  const auto h = detail::split_ws(line);
  if (h.size() != 5 || h[0] != "SMAT-SCAN" || h[1] != "v1")
    r.fail("bad header, expected 'SMAT-SCAN v1 <timestamp> <point-count> <labeled>'");
  LabeledScan scan;
  scan.timestamp = r.number(h[2], "timestamp");
  const long long count = r.integer(h[3], "point count");
  if (count < 0) r.fail("negative point count");
  const long long labeled = r.integer(h[4], "labeled flag");
  if (labeled != 0 && labeled != 1) r.fail("labeled flag must be 0 or 1");
  if (labeled) scan.labels.emplace();
  const std::size_t expected_fields = labeled ? 4 : 3;
  while (r.next(line)) {
    const auto t = detail::split_ws(line);
    if (t.empty()) r.fail("blank line");
    if (static_cast<long long>(scan.points.size()) >= count)
      r.fail("point count mismatch: header declares " + std::to_string(count) + " points, found more");
    if (t.size() != expected_fields)
      r.fail("expected " + std::to_string(expected_fields) + " fields, found " + std::to_string(t.size()));
    scan.points.emplace_back(r.number(t[0], "x"), r.number(t[1], "y"), r.number(t[2], "z"));
    if (labeled) {
      const long long l = r.integer(t[3], "label");
      if (l != 0 && l != 1) r.fail("label must be 0 or 1");
      scan.labels->push_back(static_cast<PointLabel>(l));
    }
  }
  if (static_cast<long long>(scan.points.size()) != count)
    r.fail_at(r.line_no() + 1, "point count mismatch: header declares " + std::to_string(count) + " points, found " +
                                   std::to_string(scan.points.size()));
  return scan;
}

inline void write_scan_file(const std::string& path, const LabeledScan& scan) {
  auto f = detail::open_out(path);
  write_scan(f, scan);
}

inline LabeledScan read_scan_file(const std::string& path) {
  auto f = detail::open_in(path);
  return read_scan(f, path);
}

// ---------------------------------------------------------------- poses

struct StampedPose {
  double timestamp = 0.0;
  PoseSE3 pose;
};

inline void write_poses(std::ostream& out, std::span<const StampedPose> poses) {
  for (std::size_t i = 0; i < poses.size(); ++i) {
    if (i > 0 && !(poses[i].timestamp > poses[i - 1].timestamp))
      throw ValidationError("write_poses: timestamps must increase (index " + std::to_string(i) + ")");
    const auto& t = poses[i].pose.translation();
    Eigen::Quaterniond q = poses[i].pose.quaternion();
    if (q.w() < 0) q.coeffs() = -q.coeffs();  // canonical hemisphere
    out << detail::fixed(poses[i].timestamp, 9) << ' ' << detail::fixed(t.x(), 9) << ' ' << detail::fixed(t.y(), 9)
        << ' ' << detail::fixed(t.z(), 9) << ' ' << detail::fixed(q.x(), 9) << ' ' << detail::fixed(q.y(), 9) << ' '
        << detail::fixed(q.z(), 9) << ' ' << detail::fixed(q.w(), 9) << '\n';
  }
}

/// Quaternions must be unit within 1e-6; they are renormalized on read.
inline std::vector<StampedPose> read_poses(std::istream& in, const std::string& source = "<poses>") {
  detail::LineReader r(in, source);
  std::vector<StampedPose> out;
  std::string line;
  while (r.next(line)) {
    const auto t = detail::split_ws(line);
    if (t.empty()) r.fail("blank line");
    if (t.size() != 8) r.fail("expected 8 fields 'timestamp tx ty tz qx qy qz qw', found " + std::to_string(t.size()));
    double v[8];
    static const char* names[8] = {"timestamp", "tx", "ty", "tz", "qx", "qy", "qz", "qw"};
    for (int k = 0; k < 8; ++k) v[k] = r.number(t[static_cast<std::size_t>(k)], names[k]);
    Eigen::Quaterniond q(v[7], v[4], v[5], v[6]);
    if (std::abs(q.norm() - 1.0) > 1e-6) r.fail("quaternion is not unit (norm " + detail::fixed(q.norm(), 9) + ")");
    q.normalize();
    if (!out.empty() && !(v[0] > out.back().timestamp)) r.fail("timestamps must be strictly increasing");
    out.push_back({v[0], PoseSE3(q, Point3(v[1], v[2], v[3]))});
  }
  return out;
}

inline void write_pose_file(const std::string& path, std::span<const StampedPose> poses) {
  auto f = detail::open_out(path);
  write_poses(f, poses);
}

inline std::vector<StampedPose> read_pose_file(const std::string& path) {
  auto f = detail::open_in(path);
  return read_poses(f, path);
}

// ---------------------------------------------------------------- maps

inline void write_map(std::ostream& out, const VoxelMap& map) {
  out << "SMAT-MAP v1 " << detail::fixed(map.resolution(), 6) << ' ' << map.size() << '\n';
  for (const auto& k : map.sorted_keys()) out << k.ix << ' ' << k.iy << ' ' << k.iz << '\n';
}

inline VoxelMap read_map(std::istream& in, const std::string& source = "<map>") {
  detail::LineReader r(in, source);
  std::string line;
  if (!r.next(line)) r.fail_at(1, "empty file, expected SMAT-MAP header");
  const auto h = detail::split_ws(line);
  if (h.size() != 4 || h[0] != "SMAT-MAP" || h[1] != "v1")
    r.fail("bad header, expected 'SMAT-MAP v1 <resolution-m> <voxel-count>'");
  const double res = r.number(h[2], "resolution");
  if (!(res > 0.0)) r.fail("resolution must be positive");
  const long long count = r.integer(h[3], "voxel count");
  if (count < 0) r.fail("negative voxel count");
  VoxelMap map(res);
  long long seen = 0;
  while (r.next(line)) {
    const auto t = detail::split_ws(line);
    if (t.empty()) r.fail("blank line");
    if (seen >= count) r.fail("voxel count mismatch: header declares " + std::to_string(count) + " voxels, found more");
    if (t.size() != 3) r.fail("expected 3 fields 'ix iy iz', found " + std::to_string(t.size()));
    auto key_part = [&](std::string_view tok, const char* what) {
      const long long v = r.integer(tok, what);
      if (v < std::numeric_limits<std::int32_t>::min() || v > std::numeric_limits<std::int32_t>::max())
        r.fail(std::string(what) + " out of 32-bit range");
      return static_cast<std::int32_t>(v);
    };
    const VoxelKey k{key_part(t[0], "ix"), key_part(t[1], "iy"), key_part(t[2], "iz")};
    if (!map.insert(k))
      r.fail("duplicate voxel key " + std::to_string(k.ix) + " " + std::to_string(k.iy) + " " + std::to_string(k.iz));
    ++seen;
  }
  if (seen != count)
    r.fail_at(r.line_no() + 1, "voxel count mismatch: header declares " + std::to_string(count) + " voxels, found " +
                                   std::to_string(seen));
  return map;
}

inline void write_map_file(const std::string& path, const VoxelMap& map) {
  auto f = detail::open_out(path);
  write_map(f, map);
}

inline VoxelMap read_map_file(const std::string& path) {
  auto f = detail::open_in(path);
  return read_map(f, path);
}

// ---------------------------------------------------------------- tracks

/// Records are written sorted by (frame, id).
inline void write_tracks(std::ostream& out, std::span<const TrackRecord> records) {
  validate_tracks(records, "write_tracks");
  std::vector<TrackRecord> sorted(records.begin(), records.end());
  std::sort(sorted.begin(), sorted.end(),
            [](const TrackRecord& a, const TrackRecord& b) { return std::pair(a.frame, a.id) < std::pair(b.frame, b.id); });
  out << "SMAT-TRACKS v1\n";
  for (const auto& t : sorted) {
    out << t.frame << ' ' << t.id;
    for (int a = 0; a < 3; ++a) out << ' ' << detail::fixed(t.box.min[a], 6);
    for (int a = 0; a < 3; ++a) out << ' ' << detail::fixed(t.box.max[a], 6);
    out << '\n';
  }
}

inline std::vector<TrackRecord> read_tracks(std::istream& in, const std::string& source = "<tracks>") {
  detail::LineReader r(in, source);
  std::string line;
  if (!r.next(line)) r.fail_at(1, "empty file, expected SMAT-TRACKS header");
  const auto h = detail::split_ws(line);
  if (h.size() != 2 || h[0] != "SMAT-TRACKS" || h[1] != "v1") r.fail("bad header, expected 'SMAT-TRACKS v1'");
  std::vector<TrackRecord> out;
  std::set<std::pair<int, int>> seen;
  while (r.next(line)) {
    const auto t = detail::split_ws(line);
    if (t.empty()) r.fail("blank line");
    if (t.size() != 8) r.fail("expected 8 fields 'frame id xmin ymin zmin xmax ymax zmax', found " + std::to_string(t.size()));
    TrackRecord rec;
    rec.frame = static_cast<int>(r.integer(t[0], "frame"));
    rec.id = static_cast<int>(r.integer(t[1], "id"));
    rec.box.min = {r.number(t[2], "xmin"), r.number(t[3], "ymin"), r.number(t[4], "zmin")};
    rec.box.max = {r.number(t[5], "xmax"), r.number(t[6], "ymax"), r.number(t[7], "zmax")};
    if (!rec.box.valid()) r.fail("box min exceeds max");
    if (!seen.emplace(rec.frame, rec.id).second)
      r.fail("duplicate (frame, id) = (" + std::to_string(rec.frame) + ", " + std::to_string(rec.id) + ")");
    out.push_back(rec);
  }
  return out;
}

inline void write_track_file(const std::string& path, std::span<const TrackRecord> records) {
  auto f = detail::open_out(path);
  write_tracks(f, records);
}

inline std::vector<TrackRecord> read_track_file(const std::string& path) {
  auto f = detail::open_in(path);
  return read_tracks(f, path);
}

}  // namespace smat

#endif  // SMAT_IO_HPP
