#pragma once

#include <array>
#include <cmath>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace skgait {

// Millimetres throughout.
struct Vec3 {
  double x = 0.0, y = 0.0, z = 0.0;

  friend Vec3 operator+(const Vec3& a, const Vec3& b) { return {a.x + b.x, a.y + b.y, a.z + b.z}; }
  friend Vec3 operator-(const Vec3& a, const Vec3& b) { return {a.x - b.x, a.y - b.y, a.z - b.z}; }
  friend Vec3 operator*(double s, const Vec3& a) { return {s * a.x, s * a.y, s * a.z}; }
  friend Vec3 operator-(const Vec3& a) { return {-a.x, -a.y, -a.z}; }
  Vec3& operator+=(const Vec3& o) {
    x += o.x;
    y += o.y;
    z += o.z;
    return *this;
  }
  friend bool operator==(const Vec3&, const Vec3&) = default;

  double operator[](int i) const { return i == 0 ? x : (i == 1 ? y : z); }
  double& operator[](int i) { return i == 0 ? x : (i == 1 ? y : z); }
  bool finite() const { return std::isfinite(x) && std::isfinite(y) && std::isfinite(z); }
};

inline double dot(const Vec3& a, const Vec3& b) { return a.x * b.x + a.y * b.y + a.z * b.z; }
inline Vec3 cross(const Vec3& a, const Vec3& b) {
  return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}
inline double norm(const Vec3& a) { return std::sqrt(dot(a, a)); }
inline double distance(const Vec3& a, const Vec3& b) { return norm(a - b); }

// Row-major 3x3.
struct Mat3 {
  std::array<double, 9> m{1, 0, 0, 0, 1, 0, 0, 0, 1};

  static Mat3 identity() { return Mat3{}; }
  static Mat3 zero() { return Mat3{{0, 0, 0, 0, 0, 0, 0, 0, 0}}; }
  static Mat3 rotation_x(double rad);
  static Mat3 rotation_y(double rad);
  static Mat3 rotation_z(double rad);
  // Rotation by `rad` about unit vector `axis` (Rodrigues).
  static Mat3 axis_angle(const Vec3& axis, double rad);
  static Mat3 from_rows(const Vec3& r0, const Vec3& r1, const Vec3& r2);

  double operator()(int r, int c) const { return m[static_cast<std::size_t>(3 * r + c)]; }
  double& operator()(int r, int c) { return m[static_cast<std::size_t>(3 * r + c)]; }

  Mat3 transposed() const;
  double determinant() const;
  friend bool operator==(const Mat3&, const Mat3&) = default;
};

Mat3 operator*(const Mat3& a, const Mat3& b);
Vec3 operator*(const Mat3& a, const Vec3& v);
Mat3 operator*(double s, const Mat3& a);

struct RotationCheck {
  bool ok = true;
  double orthonormality_error = 0.0;  // max |(RᵀR − I)_ij|
  double determinant_error = 0.0;     // |det R − 1|
  bool finite = true;
  std::string message;  // empty when ok
};

inline constexpr double kRotationTolerance = 1e-9;

RotationCheck validate_rotation(const Mat3& m, double tolerance = kRotationTolerance);

enum class DeviceId { master = 0, sub1 = 1, sub2 = 2 };
enum class Camera { color = 0, depth = 1 };

inline constexpr std::array<DeviceId, 3> kDevices{DeviceId::master, DeviceId::sub1, DeviceId::sub2};

struct FrameId {
  DeviceId device = DeviceId::master;
  Camera camera = Camera::color;
  friend bool operator==(const FrameId&, const FrameId&) = default;
};

std::string_view to_string(DeviceId d);
std::string_view to_string(Camera c);
std::string to_string(const FrameId& f);  // "sub2.depth"
DeviceId parse_device(std::string_view s);
FrameId parse_frame(std::string_view s);

inline constexpr FrameId kMasterColor{DeviceId::master, Camera::color};

// Maps points expressed in `from` into `to`: p_to = R·p_from + T.
// Construction validates the rotation, so a constructed transform is always
// applicable.
class RigidTransform {
 public:
  RigidTransform() = default;  // identity, master.color -> master.color
  RigidTransform(const Mat3& rotation, const Vec3& translation, FrameId from, FrameId to);

  static RigidTransform identity(FrameId from = kMasterColor, FrameId to = kMasterColor);

  const Mat3& rotation() const { return rotation_; }
  const Vec3& translation() const { return translation_; }
  FrameId from() const { return from_; }
  FrameId to() const { return to_; }

  friend bool operator==(const RigidTransform&, const RigidTransform&) = default;

 private:
  Mat3 rotation_{};
  Vec3 translation_{};
  FrameId from_{};
  FrameId to_{};
};

struct FramedPoint {
  Vec3 position;
  FrameId frame;
};

Vec3 apply(const RigidTransform& t, const Vec3& p);
// Checks that the point lives in t.from() and tags the result with t.to().
FramedPoint apply(const RigidTransform& t, const FramedPoint& p);
RigidTransform invert(const RigidTransform& t);
// a ∘ b: first b, then a. Requires b.to() == a.from().
RigidTransform compose(const RigidTransform& a, const RigidTransform& b);

enum class ChainMode { paper, strict };
std::string_view to_string(ChainMode m);
ChainMode parse_chain_mode(std::string_view s);

// Stereo calibrations of a three-device rig. Stores each transform once;
// lookups invert on demand.
class CalibrationSet {
 public:
  CalibrationSet() = default;
  explicit CalibrationSet(std::vector<RigidTransform> transforms);

  // Every camera of every device as identity (a rig whose frames coincide).
  static CalibrationSet identity_rig();

  const std::vector<RigidTransform>& transforms() const { return transforms_; }
  void add(const RigidTransform& t);

  // Transform from -> to if stored directly or as its inverse.
  std::optional<RigidTransform> find(FrameId from, FrameId to) const;
  RigidTransform require(FrameId from, FrameId to) const;

  // Throws CalibrationError unless every device depth frame reaches master.color.
  void validate() const;

 private:
  std::vector<RigidTransform> transforms_;
};

// Transform from device-`d` depth frame into the master colour frame.
//
// strict: color_d->master_color ∘ depth_d->color_d (pure frame composition).
// paper:  same, plus the master's R_M·T_M offset added to the translation for
//         subordinate devices. For the master both modes return depth->color.
RigidTransform chain_to_master(const CalibrationSet& c, DeviceId d, ChainMode mode = ChainMode::strict);

// R_M·T_M of the master's depth->color calibration.
Vec3 master_offset(const CalibrationSet& c);

// Calibration file: JSON document {format, version, transforms:[{from,to,R,T}]}
// with every number written in 17-significant-digit scientific notation.
CalibrationSet load_calibration(const std::string& path);
CalibrationSet parse_calibration(const std::string& text);
std::string serialize_calibration(const CalibrationSet& c);
void save_calibration(const CalibrationSet& c, const std::string& path);

}  // namespace skgait
