#include "skgait/geometry.hpp"

#include <algorithm>
#include <sstream>

#include "json.hpp"
#include "skgait/error.hpp"
#include "skgait/textio.hpp"

namespace skgait {

Mat3 Mat3::rotation_x(double rad) {
  const double c = std::cos(rad), s = std::sin(rad);
  return Mat3{{1, 0, 0, 0, c, -s, 0, s, c}};
}

Mat3 Mat3::rotation_y(double rad) {
  const double c = std::cos(rad), s = std::sin(rad);
  return Mat3{{c, 0, s, 0, 1, 0, -s, 0, c}};
}

Mat3 Mat3::rotation_z(double rad) {
  const double c = std::cos(rad), s = std::sin(rad);
  return Mat3{{c, -s, 0, s, c, 0, 0, 0, 1}};
}

Mat3 Mat3::axis_angle(const Vec3& axis, double rad) {
  const Vec3 u = (1.0 / norm(axis)) * axis;
  const double c = std::cos(rad), s = std::sin(rad), t = 1.0 - c;
  return Mat3{{t * u.x * u.x + c, t * u.x * u.y - s * u.z, t * u.x * u.z + s * u.y,
               t * u.x * u.y + s * u.z, t * u.y * u.y + c, t * u.y * u.z - s * u.x,
               t * u.x * u.z - s * u.y, t * u.y * u.z + s * u.x, t * u.z * u.z + c}};
}

Mat3 Mat3::from_rows(const Vec3& r0, const Vec3& r1, const Vec3& r2) {
  return Mat3{{r0.x, r0.y, r0.z, r1.x, r1.y, r1.z, r2.x, r2.y, r2.z}};
}

Mat3 Mat3::transposed() const {
  Mat3 t;
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) t(r, c) = (*this)(c, r);
  return t;
}

double Mat3::determinant() const {
  const Mat3& a = *this;
  return a(0, 0) * (a(1, 1) * a(2, 2) - a(1, 2) * a(2, 1)) -
         a(0, 1) * (a(1, 0) * a(2, 2) - a(1, 2) * a(2, 0)) +
         a(0, 2) * (a(1, 0) * a(2, 1) - a(1, 1) * a(2, 0));
}

Mat3 operator*(const Mat3& a, const Mat3& b) {
  Mat3 r = Mat3::zero();
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) r(i, j) = a(i, 0) * b(0, j) + a(i, 1) * b(1, j) + a(i, 2) * b(2, j);
  return r;
}

Vec3 operator*(const Mat3& a, const Vec3& v) {
  return {a(0, 0) * v.x + a(0, 1) * v.y + a(0, 2) * v.z, a(1, 0) * v.x + a(1, 1) * v.y + a(1, 2) * v.z,
          a(2, 0) * v.x + a(2, 1) * v.y + a(2, 2) * v.z};
}

Mat3 operator*(double s, const Mat3& a) {
  Mat3 r = a;
  for (double& e : r.m) e *= s;
  return r;
}

RotationCheck validate_rotation(const Mat3& m, double tolerance) {
  RotationCheck check;
  check.finite = std::all_of(m.m.begin(), m.m.end(), [](double v) { return std::isfinite(v); });
  if (!check.finite) {
    check.ok = false;
    check.message = "rotation has non-finite entries";
    return check;
  }
  const Mat3 rtr = m.transposed() * m;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      check.orthonormality_error =
          std::max(check.orthonormality_error, std::abs(rtr(i, j) - (i == j ? 1.0 : 0.0)));
  check.determinant_error = std::abs(m.determinant() - 1.0);

  std::ostringstream msg;
  if (check.orthonormality_error > tolerance)
    msg << "not orthonormal: max |RtR - I| = " << check.orthonormality_error << " > " << tolerance;
  if (check.determinant_error > tolerance) {
    if (msg.tellp() > 0) msg << "; ";
    msg << "det = " << m.determinant() << ", |det - 1| = " << check.determinant_error << " > " << tolerance;
  }
  check.message = msg.str();
  check.ok = check.message.empty();
  return check;
}

std::string_view to_string(DeviceId d) {
  switch (d) {
    case DeviceId::master: return "master";
    case DeviceId::sub1: return "sub1";
    case DeviceId::sub2: return "sub2";
  }
  return "?";
}

std::string_view to_string(Camera c) { return c == Camera::color ? "color" : "depth"; }

std::string to_string(const FrameId& f) {
  return std::string(to_string(f.device)) + "." + std::string(to_string(f.camera));
}

DeviceId parse_device(std::string_view s) {
  if (s == "master") return DeviceId::master;
  if (s == "sub1") return DeviceId::sub1;
  if (s == "sub2") return DeviceId::sub2;
  throw FormatError("unknown device '" + std::string(s) + "'");
}

FrameId parse_frame(std::string_view s) {
  const auto dot_pos = s.find('.');
  if (dot_pos == std::string_view::npos) throw FormatError("frame '" + std::string(s) + "' is not device.camera");
  const auto cam = s.substr(dot_pos + 1);
  Camera camera;
  if (cam == "color")
    camera = Camera::color;
  else if (cam == "depth")
    camera = Camera::depth;
  else
    throw FormatError("unknown camera '" + std::string(cam) + "'");
  return {parse_device(s.substr(0, dot_pos)), camera};
}

RigidTransform::RigidTransform(const Mat3& rotation, const Vec3& translation, FrameId from, FrameId to)
    : rotation_(rotation), translation_(translation), from_(from), to_(to) {
  const RotationCheck check = validate_rotation(rotation);
  if (!check.ok) throw CalibrationError(to_string(from) + " -> " + to_string(to) + ": " + check.message);
  if (!translation.finite()) throw CalibrationError(to_string(from) + " -> " + to_string(to) + ": non-finite translation");
}

RigidTransform RigidTransform::identity(FrameId from, FrameId to) { return {Mat3::identity(), Vec3{}, from, to}; }

Vec3 apply(const RigidTransform& t, const Vec3& p) { return t.rotation() * p + t.translation(); }

FramedPoint apply(const RigidTransform& t, const FramedPoint& p) {
  if (!(p.frame == t.from()))
    throw ChainError("point in " + to_string(p.frame) + " but transform starts at " + to_string(t.from()));
  return {apply(t, p.position), t.to()};
}

RigidTransform invert(const RigidTransform& t) {
  const Mat3 rt = t.rotation().transposed();
  return {rt, -(rt * t.translation()), t.to(), t.from()};
}

RigidTransform compose(const RigidTransform& a, const RigidTransform& b) {
  if (!(b.to() == a.from()))
    throw ChainError("cannot compose " + to_string(b.from()) + "->" + to_string(b.to()) + " with " +
                     to_string(a.from()) + "->" + to_string(a.to()));
  return {a.rotation() * b.rotation(), a.rotation() * b.translation() + a.translation(), b.from(), a.to()};
}

std::string_view to_string(ChainMode m) { return m == ChainMode::paper ? "paper" : "strict"; }

ChainMode parse_chain_mode(std::string_view s) {
  if (s == "paper") return ChainMode::paper;
  if (s == "strict") return ChainMode::strict;
  throw ConfigError("chain mode must be 'paper' or 'strict', got '" + std::string(s) + "'");
}

CalibrationSet::CalibrationSet(std::vector<RigidTransform> transforms) : transforms_(std::move(transforms)) {}

CalibrationSet CalibrationSet::identity_rig() {
  CalibrationSet c;
  for (DeviceId d : kDevices) c.add(RigidTransform::identity({d, Camera::depth}, {d, Camera::color}));
  c.add(RigidTransform::identity({DeviceId::sub1, Camera::color}, kMasterColor));
  c.add(RigidTransform::identity({DeviceId::sub2, Camera::color}, kMasterColor));
  return c;
}

void CalibrationSet::add(const RigidTransform& t) {
  if (t.from() == t.to()) throw CalibrationError("transform from a frame to itself: " + to_string(t.from()));
  transforms_.push_back(t);
}

std::optional<RigidTransform> CalibrationSet::find(FrameId from, FrameId to) const {
  for (const auto& t : transforms_) {
    if (t.from() == from && t.to() == to) return t;
  }
  for (const auto& t : transforms_) {
    if (t.from() == to && t.to() == from) return invert(t);
  }
  return std::nullopt;
}

RigidTransform CalibrationSet::require(FrameId from, FrameId to) const {
  auto t = find(from, to);
  if (!t) throw ChainError("calibration set lacks " + to_string(from) + " <-> " + to_string(to));
  return *t;
}

void CalibrationSet::validate() const {
  for (DeviceId d : kDevices) {
    try {
      (void)chain_to_master(*this, d, ChainMode::strict);
    } catch (const ChainError& e) {
      throw CalibrationError(std::string("no path to master.color: ") + e.what());
    }
  }
}

Vec3 master_offset(const CalibrationSet& c) {
  const RigidTransform m = c.require({DeviceId::master, Camera::depth}, kMasterColor);
  return m.rotation() * m.translation();
}

RigidTransform chain_to_master(const CalibrationSet& c, DeviceId d, ChainMode mode) {
  const FrameId depth{d, Camera::depth};
  const FrameId color{d, Camera::color};
  const RigidTransform depth_to_color = c.require(depth, color);
  if (d == DeviceId::master) return depth_to_color;

  const RigidTransform strict = compose(c.require(color, kMasterColor), depth_to_color);
  if (mode == ChainMode::strict) return strict;
  return {strict.rotation(), strict.translation() + master_offset(c), strict.from(), strict.to()};
}

namespace {

using nlohmann::json;

template <std::size_t N>
std::array<double, N> read_numbers(const json& j, const char* key) {
  if (!j.contains(key) || !j.at(key).is_array() || j.at(key).size() != N)
    throw FormatError(std::string("calibration entry needs '") + key + "' with " + std::to_string(N) + " numbers");
  std::array<double, N> out{};
  for (std::size_t i = 0; i < N; ++i) {
    const auto& v = j.at(key)[i];
    if (!v.is_number()) throw FormatError(std::string("non-numeric value in '") + key + "'");
    out[i] = v.get<double>();
  }
  return out;
}

}  // namespace

CalibrationSet parse_calibration(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw FormatError(std::string("calibration is not valid JSON: ") + e.what());
  }
  if (doc.value("format", "") != "skgait-calibration") throw FormatError("not a skgait-calibration document");
  if (doc.value("version", 0) != 1) throw FormatError("unsupported calibration version");
  if (!doc.contains("transforms") || !doc.at("transforms").is_array()) throw FormatError("missing 'transforms' array");

  CalibrationSet set;
  for (const auto& entry : doc.at("transforms")) {
    for (const auto& [key, _] : entry.items()) {
      if (key != "from" && key != "to" && key != "R" && key != "T")
        throw FormatError("unknown calibration key '" + key + "'");
    }
    const FrameId from = parse_frame(entry.at("from").get<std::string>());
    const FrameId to = parse_frame(entry.at("to").get<std::string>());
    const auto r = read_numbers<9>(entry, "R");
    const auto t = read_numbers<3>(entry, "T");
    set.add(RigidTransform(Mat3{r}, Vec3{t[0], t[1], t[2]}, from, to));
  }
  set.validate();
  return set;
}

CalibrationSet load_calibration(const std::string& path) { return parse_calibration(read_text_file(path)); }

std::string serialize_calibration(const CalibrationSet& c) {
  std::ostringstream out;
  out << "{\n  \"format\": \"skgait-calibration\",\n  \"version\": 1,\n  \"transforms\": [";
  bool first = true;
  for (const auto& t : c.transforms()) {
    out << (first ? "\n" : ",\n");
    first = false;
    out << "    {\"from\": \"" << to_string(t.from()) << "\", \"to\": \"" << to_string(t.to()) << "\",\n     \"R\": [";
    for (int i = 0; i < 9; ++i) out << (i ? ", " : "") << format_exact(t.rotation().m[static_cast<std::size_t>(i)]);
    out << "],\n     \"T\": [";
    for (int i = 0; i < 3; ++i) out << (i ? ", " : "") << format_exact(t.translation()[i]);
    out << "]}";
  }
  out << "\n  ]\n}\n";
  return out.str();
}

void save_calibration(const CalibrationSet& c, const std::string& path) {
  write_text_file(path, serialize_calibration(c));
}

}  // namespace skgait
