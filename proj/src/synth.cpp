#include "skgait/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <numbers>
#include <random>
#include <thread>

#include "skgait/error.hpp"
#include "skgait/textio.hpp"

namespace skgait::synth {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kDeg = kPi / 180.0;

std::uint64_t splitmix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

template <typename... Ts>
std::uint64_t mix(std::uint64_t seed, Ts... parts) {
  std::uint64_t h = splitmix(seed);
  ((h = splitmix(h ^ static_cast<std::uint64_t>(parts))), ...);
  return h;
}

double uniform(std::mt19937_64& rng, double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); }

void set_bone(IdentityProfile& p, Joint child, double len) {
  p.bone_length[static_cast<std::size_t>(idx(child) - 1)] = len;
}

// Unit direction in the sagittal plane: angle 0 points down, positive swings
// forward.
Vec3 sagittal(const Vec3& forward, const Vec3& up, double angle) {
  return std::cos(angle) * (-up) + std::sin(angle) * forward;
}

bool is_left(int j) {
  return j == idx(Joint::l_shoulder) || j == idx(Joint::l_elbow) || j == idx(Joint::l_wrist) ||
         j == idx(Joint::l_hip) || j == idx(Joint::l_knee) || j == idx(Joint::l_ankle);
}
bool is_right(int j) {
  return j == idx(Joint::r_shoulder) || j == idx(Joint::r_elbow) || j == idx(Joint::r_wrist) ||
         j == idx(Joint::r_hip) || j == idx(Joint::r_knee) || j == idx(Joint::r_ankle);
}
bool is_distal(int j) {
  return j == idx(Joint::l_elbow) || j == idx(Joint::l_wrist) || j == idx(Joint::r_elbow) ||
         j == idx(Joint::r_wrist) || j == idx(Joint::l_knee) || j == idx(Joint::l_ankle) ||
         j == idx(Joint::r_knee) || j == idx(Joint::r_ankle);
}

DevicePose look_at(DeviceId d, const Vec3& position, const Vec3& target) {
  const Vec3 up{0, 0, 1};
  const Vec3 z = (1.0 / norm(target - position)) * (target - position);
  const Vec3 xr = cross(z, up);
  const Vec3 x = (1.0 / norm(xr)) * xr;
  const Vec3 y = cross(z, x);
  // Columns x, y, z.
  return {d, position, Mat3::from_rows(x, y, z).transposed()};
}

RigidTransform depth_to_color(DeviceId d) {
  return RigidTransform(Mat3::rotation_x(-6.0 * kDeg), {-32.0, -2.0, 4.0}, {d, Camera::depth}, {d, Camera::color});
}

}  // namespace

double IdentityProfile::rest_height() const {
  return bone(Joint::head) + bone(Joint::neck) + bone(Joint::spine_navel) +
         (bone(Joint::l_knee) + bone(Joint::l_ankle) + bone(Joint::r_knee) + bone(Joint::r_ankle)) / 2.0;
}

IdentityProfile gen_identity(std::uint64_t seed) {
  std::mt19937_64 rng(mix(seed, 0x5e7));
  return gen_identity(seed, uniform(rng, 0.0, 1.0) < 0.5 ? "F" : "M");
}

IdentityProfile gen_identity(std::uint64_t seed, const std::string& sex) {
  if (sex != "F" && sex != "M") throw ConfigError("sex must be F or M, got '" + sex + "'");
  std::mt19937_64 rng(mix(seed, 0x1d));
  IdentityProfile p;
  p.sex = sex;
  const bool female = sex == "F";
  const double height = female ? uniform(rng, 1550.0, 1760.0) : uniform(rng, 1620.0, 1850.0);
  auto jitter = [&](double v) { return v * uniform(rng, 0.94, 1.06); };

  // Segment fractions of the height, then rescaled so the height is exact.
  double head = jitter(0.13), upper = jitter(0.19), lower = jitter(0.13), thigh = jitter(0.30), shank = jitter(0.25);
  const double asym_thigh = uniform(rng, 0.99, 1.01), asym_shank = uniform(rng, 0.99, 1.01);
  const double total = head + upper + lower + (thigh * (1 + asym_thigh) + shank * (1 + asym_shank)) / 2.0;
  const double k = height / total;
  set_bone(p, Joint::head, head * k);
  set_bone(p, Joint::neck, upper * k);
  set_bone(p, Joint::spine_navel, lower * k);
  set_bone(p, Joint::l_knee, thigh * k);
  set_bone(p, Joint::r_knee, thigh * asym_thigh * k);
  set_bone(p, Joint::l_ankle, shank * k);
  set_bone(p, Joint::r_ankle, shank * asym_shank * k);

  const double sb = height * jitter(female ? 0.222 : 0.238);
  const double shr = jitter(female ? 1.22 : 1.45);
  set_bone(p, Joint::l_shoulder, sb / 2.0);
  set_bone(p, Joint::r_shoulder, sb / 2.0);
  set_bone(p, Joint::l_hip, sb / shr / 2.0);
  set_bone(p, Joint::r_hip, sb / shr / 2.0);
  const double upper_arm = height * jitter(0.186), forearm = height * jitter(0.146);
  set_bone(p, Joint::l_elbow, upper_arm);
  set_bone(p, Joint::r_elbow, upper_arm);
  set_bone(p, Joint::l_wrist, forearm);
  set_bone(p, Joint::r_wrist, forearm);

  p.frequency = uniform(rng, 0.8, 1.1);
  p.stride_length = height * uniform(rng, 0.72, 0.9);
  p.hip_swing = uniform(rng, 0.33, 0.5);
  p.knee_flex = uniform(rng, 0.45, 0.75);
  p.arm_swing = uniform(rng, 0.18, 0.5);
  p.elbow_flex = uniform(rng, 0.12, 0.4);
  p.trunk_lean = uniform(rng, 0.0, 0.1);
  p.knee_phase = uniform(rng, 0.3, 0.8);
  p.arm_phase = uniform(rng, -0.25, 0.25);
  p.noise_scale = uniform(rng, 0.8, 1.2);
  return p;
}

GroundTruth simulate_walk(const IdentityProfile& p, const WalkSpec& walk, int n_frames) {
  if (n_frames < 12) throw ConfigError("simulate_walk needs at least 12 frames, got " + std::to_string(n_frames));
  const std::size_t n = static_cast<std::size_t>(n_frames);
  const double dt = 1.0 / kFps;
  const double freq = p.frequency * walk.frequency_scale;
  const double speed = p.stride_length * freq * walk.speed_scale;
  const double duration = dt * double(n - 1);
  const double base = -90.0 * kDeg + walk.view_degrees * kDeg;

  GroundTruth gt;
  gt.heading.resize(n);
  std::vector<Vec3> path(n);
  for (std::size_t i = 0; i < n; ++i) {
    double h = base;
    if (walk.turning) {
      const double turn = std::min(1.0, duration / 2.0);
      const double u = std::clamp((dt * double(i) - duration / 2.0) / turn + 0.5, 0.0, 1.0);
      h = base - 45.0 * kDeg + 90.0 * kDeg * (u * u * (3.0 - 2.0 * u));
    }
    gt.heading[i] = h;
  }
  for (std::size_t i = 1; i < n; ++i) {
    const double h = 0.5 * (gt.heading[i - 1] + gt.heading[i]);
    path[i] = path[i - 1] + (speed * dt) * Vec3{std::cos(h), std::sin(h), 0.0};
  }
  Vec3 centre{};
  for (const auto& q : path) centre += q;
  centre = (1.0 / double(n)) * centre;

  const Vec3 up{0, 0, 1};
  const double leg = 0.5 * (p.bone(Joint::l_knee) + p.bone(Joint::l_ankle) + p.bone(Joint::r_knee) +
                            p.bone(Joint::r_ankle));
  gt.poses.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double t = dt * double(i);
    const double phase = 2.0 * kPi * freq * t + walk.start_phase;
    const double h = gt.heading[i];
    const Vec3 fwd{std::cos(h), std::sin(h), 0.0};
    const Vec3 left{-std::sin(h), std::cos(h), 0.0};
    Skeleton16& s = gt.poses[i];
    auto at = [&](Joint j) -> Vec3& { return s[static_cast<std::size_t>(idx(j))]; };

    const double bob = 15.0 * std::cos(2.0 * phase);
    at(Joint::pelvis) = path[i] - centre + walk.lateral_offset + (0.96 * leg + bob) * up;

    const Vec3 trunk = std::cos(p.trunk_lean) * up + std::sin(p.trunk_lean) * fwd;
    const Vec3 head_dir = std::cos(p.trunk_lean / 2) * up + std::sin(p.trunk_lean / 2) * fwd;
    at(Joint::spine_navel) = at(Joint::pelvis) + p.bone(Joint::spine_navel) * trunk;
    at(Joint::neck) = at(Joint::spine_navel) + p.bone(Joint::neck) * trunk;
    at(Joint::head) = at(Joint::neck) + p.bone(Joint::head) * head_dir;
    at(Joint::l_shoulder) = at(Joint::neck) + p.bone(Joint::l_shoulder) * left;
    at(Joint::r_shoulder) = at(Joint::neck) - p.bone(Joint::r_shoulder) * left;
    at(Joint::l_hip) = at(Joint::pelvis) + p.bone(Joint::l_hip) * left;
    at(Joint::r_hip) = at(Joint::pelvis) - p.bone(Joint::r_hip) * left;

    for (int side = 0; side < 2; ++side) {
      const double ph = phase + (side == 0 ? 0.0 : kPi);
      const double thigh = p.hip_swing * std::sin(ph);
      const double knee = p.knee_flex * 0.5 * (1.0 - std::cos(ph - p.knee_phase));
      // Arms swing against the leg on the same side.
      const double arm = -p.arm_swing * std::sin(ph - p.arm_phase);
      const double elbow = p.elbow_flex * (1.0 + 0.3 * std::sin(ph - p.arm_phase));
      const Joint hip = side == 0 ? Joint::l_hip : Joint::r_hip;
      const Joint kn = side == 0 ? Joint::l_knee : Joint::r_knee;
      const Joint an = side == 0 ? Joint::l_ankle : Joint::r_ankle;
      const Joint sh = side == 0 ? Joint::l_shoulder : Joint::r_shoulder;
      const Joint el = side == 0 ? Joint::l_elbow : Joint::r_elbow;
      const Joint wr = side == 0 ? Joint::l_wrist : Joint::r_wrist;
      at(kn) = at(hip) + p.bone(kn) * sagittal(fwd, up, thigh);
      at(an) = at(kn) + p.bone(an) * sagittal(fwd, up, thigh - knee);
      at(el) = at(sh) + p.bone(el) * sagittal(fwd, up, arm);
      at(wr) = at(el) + p.bone(wr) * sagittal(fwd, up, arm + elbow);
    }
  }
  return gt;
}

GroundTruth simulate_walk(const IdentityProfile& p, const std::string& view, int n_frames) {
  WalkSpec w;
  w.view_degrees = view_degrees(view);
  w.turning = is_turning_view(view);
  return simulate_walk(p, w, n_frames);
}

std::array<std::vector<double>, 2> knee_angles(const GroundTruth& gt) {
  std::array<std::vector<double>, 2> out;
  for (const auto& s : gt.poses) {
    auto angle = [&](Joint hip, Joint knee, Joint ankle) {
      const Vec3 a = s[idx(knee)] - s[idx(hip)];
      const Vec3 b = s[idx(ankle)] - s[idx(knee)];
      return std::acos(std::clamp(dot(a, b) / (norm(a) * norm(b)), -1.0, 1.0));
    };
    out[0].push_back(angle(Joint::l_hip, Joint::l_knee, Joint::l_ankle));
    out[1].push_back(angle(Joint::r_hip, Joint::r_knee, Joint::r_ankle));
  }
  return out;
}

VirtualRig VirtualRig::standard() {
  VirtualRig rig;
  const Vec3 target{0.0, 0.0, 900.0};
  rig.devices[0] = look_at(DeviceId::master, {0.0, -3000.0, 1000.0}, target);
  rig.devices[1] = look_at(DeviceId::sub1, {-2500.0, 2000.0, 1000.0}, target);
  rig.devices[2] = look_at(DeviceId::sub2, {2500.0, 2000.0, 1000.0}, target);

  // colour -> world of each device, from its depth pose and depth -> colour.
  auto color_to_world = [&](const DevicePose& d, Mat3& r, Vec3& t) {
    const RigidTransform dc = depth_to_color(d.device);
    const Mat3 back = dc.rotation().transposed();
    r = d.camera_to_world * back;
    t = d.position - r * dc.translation();
  };
  Mat3 rm;
  Vec3 tm;
  color_to_world(rig.devices[0], rm, tm);
  const Mat3 r_wm = rm.transposed();
  rig.world_to_master_color = RigidTransform(r_wm, -(r_wm * tm), kMasterColor, kMasterColor);

  for (const auto& d : rig.devices) {
    rig.calibration.add(depth_to_color(d.device));
    if (d.device == DeviceId::master) continue;
    Mat3 r;
    Vec3 t;
    color_to_world(d, r, t);
    rig.calibration.add(RigidTransform(r_wm * r, r_wm * t + rig.world_to_master_color.translation(),
                                       {d.device, Camera::color}, kMasterColor));
  }
  rig.calibration.validate();
  return rig;
}

double VirtualRig::occlusion_probability(DeviceId d, int joint16, const Vec3& body_position, double heading,
                                         double severity) const {
  const Vec3 cam = devices[static_cast<std::size_t>(d)].position;
  Vec3 v{cam.x - body_position.x, cam.y - body_position.y, 0.0};
  const double len = norm(v);
  if (len > 0) v = (1.0 / len) * v;
  const Vec3 fwd{std::cos(heading), std::sin(heading), 0.0};
  const Vec3 left{-std::sin(heading), std::cos(heading), 0.0};
  const double side = dot(left, v);
  double far = 0.1;
  if (is_left(joint16)) far = std::max(0.0, -side);
  if (is_right(joint16)) far = std::max(0.0, side);
  const double weight = is_distal(joint16) ? 1.0 : 0.6;
  double exposure = 0.08 + 0.92 * far * weight;
  // Hands in front of the body are hidden from behind.
  if (joint16 == idx(Joint::l_wrist) || joint16 == idx(Joint::r_wrist))
    exposure += 0.15 * std::max(0.0, -dot(fwd, v));
  return std::clamp(severity * exposure, 0.0, 0.97);
}

Skeleton16 to_master_color(const VirtualRig& rig, const Skeleton16& world) {
  Skeleton16 out;
  for (std::size_t j = 0; j < out.size(); ++j) out[j] = apply(rig.world_to_master_color, world[j]);
  return out;
}

std::vector<SkeletonFrame32> observe(const VirtualRig& rig, const GroundTruth& gt, const NoiseModel& noise,
                                     const OcclusionModel& occlusion, std::uint64_t seed) {
  std::array<RigidTransform, 3> to_device;
  for (std::size_t d = 0; d < 3; ++d)
    to_device[d] = invert(chain_to_master(rig.calibration, kDevices[d], ChainMode::strict));

  std::vector<SkeletonFrame32> out;
  out.reserve(gt.poses.size() * 3);
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (std::size_t i = 0; i < gt.poses.size(); ++i) {
    const Skeleton16 master = to_master_color(rig, gt.poses[i]);
    const Vec3 body = gt.poses[i][static_cast<std::size_t>(idx(Joint::pelvis))];
    for (std::size_t d = 0; d < 3; ++d) {
      std::mt19937_64 rng(mix(seed, i, d));
      SkeletonFrame32 f;
      f.frame_index = static_cast<int>(i);
      f.source = source_of(kDevices[d]);
      for (int j = 0; j < kJoints; ++j) {
        // Fixed draw order per joint keeps occlusion patterns nested across severities.
        const double u_occ = uniform(rng, 0.0, 1.0);
        const double u_drop = uniform(rng, 0.0, 1.0);
        const double u_conf = uniform(rng, 0.0, 1.0);
        const double u_vis = uniform(rng, 0.0, 1.0);
        const Vec3 e_noise{gauss(rng), gauss(rng), gauss(rng)};
        const Vec3 e_bad{gauss(rng), gauss(rng), gauss(rng)};
        if (occlusion.blind[d]) continue;
        const Vec3 p = apply(to_device[d], master[static_cast<std::size_t>(j)]);
        const double prob = rig.occlusion_probability(kDevices[d], j, body, gt.heading[i], occlusion.severity);
        const int src = kSourceJointOf[static_cast<std::size_t>(j)];
        if (u_occ < prob) {
          if (u_drop < occlusion.drop_fraction) continue;
          f.set(src, p + occlusion.corrupt_sigma * e_bad,
                occlusion.min_confidence + u_conf * (occlusion.max_confidence - occlusion.min_confidence));
        } else {
          f.set(src, p + noise.sigma * e_noise,
                noise.min_visible_confidence + u_vis * (1.0 - noise.min_visible_confidence));
        }
      }
      out.push_back(f);
    }
  }
  return out;
}

double condition_severity(const std::string& condition) {
  static const std::map<std::string, double> table{{"LCL", 0.1}, {"MCL", 0.3},  {"BOB", 0.35},
                                                   {"SOB", 0.4}, {"LOB", 0.5},  {"HCL", 0.6},
                                                   {"MG-S", 0.7}, {"MG-D", 0.8}, {"MG-T", 0.9}};
  const auto it = table.find(condition);
  if (it == table.end()) throw ConfigError("unknown condition '" + condition + "'");
  return it->second;
}

void SynthConfig::validate() const {
  if (identities < 1) throw ConfigError("synth.identities must be >= 1");
  if (conditions.empty() || views.empty()) throw ConfigError("synth needs at least one condition and one view");
  for (const auto& c : conditions)
    if (!is_condition(c)) throw ConfigError("unknown condition '" + c + "'");
  for (const auto& v : views)
    if (!is_view(v)) throw ConfigError("unknown view '" + v + "'");
  for (const auto& [c, s] : severity_override) {
    if (!is_condition(c)) throw ConfigError("unknown condition '" + c + "' in severity override");
    if (!(s >= 0.0 && s <= 1.0)) throw ConfigError("severity override must lie in [0, 1]");
  }
  if (sequences_per_cell < 1) throw ConfigError("synth.sequences_per_cell must be >= 1");
  if (min_frames < 12 || max_frames < min_frames) throw ConfigError("synth frame bounds must satisfy 12 <= min <= max");
  if (!(noise_mm >= 0.0)) throw ConfigError("synth.noise_mm must be >= 0");
  if (!(severity_scale >= 0.0)) throw ConfigError("synth.severity_scale must be >= 0");
  if (workers < 1) throw ConfigError("workers must be >= 1");
}

DatasetManifest build_synthetic_manifest(const SynthConfig& cfg, const std::string& out_dir,
                                         const std::map<std::string, std::string>& provenance) {
  cfg.validate();
  const VirtualRig rig = VirtualRig::standard();
  DatasetManifest m;
  m.base_dir = out_dir;
  m.provenance = provenance;
  m.provenance["generator"] = "skgait-synth";
  m.provenance["seed"] = std::to_string(cfg.seed);
  m.calibration = "calibration.json";

  std::vector<IdentityProfile> profiles;
  for (std::size_t i = 0; i < cfg.identities; ++i) {
    const std::string sex = i % 2 == 0 ? "F" : "M";
    char id[16];
    std::snprintf(id, sizeof id, "S%03zu", i);
    m.subjects.push_back({id, sex});
    profiles.push_back(gen_identity(mix(cfg.seed, 0x1d, i), sex));
  }

  struct Job {
    std::size_t identity, condition, view, repeat;
  };
  std::vector<Job> jobs;
  for (std::size_t i = 0; i < cfg.identities; ++i)
    for (std::size_t c = 0; c < cfg.conditions.size(); ++c)
      for (std::size_t v = 0; v < cfg.views.size(); ++v)
        for (std::size_t r = 0; r < cfg.sequences_per_cell; ++r) jobs.push_back({i, c, v, r});

  m.sequences.resize(jobs.size());
  auto run = [&](std::size_t k) {
    const Job& job = jobs[k];
    const std::string& cond = cfg.conditions[job.condition];
    const std::string& view = cfg.views[job.view];
    // Seeds depend on labels, not positions, so subsets of a config reproduce the same files.
    const std::uint64_t s = mix(cfg.seed, job.identity, fnv1a64(cond), fnv1a64(view), job.repeat);
    std::mt19937_64 rng(s);
    const int frames = std::uniform_int_distribution<int>(cfg.min_frames, cfg.max_frames)(rng);
    WalkSpec walk;
    walk.view_degrees = view_degrees(view);
    walk.turning = is_turning_view(view);
    walk.speed_scale = uniform(rng, 0.95, 1.05);
    walk.frequency_scale = uniform(rng, 0.97, 1.03);
    walk.start_phase = uniform(rng, 0.0, 2.0 * kPi);
    walk.lateral_offset = {uniform(rng, -300.0, 300.0), uniform(rng, -300.0, 300.0), 0.0};
    const IdentityProfile& p = profiles[job.identity];
    const GroundTruth gt = simulate_walk(p, walk, frames);

    OcclusionModel occ;
    const auto ov = cfg.severity_override.find(cond);
    occ.severity = std::min(1.0, (ov != cfg.severity_override.end() ? ov->second : condition_severity(cond)) *
                                     cfg.severity_scale);
    NoiseModel noise{cfg.noise_mm * p.noise_scale};

    SkeletonSequence seq;
    seq.frames = observe(rig, gt, noise, occ, mix(s, 0x0b5));
    const std::string id = m.subjects[job.identity].id + "-" + cond + "-" + view + "-" + std::to_string(job.repeat);
    seq.provenance = provenance;
    seq.provenance["generator"] = "skgait-synth";
    seq.provenance["seed"] = std::to_string(cfg.seed);
    seq.provenance["sequence"] = id;
    const std::string rel = "sequences/" + id + ".jsonl";
    save_sequence(seq, (std::filesystem::path(out_dir) / rel).string());
    m.sequences[k] = {id, m.subjects[job.identity].id, cond, view, frames, rel};
  };

  const std::size_t workers = std::min(cfg.workers, std::max<std::size_t>(1, jobs.size()));
  if (workers == 1) {
    for (std::size_t k = 0; k < jobs.size(); ++k) run(k);
  } else {
    std::vector<std::exception_ptr> errors(workers);
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w)
      pool.emplace_back([&, w] {
        try {
          for (std::size_t k = w; k < jobs.size(); k += workers) run(k);
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
    for (auto& t : pool) t.join();
    for (auto& e : errors)
      if (e) std::rethrow_exception(e);
  }

  save_calibration(rig.calibration, (std::filesystem::path(out_dir) / m.calibration).string());
  m.validate();
  save_manifest(m, (std::filesystem::path(out_dir) / "manifest.json").string());
  return m;
}

}  // namespace skgait::synth
