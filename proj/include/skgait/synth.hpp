#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "skgait/dataset.hpp"
#include "skgait/geometry.hpp"
#include "skgait/skeleton.hpp"

namespace skgait::synth {

inline constexpr double kFps = 30.0;

struct IdentityProfile {
  std::string sex = "M";
  std::array<double, kBones> bone_length{};  // mm, indexed by child joint − 1
  double frequency = 1.0;                    // Hz
  double stride_length = 1300.0;             // mm per gait cycle
  double hip_swing = 0.40;                   // rad, thigh amplitude
  double knee_flex = 0.55;                   // rad, peak knee flexion
  double arm_swing = 0.35;                   // rad
  double elbow_flex = 0.25;                  // rad, mean elbow flexion
  double trunk_lean = 0.05;                  // rad, forward
  double knee_phase = 0.0;                   // rad, knee lag behind the hip
  double arm_phase = 0.0;                    // rad, arm lag behind the opposite leg
  double noise_scale = 1.0;                  // multiplies the dataset sensor noise

  double bone(Joint child) const { return bone_length[static_cast<std::size_t>(idx(child) - 1)]; }
  // Height of the rest pose as computed from the skeleton.
  double rest_height() const;
};

IdentityProfile gen_identity(std::uint64_t seed);
IdentityProfile gen_identity(std::uint64_t seed, const std::string& sex);

// Walk in world coordinates (mm, z up). Heading is measured from the
// direction pointing at the master device: 0° walks straight at it.
struct WalkSpec {
  double view_degrees = 0.0;
  bool turning = false;   // heading sweeps view−45° -> view+45° with a smooth turn midway
  double speed_scale = 1.0;
  double frequency_scale = 1.0;
  double start_phase = 0.0;  // rad
  Vec3 lateral_offset{};
};

struct GroundTruth {
  std::vector<Skeleton16> poses;
  std::vector<double> heading;  // world yaw of the body's forward direction, rad
};

GroundTruth simulate_walk(const IdentityProfile& p, const WalkSpec& walk, int n_frames);
// Convenience for straight and turning view labels.
GroundTruth simulate_walk(const IdentityProfile& p, const std::string& view, int n_frames);

// Left knee and right knee flexion angles per frame (for phase checks).
std::array<std::vector<double>, 2> knee_angles(const GroundTruth& gt);

struct DevicePose {
  DeviceId device = DeviceId::master;
  Vec3 position;       // depth camera centre in the world
  Mat3 camera_to_world;  // columns: x right, y down, z forward
};

struct OcclusionModel {
  double severity = 0.0;         // 0 = none, 1 = heavy
  double drop_fraction = 0.5;    // occluded joints that vanish; the rest report corrupted positions
  double corrupt_sigma = 120.0;  // mm
  double min_confidence = 0.02;
  double max_confidence = 0.4;   // confidence range of corrupted joints
  // Forces every joint of one device to vanish.
  std::array<bool, 3> blind{};
};

struct VirtualRig {
  std::array<DevicePose, 3> devices;
  CalibrationSet calibration;
  RigidTransform world_to_master_color;

  // The isosceles-triangle layout: master facing the walkway from the front,
  // subordinates at the far corners looking at the centre.
  static VirtualRig standard();

  // Dropout probability of a joint for one device given the body yaw.
  double occlusion_probability(DeviceId d, int joint16, const Vec3& body_position, double heading,
                               double severity) const;
};

struct NoiseModel {
  double sigma = 0.0;  // mm, isotropic
  double min_visible_confidence = 0.7;
};

// Device depth-frame observations of a ground-truth sequence. Random draws
// are made per (frame, device, joint) independent of the severity, so raising
// the severity only ever adds occluded joints.
std::vector<SkeletonFrame32> observe(const VirtualRig& rig, const GroundTruth& gt, const NoiseModel& noise,
                                     const OcclusionModel& occlusion, std::uint64_t seed);

// Ground truth expressed in the master colour frame, the frame fusion outputs.
Skeleton16 to_master_color(const VirtualRig& rig, const Skeleton16& world);

// Nominal occlusion severity in [0, 1]: LCL lightest, HCL and MG heaviest.
double condition_severity(const std::string& condition);

struct SynthConfig {
  std::size_t identities = 8;
  std::vector<std::string> conditions{"LCL"};
  std::vector<std::string> views{"0", "90", "180", "270"};
  std::size_t sequences_per_cell = 3;
  int min_frames = 60;
  int max_frames = 90;
  double noise_mm = 8.0;
  // Scales every condition's occlusion severity.
  double severity_scale = 1.0;
  // Replaces the nominal severity of the listed conditions.
  std::map<std::string, double> severity_override;
  std::uint64_t seed = 1;
  std::size_t workers = 1;

  void validate() const;
};

// Writes one sequence file per (identity, condition, view, repeat), the rig
// calibration and the manifest under `out_dir`. Returns the manifest.
DatasetManifest build_synthetic_manifest(const SynthConfig& cfg, const std::string& out_dir,
                                         const std::map<std::string, std::string>& provenance = {});

}  // namespace skgait::synth
