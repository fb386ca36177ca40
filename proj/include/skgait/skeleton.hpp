#pragma once

#include <array>
#include <string_view>

#include "skgait/fusion.hpp"
#include "skgait/geometry.hpp"

namespace skgait {

inline constexpr int kJoints = 16;
inline constexpr int kBones = kJoints - 1;

// Index in the 16-joint skeleton. Values are positions in Skeleton16.
enum class Joint : int {
  pelvis = 0,
  spine_navel,
  neck,
  l_shoulder,
  l_elbow,
  l_wrist,
  r_shoulder,
  r_elbow,
  r_wrist,
  l_hip,
  l_knee,
  l_ankle,
  r_hip,
  r_knee,
  r_ankle,
  head,
};

constexpr int idx(Joint j) { return static_cast<int>(j); }

// Body-tracking joint id (0..31) for each of the 16 retained joints. Face,
// hand, foot and clavicle joints are dropped.
inline constexpr std::array<int, kJoints> kSourceJointOf{0, 1, 3, 5, 6, 7, 12, 13, 14, 18, 19, 20, 22, 23, 24, 26};

// Parent of each joint in the bone tree rooted at the pelvis (-1 for the root).
// Shoulders hang off the neck since clavicles are not retained.
inline constexpr std::array<int, kJoints> kParentOf{-1, 0, 1, 2, 3, 4, 2, 6, 7, 0, 9, 10, 0, 12, 13, 2};

std::string_view joint_name(int joint16);
// Inverse of kSourceJointOf; -1 when the source joint is not retained.
int joint16_from_source(int source_joint);

using Skeleton16 = std::array<Vec3, kJoints>;

// Bone vectors b(parent, child) = parent − child, one per child joint 1..15.
struct BoneSet {
  std::array<Vec3, kBones> vectors{};
  const Vec3& of_child(int child) const { return vectors[static_cast<std::size_t>(child - 1)]; }
  Vec3& of_child(int child) { return vectors[static_cast<std::size_t>(child - 1)]; }
};

struct AnthropometricFeatures {
  double height = 0.0;           // mm
  double shoulder_breadth = 0.0; // mm
  double shoulder_hip_ratio = 0.0;
};

// Real skeleton plus the pseudo skeleton: pseudo[c] is the bone ending at c,
// pseudo[0] is the fake bone (H, SB, SHR).
struct DualSkeleton {
  Skeleton16 real{};
  std::array<Vec3, kJoints> pseudo{};
  AnthropometricFeatures features;
};

Skeleton16 select_joints(const SkeletonFrame32& f);
Skeleton16 select_joints(const OptimizedFrame& f);

BoneSet compute_bones(const Skeleton16& s);
double compute_height(const Skeleton16& s);

struct ShoulderFeatures {
  double shoulder_breadth;
  double shoulder_hip_ratio;
};
ShoulderFeatures compute_sb_shr(const Skeleton16& s);

DualSkeleton build_dual_skeleton(const Skeleton16& s);

}  // namespace skgait
