#pragma once

#include <array>
#include <bitset>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "skgait/geometry.hpp"

namespace skgait {

inline constexpr int kSourceJoints = 32;

// Who produced a skeleton frame: one of the rig devices, or the fused
// optimized-joints stream ("OJ").
enum class Source : std::uint8_t { master = 0, sub1 = 1, sub2 = 2, fused = 3 };

std::string_view to_string(Source s);
Source parse_source(std::string_view s);
inline Source source_of(DeviceId d) { return static_cast<Source>(static_cast<int>(d)); }

struct JointSample {
  Vec3 position;
  double confidence = 1.0;
  friend bool operator==(const JointSample&, const JointSample&) = default;
};

// A flattened single-joint view of a frame slot.
struct JointObservation {
  DeviceId device = DeviceId::master;
  int frame_index = 0;
  int joint_id = 0;
  Vec3 position;
  double confidence = 1.0;
};

// One device's 32-joint body-tracking output for one time step. Missing
// joints are empty slots.
struct SkeletonFrame32 {
  int frame_index = 0;
  Source source = Source::master;
  std::array<std::optional<JointSample>, kSourceJoints> joints{};

  void set(int joint, const Vec3& p, double confidence = 1.0) {
    joints[static_cast<std::size_t>(joint)] = JointSample{p, confidence};
  }
  std::vector<JointObservation> observations() const;
  friend bool operator==(const SkeletonFrame32&, const SkeletonFrame32&) = default;
};

enum class FusionStrategy { confidence_weighted_mean, median_per_axis };
std::string_view to_string(FusionStrategy s);
FusionStrategy parse_fusion_strategy(std::string_view s);

struct FusionPolicy {
  FusionStrategy strategy = FusionStrategy::confidence_weighted_mean;
  double outlier_threshold = 150.0;  // mm
  double min_confidence = 0.1;

  void validate() const;
};

struct OptimizedFrame {
  int frame_index = 0;
  std::array<std::optional<Vec3>, kSourceJoints> positions{};
  std::array<double, kSourceJoints> confidence{};
  // bit d set when device d contributed to the fused joint
  std::array<std::bitset<3>, kSourceJoints> sources{};

  SkeletonFrame32 as_frame() const;  // Source::fused
};

// Transforms every present joint; confidences and gaps are preserved.
SkeletonFrame32 align_frame(const SkeletonFrame32& f, const RigidTransform& t);

// Fuses aligned per-device frames of one time step. Per joint: drop samples
// under min_confidence; if any survivor is farther than the outlier threshold
// from the confidence-weighted centroid of the others, drop the
// lowest-confidence such sample (once); combine the rest per strategy.
// Contributors are always visited in device order.
OptimizedFrame fuse(std::span<const SkeletonFrame32> frames, const FusionPolicy& policy = {});

// flag = missing or confidence < min_confidence
std::array<bool, kSourceJoints> occlusion_flags(const SkeletonFrame32& f, double min_confidence);

}  // namespace skgait
