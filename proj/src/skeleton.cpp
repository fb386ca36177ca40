#include "skgait/skeleton.hpp"

#include <string>

#include "skgait/error.hpp"

namespace skgait {

namespace {

constexpr std::array<std::string_view, kJoints> kNames{
    "pelvis", "spine_navel", "neck",   "l_shoulder", "l_elbow", "l_wrist", "r_shoulder", "r_elbow",
    "r_wrist", "l_hip",      "l_knee", "l_ankle",    "r_hip",   "r_knee",  "r_ankle",    "head"};

double bone_length(const Skeleton16& s, Joint parent, Joint child) {
  return distance(s[static_cast<std::size_t>(idx(parent))], s[static_cast<std::size_t>(idx(child))]);
}

template <typename Lookup>
Skeleton16 select_with(Lookup&& lookup) {
  Skeleton16 out{};
  for (int j = 0; j < kJoints; ++j) {
    const int src = kSourceJointOf[static_cast<std::size_t>(j)];
    const std::optional<Vec3> p = lookup(src);
    if (!p)
      throw IncompleteSkeletonError("joint " + std::string(joint_name(j)) + " (source " + std::to_string(src) +
                                    ") is missing");
    out[static_cast<std::size_t>(j)] = *p;
  }
  return out;
}

}  // namespace

std::string_view joint_name(int joint16) { return kNames.at(static_cast<std::size_t>(joint16)); }

int joint16_from_source(int source_joint) {
  for (int j = 0; j < kJoints; ++j)
    if (kSourceJointOf[static_cast<std::size_t>(j)] == source_joint) return j;
  return -1;
}

Skeleton16 select_joints(const SkeletonFrame32& f) {
  return select_with([&](int src) -> std::optional<Vec3> {
    const auto& slot = f.joints[static_cast<std::size_t>(src)];
    if (!slot) return std::nullopt;
    return slot->position;
  });
}

Skeleton16 select_joints(const OptimizedFrame& f) {
  return select_with([&](int src) { return f.positions[static_cast<std::size_t>(src)]; });
}

BoneSet compute_bones(const Skeleton16& s) {
  BoneSet b;
  for (int c = 1; c < kJoints; ++c) {
    const int p = kParentOf[static_cast<std::size_t>(c)];
    b.of_child(c) = s[static_cast<std::size_t>(p)] - s[static_cast<std::size_t>(c)];
  }
  return b;
}

double compute_height(const Skeleton16& s) {
  const double legs = bone_length(s, Joint::r_hip, Joint::r_knee) + bone_length(s, Joint::r_knee, Joint::r_ankle) +
                      bone_length(s, Joint::l_hip, Joint::l_knee) + bone_length(s, Joint::l_knee, Joint::l_ankle);
  return bone_length(s, Joint::neck, Joint::head) + bone_length(s, Joint::spine_navel, Joint::neck) +
         bone_length(s, Joint::pelvis, Joint::spine_navel) + legs / 2.0;
}

ShoulderFeatures compute_sb_shr(const Skeleton16& s) {
  const double sb = bone_length(s, Joint::r_shoulder, Joint::l_shoulder);
  const double hip_width = bone_length(s, Joint::r_hip, Joint::l_hip);
  if (!(hip_width > 0.0)) throw DegenerateSkeletonError("hip width is zero; SHR undefined");
  return {sb, sb / hip_width};
}

DualSkeleton build_dual_skeleton(const Skeleton16& s) {
  DualSkeleton d;
  d.real = s;
  const auto [sb, shr] = compute_sb_shr(s);
  d.features = {compute_height(s), sb, shr};
  const BoneSet bones = compute_bones(s);
  d.pseudo[0] = {d.features.height, sb, shr};
  for (int c = 1; c < kJoints; ++c) d.pseudo[static_cast<std::size_t>(c)] = bones.of_child(c);
  return d;
}

}  // namespace skgait
