#include "doctest.h"
#include "oracles.hpp"
#include "skgait/error.hpp"
#include "skgait/skeleton.hpp"

using namespace skgait;

namespace {

Skeleton16 random_skeleton(std::mt19937_64& rng) {
  Skeleton16 s;
  for (auto& p : s) p = oracle::random_point(rng, 1000.0);
  return s;
}

}  // namespace

TEST_CASE("select_joints: mapping, missing joint, bijection") {
  SkeletonFrame32 f;
  for (int j = 0; j < kSourceJoints; ++j) f.set(j, {double(j), 2.0 * j, 3.0 * j});
  const Skeleton16 s = select_joints(f);
  for (int j = 0; j < kJoints; ++j) CHECK(s[j] == Vec3{double(kSourceJointOf[j]), 2.0 * kSourceJointOf[j], 3.0 * kSourceJointOf[j]});
  f.joints[7].reset();  // left wrist
  CHECK_THROWS_AS(select_joints(f), IncompleteSkeletonError);
  int retained = 0;
  for (int src = 0; src < kSourceJoints; ++src) {
    const int j = joint16_from_source(src);
    if (j < 0) continue;
    ++retained;
    CHECK(kSourceJointOf[j] == src);
  }
  CHECK(retained == kJoints);
}

TEST_CASE("compute_bones: translation invariance and subtraction oracle") {
  std::mt19937_64 rng(7);
  const Skeleton16 s = random_skeleton(rng);
  const BoneSet b = compute_bones(s);
  for (int c = 1; c < kJoints; ++c) CHECK(b.of_child(c) == s[kParentOf[c]] - s[c]);
  Skeleton16 moved = s;
  for (auto& p : moved) p += Vec3{100, -50, 7};
  const BoneSet m = compute_bones(moved);
  for (int c = 1; c < kJoints; ++c) CHECK(distance(m.of_child(c), b.of_child(c)) < 1e-9);
  Skeleton16 z = s;
  z[idx(Joint::head)] = z[idx(Joint::neck)];
  CHECK(compute_bones(z).of_child(idx(Joint::head)) == Vec3{});
}

TEST_CASE("compute_height: known segments") {
  Skeleton16 s{};
  auto put = [&](Joint child, Joint parent, Vec3 dir, double len) { s[idx(child)] = s[idx(parent)] + len * dir; };
  const Vec3 up{0, 0, 1}, down{0, 0, -1}, side{1, 0, 0};
  put(Joint::spine_navel, Joint::pelvis, up, 200);
  put(Joint::neck, Joint::spine_navel, up, 300);
  put(Joint::head, Joint::neck, up, 250);
  put(Joint::l_shoulder, Joint::neck, side, 180);
  put(Joint::r_shoulder, Joint::neck, -side, 180);
  put(Joint::l_elbow, Joint::l_shoulder, down, 280);
  put(Joint::l_wrist, Joint::l_elbow, down, 250);
  put(Joint::r_elbow, Joint::r_shoulder, down, 280);
  put(Joint::r_wrist, Joint::r_elbow, down, 250);
  put(Joint::l_hip, Joint::pelvis, side, 100);
  put(Joint::r_hip, Joint::pelvis, -side, 100);
  put(Joint::l_knee, Joint::l_hip, down, 450);
  put(Joint::l_ankle, Joint::l_knee, down, 400);
  put(Joint::r_knee, Joint::r_hip, down, 450);
  put(Joint::r_ankle, Joint::r_knee, down, 400);
  CHECK(compute_height(s) == doctest::Approx(1600.0).epsilon(1e-15));

  Skeleton16 same{};
  CHECK(compute_height(same) == 0.0);
}

TEST_CASE("compute_sb_shr: arithmetic, reflection, degenerate hips") {
  Skeleton16 s{};
  s[idx(Joint::l_shoulder)] = {200, 0, 1400};
  s[idx(Joint::r_shoulder)] = {-200, 0, 1400};
  s[idx(Joint::l_hip)] = {160, 0, 900};
  s[idx(Joint::r_hip)] = {-160, 0, 900};
  const auto f = compute_sb_shr(s);
  CHECK(f.shoulder_breadth == doctest::Approx(400.0));
  CHECK(f.shoulder_hip_ratio == doctest::Approx(1.25));

  std::mt19937_64 rng(8);
  const Skeleton16 r = random_skeleton(rng);
  Skeleton16 mirrored = r;
  for (auto& p : mirrored) p.x = -p.x;
  CHECK(compute_sb_shr(mirrored).shoulder_breadth == doctest::Approx(compute_sb_shr(r).shoulder_breadth));
  CHECK(compute_sb_shr(mirrored).shoulder_hip_ratio == doctest::Approx(compute_sb_shr(r).shoulder_hip_ratio));
  CHECK(compute_sb_shr(r).shoulder_breadth ==
        doctest::Approx(norm(r[idx(Joint::r_shoulder)] - r[idx(Joint::l_shoulder)])));

  s[idx(Joint::r_hip)] = s[idx(Joint::l_hip)];
  CHECK_THROWS_AS(compute_sb_shr(s), DegenerateSkeletonError);
}

TEST_CASE("build_dual_skeleton: pseudo nodes and translation invariance") {
  std::mt19937_64 rng(9);
  const Skeleton16 s = random_skeleton(rng);
  const DualSkeleton d = build_dual_skeleton(s);
  const BoneSet b = compute_bones(s);
  const auto sb = compute_sb_shr(s);
  CHECK(d.pseudo[0] == Vec3{compute_height(s), sb.shoulder_breadth, sb.shoulder_hip_ratio});
  for (int c = 1; c < kJoints; ++c) CHECK(d.pseudo[c] == b.of_child(c));
  CHECK(d.real == s);

  Skeleton16 moved = s;
  for (auto& p : moved) p += Vec3{-30, 400, 12};
  const DualSkeleton m = build_dual_skeleton(moved);
  for (int c = 0; c < kJoints; ++c) CHECK(distance(m.pseudo[c], d.pseudo[c]) < 1e-9);
}
