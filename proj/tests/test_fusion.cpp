#include "doctest.h"
#include "oracles.hpp"
#include "skgait/error.hpp"
#include "skgait/fusion.hpp"
#include "skgait/skeleton.hpp"
#include "skgait/synth.hpp"

using namespace skgait;

namespace {

SkeletonFrame32 frame_with(Source s, int joint, Vec3 p, double conf) {
  SkeletonFrame32 f;
  f.source = s;
  f.set(joint, p, conf);
  return f;
}

}  // namespace

TEST_CASE("align_frame: identity, translation, oracle") {
  std::mt19937_64 rng(5);
  SkeletonFrame32 f;
  for (int j = 0; j < kSourceJoints; j += 2) f.set(j, oracle::random_point(rng), 0.5);
  CHECK(align_frame(f, RigidTransform::identity()) == f);

  const RigidTransform shift(Mat3::identity(), {10, 0, 0}, kMasterColor, kMasterColor);
  const auto s = align_frame(f, shift);
  for (int j = 0; j < kSourceJoints; ++j) {
    CHECK(s.joints[j].has_value() == f.joints[j].has_value());
    if (f.joints[j]) {
      CHECK(s.joints[j]->position == f.joints[j]->position + Vec3{10, 0, 0});
      CHECK(s.joints[j]->confidence == f.joints[j]->confidence);
    }
  }
  const RigidTransform t(oracle::random_rotation(rng), oracle::random_point(rng), kMasterColor, kMasterColor);
  const auto a = align_frame(f, t);
  for (int j = 0; j < kSourceJoints; ++j)
    if (f.joints[j]) CHECK(a.joints[j]->position == apply(t, f.joints[j]->position));
}

TEST_CASE("fuse: identical observations are reproduced exactly") {
  const Vec3 p{12.5, -300.25, 2048.0};
  std::vector<SkeletonFrame32> fs{frame_with(Source::master, 3, p, 0.6), frame_with(Source::sub1, 3, p, 0.6),
                                  frame_with(Source::sub2, 3, p, 0.6)};
  const auto o = fuse(fs);
  CHECK(*o.positions[3] == p);
  CHECK(o.sources[3].count() == 3);
  CHECK_FALSE(o.positions[4].has_value());
}

TEST_CASE("fuse: single outlier is dropped") {
  std::vector<SkeletonFrame32> fs{frame_with(Source::master, 0, {0, 0, 1000}, 0.9),
                                  frame_with(Source::sub1, 0, {0, 0, 1000}, 0.9),
                                  frame_with(Source::sub2, 0, {0, 0, 1500}, 0.2)};
  const auto o = fuse(fs);
  CHECK(*o.positions[0] == Vec3{0, 0, 1000});
  CHECK(o.confidence[0] == 0.9);
  CHECK(o.sources[0].to_ulong() == 0b011);
}

TEST_CASE("fuse: confidence-weighted mean") {
  std::vector<SkeletonFrame32> fs{frame_with(Source::master, 1, {0, 0, 0}, 0.5),
                                  frame_with(Source::sub1, 1, {0, 0, 100}, 0.5)};
  FusionPolicy p;
  p.outlier_threshold = 1000.0;
  CHECK(*fuse(fs, p).positions[1] == Vec3{0, 0, 50});
}

TEST_CASE("fuse: median strategy and low-confidence drop") {
  std::vector<SkeletonFrame32> fs{frame_with(Source::master, 2, {0, 0, 0}, 0.9),
                                  frame_with(Source::sub1, 2, {10, 0, 0}, 0.9),
                                  frame_with(Source::sub2, 2, {100, 0, 0}, 0.05)};
  FusionPolicy p;
  p.strategy = FusionStrategy::median_per_axis;
  p.outlier_threshold = 1000.0;
  const auto o = fuse(fs, p);
  CHECK(o.positions[2]->x == doctest::Approx(5.0));
  CHECK(o.sources[2].to_ulong() == 0b011);
  CHECK_THROWS_AS(fuse(std::span<const SkeletonFrame32>{}), FusionError);
}

TEST_CASE("fuse: randomized agreement with the reference fuser") {
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> u(0, 1);
  for (int t = 0; t < 50; ++t) {
    std::vector<SkeletonFrame32> fs(3);
    for (int d = 0; d < 3; ++d) {
      fs[d].source = static_cast<Source>(d);
      for (int j = 0; j < kSourceJoints; ++j)
        if (u(rng) > 0.2) fs[d].set(j, oracle::random_point(rng, 200.0), u(rng));
    }
    const auto got = fuse(fs);
    const auto want = oracle::reference_fuse(fs, 150.0, 0.1);
    for (int j = 0; j < kSourceJoints; ++j) {
      REQUIRE(got.positions[j].has_value() == want[j].has_value());
      if (want[j]) CHECK(*got.positions[j] == want[j]->position);
    }
  }
}

TEST_CASE("occlusion_flags: strict less-than") {
  SkeletonFrame32 f;
  for (int j = 0; j < kSourceJoints; ++j) f.set(j, {}, 1.0);
  auto flags = occlusion_flags(f, 0.3);
  CHECK(std::none_of(flags.begin(), flags.end(), [](bool b) { return b; }));
  f.set(4, {}, 0.0);
  f.set(5, {}, 0.3);
  f.joints[6].reset();
  flags = occlusion_flags(f, 0.3);
  CHECK(flags[4]);
  CHECK_FALSE(flags[5]);
  CHECK(flags[6]);
}

TEST_CASE("fuse: a blind device leaves fusion to the other two") {
  const auto rig = synth::VirtualRig::standard();
  const auto gt = synth::simulate_walk(synth::gen_identity(3), "90", 20);
  synth::OcclusionModel occ;
  occ.blind = {false, true, false};
  const auto obs = synth::observe(rig, gt, synth::NoiseModel{0.0}, occ, 9);
  std::map<int, std::vector<SkeletonFrame32>> steps;
  for (const auto& f : obs)
    steps[f.frame_index].push_back(align_frame(f, chain_to_master(rig.calibration, static_cast<DeviceId>(f.source))));
  for (const auto& [t, fs] : steps) {
    const auto o = fuse(fs);
    const Skeleton16 truth = synth::to_master_color(rig, gt.poses[t]);
    for (int j = 0; j < kJoints; ++j) {
      REQUIRE(o.positions[kSourceJointOf[j]].has_value());
      CHECK_FALSE(o.sources[kSourceJointOf[j]].test(1));
      CHECK(distance(*o.positions[kSourceJointOf[j]], truth[j]) < 1e-9);
    }
  }
}
