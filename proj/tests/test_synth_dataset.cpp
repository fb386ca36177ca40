#include <unistd.h>

#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>

#include "doctest.h"
#include "skgait/dataset.hpp"
#include "skgait/error.hpp"
#include "skgait/synth.hpp"

using namespace skgait;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("skgait-unit-" + std::to_string(::getpid())) / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("labels: conditions and views") {
  CHECK(is_condition("MG-T"));
  CHECK_FALSE(is_condition("XYZ"));
  CHECK(is_view("T135"));
  CHECK_FALSE(is_view("45"));
  CHECK(view_degrees("270") == 270.0);
  CHECK(view_degrees("T45") == 45.0);
  CHECK(is_turning_view("T315"));
  CHECK_FALSE(is_turning_view("180"));
}

TEST_CASE("manifest and sequence text round trips") {
  DatasetManifest m;
  m.subjects = {{"S1", "F"}, {"S2", "M"}};
  m.sequences = {{"S1-LCL-0-0", "S1", "LCL", "0", 3, "seq/a.jsonl"}};
  m.calibration = "calibration.json";
  m.provenance = {{"seed", "5"}};
  const DatasetManifest back = parse_manifest(serialize_manifest(m), ".");
  CHECK(back.subjects == m.subjects);
  CHECK(back.sequences == m.sequences);
  CHECK(back.calibration == m.calibration);
  CHECK(back.provenance == m.provenance);

  DatasetManifest dup = m;
  dup.sequences.push_back(dup.sequences[0]);
  CHECK_THROWS(dup.validate());
  DatasetManifest unknown = m;
  unknown.sequences[0].subject = "S9";
  CHECK_THROWS(unknown.validate());

  SkeletonSequence s;
  SkeletonFrame32 f;
  f.frame_index = 0;
  f.source = Source::sub2;
  f.set(3, {1.25, -2.5, 1234.0625}, 0.75);
  s.frames.push_back(f);
  f.source = Source::fused;
  f.frame_index = 1;
  s.frames.push_back(f);
  const SkeletonSequence sb = parse_sequence(serialize_sequence(s));
  REQUIRE(sb.frames.size() == 2);
  CHECK(sb.frames[0] == s.frames[0]);
  CHECK(sb.frames[1] == s.frames[1]);
  CHECK(sb.by_time().size() == 2);
  CHECK_THROWS_AS(parse_sequence("{\"format\":\"nope\"}\n"), FormatError);
}

TEST_CASE("gen_identity: deterministic, plausible heights") {
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    const auto p = synth::gen_identity(seed);
    CHECK(p.rest_height() >= 1520.0);
    CHECK(p.rest_height() <= 1880.0);
    CHECK(synth::gen_identity(seed).bone_length == p.bone_length);
  }
  CHECK(synth::gen_identity(4, "F").sex == "F");
}

TEST_CASE("simulate_walk: periodicity and knee antiphase") {
  auto p = synth::gen_identity(21);
  p.frequency = 1.0;
  const auto gt = synth::simulate_walk(p, "90", 91);
  REQUIRE(gt.poses.size() == 91);
  // Relative to the pelvis, the pose repeats after one cycle (30 frames at 1 Hz).
  for (int j = 1; j < kJoints; ++j) {
    const Vec3 a = gt.poses[10][j] - gt.poses[10][0];
    const Vec3 b = gt.poses[40][j] - gt.poses[40][0];
    CHECK(distance(a, b) < 1e-6);
  }
  const auto knees = synth::knee_angles(gt);
  // Left and right knees peak half a cycle apart.
  auto argmax = [](const std::vector<double>& v, int lo, int hi) {
    return int(std::max_element(v.begin() + lo, v.begin() + hi) - v.begin());
  };
  const int l = argmax(knees[0], 0, 30), r = argmax(knees[1], 0, 30);
  CHECK(std::abs(std::abs(l - r) - 15) <= 1);
}

TEST_CASE("observe: nested occlusion as severity grows") {
  const auto rig = synth::VirtualRig::standard();
  const auto gt = synth::simulate_walk(synth::gen_identity(2), "0", 30);
  auto visible = [&](double sev) {
    synth::OcclusionModel occ;
    occ.severity = sev;
    const auto obs = synth::observe(rig, gt, synth::NoiseModel{0.0}, occ, 5);
    std::vector<bool> v;
    for (const auto& f : obs)
      for (int j : kSourceJointOf) v.push_back(f.joints[j].has_value() && f.joints[j]->confidence >= 0.5);
    return v;
  };
  const auto light = visible(0.1), heavy = visible(0.6);
  REQUIRE(light.size() == heavy.size());
  std::size_t nl = 0, nh = 0;
  for (std::size_t i = 0; i < light.size(); ++i) {
    nl += light[i];
    nh += heavy[i];
    if (heavy[i]) CHECK(light[i]);
  }
  CHECK(nh < nl);
  CHECK(synth::condition_severity("LCL") < synth::condition_severity("HCL"));
}

TEST_CASE("build_synthetic_manifest: layout, frame bounds, byte-identical regeneration") {
  synth::SynthConfig sc;
  sc.identities = 4;
  sc.conditions = {"LCL", "HCL"};
  sc.sequences_per_cell = 3;
  sc.min_frames = 30;
  sc.max_frames = 40;
  sc.seed = 6;
  const fs::path a = scratch("synth-a"), b = scratch("synth-b");
  const DatasetManifest m = synth::build_synthetic_manifest(sc, a.string());
  sc.workers = 3;
  synth::build_synthetic_manifest(sc, b.string());
  CHECK(m.sequences.size() == 4 * 2 * 4 * 3);
  CHECK(m.subjects.size() == 4);
  m.validate();
  for (const auto& r : m.sequences) {
    CHECK(r.frames >= 30);
    CHECK(r.frames <= 40);
    CHECK(slurp(a / r.path) == slurp(b / r.path));
    CHECK(fs::exists(a / r.path));
  }
  CHECK(slurp(a / "manifest.json") == slurp(b / "manifest.json"));
  const DatasetManifest loaded = load_manifest((a / "manifest.json").string());
  CHECK(loaded.sequences == m.sequences);
  const auto seq = load_sequence(loaded.resolve(m.sequences[0].path));
  CHECK(seq.by_time().size() == std::size_t(m.sequences[0].frames));

  synth::SynthConfig bad;
  bad.min_frames = 50;
  bad.max_frames = 40;
  CHECK_THROWS(bad.validate());
}
