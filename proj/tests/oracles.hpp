#pragma once

// Reference implementations used by the tests. They are written from the
// documented rules, deliberately without reusing library internals.

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "skgait/fusion.hpp"
#include "skgait/geometry.hpp"
#include "skgait/loss.hpp"
#include "skgait/tensor.hpp"

namespace oracle {

using skgait::Vec3;

inline skgait::Mat3 random_rotation(std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  // Uniform unit quaternion.
  double q[4] = {n(rng), n(rng), n(rng), n(rng)};
  const double len = std::sqrt(q[0] * q[0] + q[1] * q[1] + q[2] * q[2] + q[3] * q[3]);
  for (double& v : q) v /= len;
  const double w = q[0], x = q[1], y = q[2], z = q[3];
  skgait::Mat3 r;
  r.m = {1 - 2 * (y * y + z * z), 2 * (x * y - w * z),     2 * (x * z + w * y),
         2 * (x * y + w * z),     1 - 2 * (x * x + z * z), 2 * (y * z - w * x),
         2 * (x * z - w * y),     2 * (y * z + w * x),     1 - 2 * (x * x + y * y)};
  return r;
}

inline Vec3 random_point(std::mt19937_64& rng, double range = 5000.0) {
  std::uniform_real_distribution<double> u(-range, range);
  return {u(rng), u(rng), u(rng)};
}

// A consistent three-device calibration built from random ground-truth poses.
inline skgait::CalibrationSet random_rig(std::mt19937_64& rng) {
  using namespace skgait;
  CalibrationSet c;
  for (DeviceId d : kDevices) {
    c.add(RigidTransform(random_rotation(rng), random_point(rng, 50.0), {d, Camera::depth}, {d, Camera::color}));
    if (d != DeviceId::master)
      c.add(RigidTransform(random_rotation(rng), random_point(rng, 4000.0), {d, Camera::color}, kMasterColor));
  }
  return c;
}

struct FusedJoint {
  Vec3 position;
  double confidence = 0.0;
  unsigned sources = 0;
};

// Per joint: keep samples with confidence >= min_confidence in device order;
// find every sample farther than the threshold from the confidence-weighted
// mean of the others and drop the least confident (earliest on ties); the
// result is the confidence-weighted mean expressed relative to the first
// remaining sample (equal weights if all weights are zero).
inline std::array<std::optional<FusedJoint>, skgait::kSourceJoints> reference_fuse(
    const std::vector<skgait::SkeletonFrame32>& frames, double threshold, double min_confidence) {
  struct Sample {
    int device;
    double p[3];
    double c;
  };
  auto mean_excluding = [](const std::vector<Sample>& s, int skip, double out[3]) {
    int first = -1;
    double wsum = 0.0;
    int count = 0;
    for (int i = 0; i < int(s.size()); ++i) {
      if (i == skip) continue;
      if (first < 0) first = i;
      wsum += s[i].c;
      ++count;
    }
    const bool equal = !(wsum > 0.0);
    if (equal) wsum = count;
    double acc[3] = {0, 0, 0};
    for (int i = 0; i < int(s.size()); ++i) {
      if (i == skip) continue;
      const double w = equal ? 1.0 : s[i].c;
      for (int a = 0; a < 3; ++a) acc[a] += w * (s[i].p[a] - s[first].p[a]);
    }
    for (int a = 0; a < 3; ++a) out[a] = s[first].p[a] + (1.0 / wsum) * acc[a];
  };

  std::array<std::optional<FusedJoint>, skgait::kSourceJoints> out;
  for (int j = 0; j < skgait::kSourceJoints; ++j) {
    std::vector<Sample> s;
    for (int dev = 0; dev < 3; ++dev)
      for (const auto& f : frames)
        if (static_cast<int>(f.source) == dev && f.joints[j] && f.joints[j]->confidence >= min_confidence) {
          const auto& js = *f.joints[j];
          s.push_back({dev, {js.position.x, js.position.y, js.position.z}, js.confidence});
        }
    if (s.empty()) continue;
    if (s.size() > 1) {
      int victim = -1;
      for (int i = 0; i < int(s.size()); ++i) {
        double m[3];
        mean_excluding(s, i, m);
        const double dx = s[i].p[0] - m[0], dy = s[i].p[1] - m[1], dz = s[i].p[2] - m[2];
        if (std::sqrt(dx * dx + dy * dy + dz * dz) > threshold && (victim < 0 || s[i].c < s[victim].c)) victim = i;
      }
      if (victim >= 0) s.erase(s.begin() + victim);
    }
    double m[3];
    mean_excluding(s, -1, m);
    FusedJoint fj;
    fj.position = {m[0], m[1], m[2]};
    for (const auto& x : s) {
      fj.confidence = std::max(fj.confidence, x.c);
      fj.sources |= 1u << x.device;
    }
    out[j] = fj;
  }
  return out;
}

inline double euclid(const skgait::Tensor<double>& e, std::size_t a, std::size_t b) {
  double s = 0.0;
  for (std::size_t k = 0; k < e.dim(1); ++k) {
    const double d = e.at(a, k) - e.at(b, k);
    s += d * d;
  }
  return std::sqrt(s);
}

// max over every (positive, negative) pair of the hinge, averaged over
// anchors that have both.
inline double triplet_exhaustive(const skgait::Tensor<double>& e, const std::vector<int>& labels, double margin) {
  const std::size_t n = labels.size();
  double total = 0.0;
  std::size_t anchors = 0;
  for (std::size_t a = 0; a < n; ++a) {
    bool any = false;
    double worst = 0.0;
    for (std::size_t p = 0; p < n; ++p) {
      if (p == a || labels[p] != labels[a]) continue;
      for (std::size_t q = 0; q < n; ++q) {
        if (labels[q] == labels[a]) continue;
        const double h = (margin + euclid(e, a, p)) - euclid(e, a, q);
        worst = any ? std::max(worst, h) : h;
        any = true;
      }
    }
    if (!any) continue;
    ++anchors;
    if (worst > 0.0) total += worst;
  }
  return total / double(anchors);
}

// Rank-1 accuracy per (condition, view) by exhaustive search with the
// identical-view rule.
inline std::map<std::pair<std::string, std::string>, double> rank1_bruteforce(const skgait::EmbeddingBatch& gallery,
                                                                               const skgait::EmbeddingBatch& probes) {
  std::map<std::pair<std::string, std::string>, std::pair<int, int>> counts;
  for (std::size_t p = 0; p < probes.size(); ++p) {
    std::vector<std::pair<double, std::size_t>> cand;
    for (std::size_t g = 0; g < gallery.size(); ++g) {
      if (gallery.view[g] == probes.view[p]) continue;
      double s = 0.0;
      for (std::size_t k = 0; k < gallery.embeddings.dim(1); ++k) {
        const double d = probes.embeddings.at(p, k) - gallery.embeddings.at(g, k);
        s += d * d;
      }
      cand.push_back({std::sqrt(s), g});
    }
    std::sort(cand.begin(), cand.end(), [&](const auto& x, const auto& y) {
      if (x.first != y.first) return x.first < y.first;
      if (gallery.subject[x.second] != gallery.subject[y.second])
        return gallery.subject[x.second] < gallery.subject[y.second];
      return gallery.sequence[x.second] < gallery.sequence[y.second];
    });
    auto& c = counts[{probes.condition[p], probes.view[p]}];
    ++c.second;
    if (!cand.empty() && gallery.subject[cand.front().second] == probes.subject[p]) ++c.first;
  }
  std::map<std::pair<std::string, std::string>, double> out;
  for (const auto& [k, c] : counts) out[k] = double(c.first) / double(c.second);
  return out;
}

}  // namespace oracle
