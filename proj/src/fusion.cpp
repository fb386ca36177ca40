#include "skgait/fusion.hpp"

#include <algorithm>

#include "skgait/error.hpp"

namespace skgait {

std::string_view to_string(Source s) {
  switch (s) {
    case Source::master: return "master";
    case Source::sub1: return "sub1";
    case Source::sub2: return "sub2";
    case Source::fused: return "OJ";
  }
  return "?";
}

Source parse_source(std::string_view s) {
  if (s == "OJ") return Source::fused;
  return source_of(parse_device(s));
}

std::vector<JointObservation> SkeletonFrame32::observations() const {
  if (source == Source::fused) throw FusionError("fused frames carry no device observations");
  std::vector<JointObservation> out;
  for (int j = 0; j < kSourceJoints; ++j) {
    const auto& slot = joints[static_cast<std::size_t>(j)];
    if (slot) out.push_back({static_cast<DeviceId>(source), frame_index, j, slot->position, slot->confidence});
  }
  return out;
}

std::string_view to_string(FusionStrategy s) {
  return s == FusionStrategy::median_per_axis ? "median_per_axis" : "confidence_weighted_mean";
}

FusionStrategy parse_fusion_strategy(std::string_view s) {
  if (s == "confidence_weighted_mean") return FusionStrategy::confidence_weighted_mean;
  if (s == "median_per_axis") return FusionStrategy::median_per_axis;
  throw ConfigError("unknown fusion strategy '" + std::string(s) + "'");
}

void FusionPolicy::validate() const {
  if (!(outlier_threshold > 0.0)) throw ConfigError("fusion outlier threshold must be > 0");
  if (!(min_confidence >= 0.0 && min_confidence <= 1.0)) throw ConfigError("fusion min_confidence must be in [0,1]");
}

SkeletonFrame32 OptimizedFrame::as_frame() const {
  SkeletonFrame32 f;
  f.frame_index = frame_index;
  f.source = Source::fused;
  for (std::size_t j = 0; j < positions.size(); ++j) {
    if (positions[j]) f.joints[j] = JointSample{*positions[j], confidence[j]};
  }
  return f;
}

SkeletonFrame32 align_frame(const SkeletonFrame32& f, const RigidTransform& t) {
  SkeletonFrame32 out = f;
  for (auto& slot : out.joints) {
    if (slot) slot->position = apply(t, slot->position);
  }
  return out;
}

namespace {

struct Contributor {
  int device;
  Vec3 position;
  double confidence;
};

// Weighted mean anchored at the first contributor, so identical inputs come
// back bit-exact. Falls back to equal weights when all weights are zero.
Vec3 weighted_mean(const std::vector<Contributor>& cs, std::size_t skip = static_cast<std::size_t>(-1)) {
  std::size_t anchor = (skip == 0) ? 1 : 0;
  double wsum = 0.0;
  for (std::size_t i = 0; i < cs.size(); ++i)
    if (i != skip) wsum += cs[i].confidence;
  const bool uniform = !(wsum > 0.0);
  if (uniform) wsum = static_cast<double>(cs.size() - (skip < cs.size() ? 1 : 0));

  Vec3 acc{};
  for (std::size_t i = 0; i < cs.size(); ++i) {
    if (i == skip) continue;
    const double w = uniform ? 1.0 : cs[i].confidence;
    acc += w * (cs[i].position - cs[anchor].position);
  }
  return cs[anchor].position + (1.0 / wsum) * acc;
}

double median_of(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

OptimizedFrame fuse(std::span<const SkeletonFrame32> frames, const FusionPolicy& policy) {
  if (frames.empty()) throw FusionError("fuse needs at least one frame");
  policy.validate();

  std::vector<const SkeletonFrame32*> ordered;
  for (const auto& f : frames) {
    if (f.frame_index != frames.front().frame_index)
      throw FusionError("frames to fuse disagree on frame_index");
    ordered.push_back(&f);
  }
  std::stable_sort(ordered.begin(), ordered.end(),
                   [](const auto* a, const auto* b) { return a->source < b->source; });

  OptimizedFrame out;
  out.frame_index = frames.front().frame_index;
  std::vector<Contributor> cs;
  for (std::size_t j = 0; j < kSourceJoints; ++j) {
    cs.clear();
    for (const auto* f : ordered) {
      const auto& slot = f->joints[j];
      if (slot && !(slot->confidence < policy.min_confidence))
        cs.push_back({static_cast<int>(f->source), slot->position, slot->confidence});
    }
    if (cs.empty()) continue;

    if (cs.size() >= 2) {
      std::optional<std::size_t> drop;
      for (std::size_t i = 0; i < cs.size(); ++i) {
        const double d = distance(cs[i].position, weighted_mean(cs, i));
        if (d > policy.outlier_threshold && (!drop || cs[i].confidence < cs[*drop].confidence)) drop = i;
      }
      if (drop) cs.erase(cs.begin() + static_cast<std::ptrdiff_t>(*drop));
    }

    Vec3 fused;
    if (policy.strategy == FusionStrategy::confidence_weighted_mean || cs.size() == 1) {
      fused = weighted_mean(cs);
    } else {
      for (int axis = 0; axis < 3; ++axis) {
        std::vector<double> vals;
        for (const auto& c : cs) vals.push_back(c.position[axis]);
        fused[axis] = median_of(std::move(vals));
      }
    }
    double conf = 0.0;
    for (const auto& c : cs) {
      conf = std::max(conf, c.confidence);
      out.sources[j].set(static_cast<std::size_t>(c.device));
    }
    out.positions[j] = fused;
    out.confidence[j] = conf;
  }
  return out;
}

std::array<bool, kSourceJoints> occlusion_flags(const SkeletonFrame32& f, double min_confidence) {
  std::array<bool, kSourceJoints> flags{};
  for (std::size_t j = 0; j < flags.size(); ++j) {
    const auto& slot = f.joints[j];
    flags[j] = !slot || slot->confidence < min_confidence;
  }
  return flags;
}

}  // namespace skgait
