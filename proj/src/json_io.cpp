#include "skgait/json_io.hpp"

#include <algorithm>
#include <cstring>

#include "skgait/error.hpp"

namespace skgait {

void reject_unknown_keys(const Json& j, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + " must be an object");
  for (const auto& [key, _] : j.items()) {
    const bool ok = std::any_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; });
    if (!ok) throw ConfigError("unknown key '" + key + "' in " + where);
  }
}

namespace {

template <typename T>
void read_if(const Json& j, const char* key, T& out, const std::string& where) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const Json::exception& e) {
    throw ConfigError(where + "." + key + ": " + e.what());
  }
}

}  // namespace

Json to_json(const ModelConfig& c) {
  Json blocks = Json::array();
  for (const auto& b : c.backbone.blocks)
    blocks.push_back({{"in", b.in}, {"out", b.out}, {"stride", b.stride}, {"residual", b.residual}});
  return {{"blocks", blocks},
          {"temporal_kernel", c.backbone.temporal_kernel},
          {"alpha", c.backbone.alpha},
          {"bn_momentum", c.backbone.bn_momentum},
          {"bn_eps", c.backbone.bn_eps},
          {"embedding_per_group", c.embedding_per_group},
          {"frames", c.frames},
          {"num_classes", c.num_classes}};
}

ModelConfig model_config_from_json(const Json& j) {
  const std::string where = "model";
  reject_unknown_keys(j, {"blocks", "temporal_kernel", "alpha", "bn_momentum", "bn_eps", "embedding_per_group", "frames",
                          "num_classes"},
                      where);
  ModelConfig c;
  if (j.contains("blocks")) {
    c.backbone.blocks.clear();
    for (const auto& b : j.at("blocks")) {
      reject_unknown_keys(b, {"in", "out", "stride", "residual"}, where + ".blocks[]");
      BlockSpec s;
      read_if(b, "in", s.in, where);
      read_if(b, "out", s.out, where);
      read_if(b, "stride", s.stride, where);
      read_if(b, "residual", s.residual, where);
      c.backbone.blocks.push_back(s);
    }
  }
  read_if(j, "temporal_kernel", c.backbone.temporal_kernel, where);
  read_if(j, "alpha", c.backbone.alpha, where);
  read_if(j, "bn_momentum", c.backbone.bn_momentum, where);
  read_if(j, "bn_eps", c.backbone.bn_eps, where);
  read_if(j, "embedding_per_group", c.embedding_per_group, where);
  read_if(j, "frames", c.frames, where);
  read_if(j, "num_classes", c.num_classes, where);
  c.validate();
  return c;
}

Json to_json(const FusionLossConfig& c) {
  return {{"lambda", c.lambda},
          {"margin", c.triplet.margin},
          {"per_group_triplet", c.triplet.per_group},
          {"arc_scale", c.arcface.scale},
          {"arc_margin", c.arcface.margin}};
}

FusionLossConfig loss_config_from_json(const Json& j) {
  const std::string where = "loss";
  reject_unknown_keys(j, {"lambda", "margin", "per_group_triplet", "arc_scale", "arc_margin"}, where);
  FusionLossConfig c;
  read_if(j, "lambda", c.lambda, where);
  read_if(j, "margin", c.triplet.margin, where);
  read_if(j, "per_group_triplet", c.triplet.per_group, where);
  read_if(j, "arc_scale", c.arcface.scale, where);
  read_if(j, "arc_margin", c.arcface.margin, where);
  c.validate();
  return c;
}

Json to_json(const FusionPolicy& p) {
  return {{"strategy", std::string(to_string(p.strategy))},
          {"outlier_threshold_mm", p.outlier_threshold},
          {"min_confidence", p.min_confidence}};
}

FusionPolicy fusion_policy_from_json(const Json& j) {
  const std::string where = "fusion";
  reject_unknown_keys(j, {"strategy", "outlier_threshold_mm", "min_confidence"}, where);
  FusionPolicy p;
  if (j.contains("strategy")) p.strategy = parse_fusion_strategy(j.at("strategy").get<std::string>());
  read_if(j, "outlier_threshold_mm", p.outlier_threshold, where);
  read_if(j, "min_confidence", p.min_confidence, where);
  p.validate();
  return p;
}

}  // namespace skgait
