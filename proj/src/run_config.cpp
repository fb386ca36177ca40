#include "skgait/run_config.hpp"

#include <filesystem>

#include "skgait/error.hpp"
#include "skgait/textio.hpp"

namespace skgait {

namespace fs = std::filesystem;

std::string PathConfig::manifest_path() const {
  return manifest.empty() ? (fs::path(dataset) / "manifest.json").string() : manifest;
}

std::string PathConfig::checkpoint_path() const {
  return checkpoint.empty() ? (fs::path(output) / "model.ckpt").string() : checkpoint;
}

void RunConfig::validate() const {
  synth.validate();
  model.validate();
  loss.validate();
  train.validate();
  fusion.validate();
  if (!is_condition(eval.gallery_condition)) throw ConfigError("unknown gallery condition " + eval.gallery_condition);
  for (const auto& c : eval.probe_conditions)
    if (!is_condition(c)) throw ConfigError("unknown probe condition " + c);
  if (eval.subjects != "test" && eval.subjects != "train" && eval.subjects != "all")
    throw ConfigError("eval.subjects must be test, train or all");
  if (workers < 1) throw ConfigError("workers must be >= 1");
}

void RunConfig::finalize() {
  synth.seed = seed;
  synth.workers = workers;
  train.seed = seed;
}

PrepareOptions RunConfig::prepare_options() const { return {chain, fusion, model.frames}; }

Json RunConfig::to_json() const {
  return {
      {"seed", seed},
      {"workers", workers},
      {"chain_mode", std::string(to_string(chain))},
      {"paths",
       {{"dataset", paths.dataset},
        {"manifest", paths.manifest},
        {"calibration", paths.calibration},
        {"output", paths.output},
        {"checkpoint", paths.checkpoint}}},
      {"synth",
       {{"identities", synth.identities},
        {"conditions", synth.conditions},
        {"views", synth.views},
        {"sequences_per_cell", synth.sequences_per_cell},
        {"min_frames", synth.min_frames},
        {"max_frames", synth.max_frames},
        {"noise_mm", synth.noise_mm},
        {"severity_scale", synth.severity_scale},
        {"severity_override", synth.severity_override}}},
      {"model", skgait::to_json(model)},
      {"loss", skgait::to_json(loss)},
      {"train",
       {{"iterations", train.iterations},
        {"p", train.batch.p},
        {"k", train.batch.k},
        {"learning_rate", train.learning_rate},
        {"momentum", train.momentum},
        {"weight_decay", train.weight_decay},
        {"lr_milestones", train.lr_milestones},
        {"lr_decay", train.lr_decay}}},
      {"fusion", skgait::to_json(fusion)},
      {"eval",
       {{"gallery_condition", eval.gallery_condition},
        {"probe_conditions", eval.probe_conditions},
        {"metric", std::string(to_string(eval.metric))},
        {"subjects", eval.subjects}}},
  };
}

std::string RunConfig::hash() const { return hex64(fnv1a64(to_json().dump())); }

std::map<std::string, std::string> RunConfig::provenance(const std::string& command) const {
  return {{"command", command},
          {"config_hash", hash()},
          {"format_version", std::to_string(kFormatVersion)},
          {"seed", std::to_string(seed)}};
}

namespace {

template <typename T>
T get(const Json& j, const char* key, const std::string& where) {
  try {
    return j.at(key).get<T>();
  } catch (const Json::exception& e) {
    throw ConfigError(where + "." + key + ": " + e.what());
  }
}

RunConfig from_json(const Json& j) {
  reject_unknown_keys(j, {"seed", "workers", "chain_mode", "paths", "synth", "model", "loss", "train", "fusion", "eval"},
                      "config");
  RunConfig c;
  c.seed = get<std::uint64_t>(j, "seed", "config");
  c.workers = get<std::size_t>(j, "workers", "config");
  c.chain = parse_chain_mode(get<std::string>(j, "chain_mode", "config"));

  const Json& p = j.at("paths");
  reject_unknown_keys(p, {"dataset", "manifest", "calibration", "output", "checkpoint"}, "paths");
  c.paths = {get<std::string>(p, "dataset", "paths"), get<std::string>(p, "manifest", "paths"),
             get<std::string>(p, "calibration", "paths"), get<std::string>(p, "output", "paths"),
             get<std::string>(p, "checkpoint", "paths")};

  const Json& s = j.at("synth");
  reject_unknown_keys(s, {"identities", "conditions", "views", "sequences_per_cell", "min_frames", "max_frames",
                          "noise_mm", "severity_scale", "severity_override"},
                      "synth");
  c.synth.identities = get<std::size_t>(s, "identities", "synth");
  c.synth.conditions = get<std::vector<std::string>>(s, "conditions", "synth");
  c.synth.views = get<std::vector<std::string>>(s, "views", "synth");
  c.synth.sequences_per_cell = get<std::size_t>(s, "sequences_per_cell", "synth");
  c.synth.min_frames = get<int>(s, "min_frames", "synth");
  c.synth.max_frames = get<int>(s, "max_frames", "synth");
  c.synth.noise_mm = get<double>(s, "noise_mm", "synth");
  c.synth.severity_scale = get<double>(s, "severity_scale", "synth");
  c.synth.severity_override = get<std::map<std::string, double>>(s, "severity_override", "synth");

  c.model = model_config_from_json(j.at("model"));
  c.loss = loss_config_from_json(j.at("loss"));
  c.fusion = fusion_policy_from_json(j.at("fusion"));

  const Json& t = j.at("train");
  reject_unknown_keys(t, {"iterations", "p", "k", "learning_rate", "momentum", "weight_decay", "lr_milestones",
                          "lr_decay"},
                      "train");
  c.train.iterations = get<std::size_t>(t, "iterations", "train");
  c.train.batch.p = get<std::size_t>(t, "p", "train");
  c.train.batch.k = get<std::size_t>(t, "k", "train");
  c.train.learning_rate = get<double>(t, "learning_rate", "train");
  c.train.momentum = get<double>(t, "momentum", "train");
  c.train.weight_decay = get<double>(t, "weight_decay", "train");
  c.train.lr_milestones = get<std::vector<double>>(t, "lr_milestones", "train");
  c.train.lr_decay = get<double>(t, "lr_decay", "train");

  const Json& e = j.at("eval");
  reject_unknown_keys(e, {"gallery_condition", "probe_conditions", "metric", "subjects"}, "eval");
  c.eval.gallery_condition = get<std::string>(e, "gallery_condition", "eval");
  c.eval.probe_conditions = get<std::vector<std::string>>(e, "probe_conditions", "eval");
  c.eval.metric = parse_metric(get<std::string>(e, "metric", "eval"));
  c.eval.subjects = get<std::string>(e, "subjects", "eval");
  return c;
}

}  // namespace

RunConfig merge_run_config(RunConfig base, const Json& j) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  // Unknown keys survive the patch and are rejected by from_json.
  Json full = base.to_json();
  full.merge_patch(j);
  RunConfig c;
  try {
    c = from_json(full);
  } catch (const Json::exception& e) {
    throw ConfigError(std::string("invalid config: ") + e.what());
  }
  c.finalize();
  c.validate();
  return c;
}

RunConfig load_run_config(const std::string& path) {
  Json j;
  try {
    j = Json::parse(read_text_file(path));
  } catch (const Json::exception& e) {
    throw ConfigError("config " + path + " is not valid JSON: " + e.what());
  }
  return merge_run_config(RunConfig{}, j);
}

}  // namespace skgait
