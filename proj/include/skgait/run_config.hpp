#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "skgait/json_io.hpp"
#include "skgait/protocol.hpp"
#include "skgait/synth.hpp"

namespace skgait {

inline constexpr const char* kConfigEnv = "SKGAIT_CONFIG";
inline constexpr int kFormatVersion = 1;

struct PathConfig {
  std::string dataset = "data";  // gen-synth output directory
  std::string manifest;          // defaults to <dataset>/manifest.json
  std::string calibration;       // overrides the manifest's calibration
  std::string output = "out";
  std::string checkpoint;        // defaults to <output>/model.ckpt

  std::string manifest_path() const;
  std::string checkpoint_path() const;
};

struct EvalConfig {
  std::string gallery_condition = "LCL";
  std::vector<std::string> probe_conditions;  // empty: every other condition present
  Metric metric = Metric::euclidean;
  std::string subjects = "test";              // test | train | all
};

// Everything a run needs. All randomness derives from `seed`.
struct RunConfig {
  PathConfig paths;
  synth::SynthConfig synth;
  ModelConfig model;
  FusionLossConfig loss;
  TrainConfig train;
  FusionPolicy fusion;
  ChainMode chain = ChainMode::strict;
  EvalConfig eval;
  std::uint64_t seed = 1;
  std::size_t workers = 1;

  void validate() const;
  // Propagates `seed` and `workers` into the sub-configs.
  void finalize();
  PrepareOptions prepare_options() const;

  // Canonical form, and its FNV-1a hash for provenance headers.
  Json to_json() const;
  std::string hash() const;
  std::map<std::string, std::string> provenance(const std::string& command) const;
};

// Overlays `j` on `base`; unknown keys are rejected at every level.
RunConfig merge_run_config(RunConfig base, const Json& j);
RunConfig load_run_config(const std::string& path);

}  // namespace skgait
