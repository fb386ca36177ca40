#pragma once

#include <iosfwd>
#include <string>

#include "skgait/run_config.hpp"

namespace skgait::cmd {

// Each command writes its artifacts under the configured paths and a short
// human-readable report to `out`.
DatasetManifest gen_synth(const RunConfig& cfg, std::ostream& out);

// Fuses every sequence of the manifest into <output>/oj/, with a manifest of
// its own. Returns that manifest.
DatasetManifest fuse(const RunConfig& cfg, std::ostream& out);
// Single file variant.
void fuse_file(const RunConfig& cfg, const std::string& input, const std::string& output, std::ostream& out);

TrainResult train(const RunConfig& cfg, std::ostream& out);
EvalResult eval(const RunConfig& cfg, std::ostream& out);
std::size_t params(const RunConfig& cfg, std::ostream& out);
EmbeddingBatch export_embeddings(const RunConfig& cfg, std::ostream& out);

CalibrationSet load_dataset_calibration(const RunConfig& cfg, const DatasetManifest& m);

}  // namespace skgait::cmd
