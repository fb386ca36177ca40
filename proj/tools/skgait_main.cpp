#include <cstdlib>
#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "skgait/commands.hpp"
#include "skgait/error.hpp"

using namespace skgait;

namespace {

// One line on stderr that scripts can parse.
void diagnostic(const std::string& kind, const std::string& message) {
  std::cerr << Json{{"error", kind}, {"message", message}}.dump() << std::endl;
}

// "a.b.c=value" -> {"a":{"b":{"c":value}}}. The value is parsed as JSON when
// possible and taken as a string otherwise.
Json override_patch(const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) throw ConfigError("--set expects key.path=value, got '" + assignment + "'");
  const std::string key = assignment.substr(0, eq);
  const std::string raw = assignment.substr(eq + 1);
  Json value = Json::parse(raw, nullptr, false);
  if (value.is_discarded()) value = raw;
  std::string pointer = "/";
  for (char c : key) pointer += c == '.' ? '/' : c;
  Json patch;
  patch[Json::json_pointer(pointer)] = value;
  return patch;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Skeleton gait recognition toolkit"};
  app.require_subcommand(1);
  app.fallthrough();
  app.set_version_flag("--version", "skgait 1.0");

  std::string config_path;
  std::vector<std::string> sets;
  std::string dataset, manifest, calibration, output, checkpoint, chain, metric;
  long long seed = -1, workers = -1, iterations = -1;
  app.add_option("-c,--config", config_path, "JSON run configuration (default: $SKGAIT_CONFIG)");
  app.add_option("--set", sets, "Override a config entry, e.g. --set train.iterations=500");
  app.add_option("--dataset", dataset, "Dataset directory");
  app.add_option("--manifest", manifest, "Manifest file");
  app.add_option("--calibration", calibration, "Calibration file");
  app.add_option("-o,--output", output, "Output directory");
  app.add_option("--checkpoint", checkpoint, "Checkpoint file");
  app.add_option("--chain-mode", chain, "Device chain mode: strict or paper");
  app.add_option("--metric", metric, "Evaluation metric: euclidean or cosine");
  app.add_option("--seed", seed, "Seed for every random choice");
  app.add_option("-j,--workers", workers, "Worker threads");
  app.add_option("--iterations", iterations, "Training iterations");

  auto* gen = app.add_subcommand("gen-synth", "Generate a synthetic dataset");
  auto* fuse = app.add_subcommand("fuse", "Fuse raw device sequences into OJ sequences");
  std::string fuse_in, fuse_out;
  fuse->add_option("--input", fuse_in, "Single raw sequence file");
  fuse->add_option("--out", fuse_out, "Output file for --input");
  auto* train = app.add_subcommand("train", "Train on the split's training subjects");
  auto* eval = app.add_subcommand("eval", "Rank-1 gallery/probe evaluation");
  auto* params = app.add_subcommand("params", "Report the trainable parameter count");
  auto* exp = app.add_subcommand("export-embeddings", "Write per-sequence embeddings as CSV");
  auto* show = app.add_subcommand("show-config", "Print the effective configuration");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    diagnostic("usage", e.what());
    return 2;
  }

  try {
    if (config_path.empty())
      if (const char* env = std::getenv(kConfigEnv)) config_path = env;
    RunConfig cfg = config_path.empty() ? RunConfig{} : load_run_config(config_path);

    Json patch = Json::object();
    auto put = [&](const char* pointer, Json v) { patch[Json::json_pointer(pointer)] = std::move(v); };
    if (!dataset.empty()) put("/paths/dataset", dataset);
    if (!manifest.empty()) put("/paths/manifest", manifest);
    if (!calibration.empty()) put("/paths/calibration", calibration);
    if (!output.empty()) put("/paths/output", output);
    if (!checkpoint.empty()) put("/paths/checkpoint", checkpoint);
    if (!chain.empty()) put("/chain_mode", chain);
    if (!metric.empty()) put("/eval/metric", metric);
    if (seed >= 0) put("/seed", seed);
    if (workers >= 0) put("/workers", workers);
    if (iterations >= 0) put("/train/iterations", iterations);
    for (const auto& s : sets) patch.merge_patch(override_patch(s));
    cfg = merge_run_config(cfg, patch);

    if (*gen) cmd::gen_synth(cfg, std::cout);
    if (*fuse) {
      if (!fuse_in.empty()) {
        if (fuse_out.empty()) throw ConfigError("fuse --input needs --out");
        cmd::fuse_file(cfg, fuse_in, fuse_out, std::cout);
      } else {
        cmd::fuse(cfg, std::cout);
      }
    }
    if (*train) cmd::train(cfg, std::cout);
    if (*eval) cmd::eval(cfg, std::cout);
    if (*params) cmd::params(cfg, std::cout);
    if (*exp) cmd::export_embeddings(cfg, std::cout);
    if (*show) std::cout << cfg.to_json().dump(2) << "\n";
  } catch (const Error& e) {
    diagnostic(e.kind(), e.what());
    return e.kind() == "config" ? 2 : 1;
  } catch (const std::exception& e) {
    diagnostic("internal", e.what());
    return 1;
  }
  return 0;
}
