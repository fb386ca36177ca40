#include <unistd.h>

#include <filesystem>
#include <sstream>

#include "doctest.h"
#include "skgait/commands.hpp"
#include "skgait/run_config.hpp"

using namespace skgait;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("skgait-unit-" + std::to_string(::getpid())) / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

RunConfig small_run(const fs::path& dir) {
  RunConfig cfg;
  cfg.paths.dataset = (dir / "data").string();
  cfg.paths.output = (dir / "out").string();
  cfg.synth.identities = 4;
  cfg.synth.conditions = {"LCL", "HCL"};
  cfg.synth.views = {"0", "90"};
  cfg.synth.sequences_per_cell = 2;
  cfg.synth.min_frames = 20;
  cfg.synth.max_frames = 24;
  cfg.model.backbone.blocks = {{3, 4, 1, false}, {4, 6, 2, true}};
  cfg.model.backbone.temporal_kernel = 3;
  cfg.model.embedding_per_group = 3;
  cfg.model.frames = 8;
  cfg.train.iterations = 3;
  cfg.train.batch = {2, 2};
  cfg.finalize();
  cfg.validate();
  return cfg;
}

}  // namespace

TEST_CASE("RunConfig: json round trip, hash, unknown keys") {
  RunConfig a;
  a.seed = 17;
  a.finalize();
  const RunConfig b = merge_run_config(RunConfig{}, a.to_json());
  CHECK(b.to_json() == a.to_json());
  CHECK(b.hash() == a.hash());
  RunConfig c = a;
  c.train.iterations = 7;
  CHECK(c.hash() != a.hash());

  CHECK_THROWS_AS(merge_run_config(RunConfig{}, Json::parse(R"({"bogus":1})")), ConfigError);
  CHECK_THROWS_AS(merge_run_config(RunConfig{}, Json::parse(R"({"train":{"iteration":1}})")), ConfigError);
  const RunConfig d = merge_run_config(RunConfig{}, Json::parse(R"({"train":{"iterations":42},"chain_mode":"paper"})"));
  CHECK(d.train.iterations == 42);
  CHECK(d.chain == ChainMode::paper);
  CHECK(d.provenance("train").count("config_hash"));
}

TEST_CASE("commands: gen-synth, fuse, train, eval, params, export-embeddings") {
  const fs::path dir = scratch("cmd");
  RunConfig cfg = small_run(dir);
  std::ostringstream out;
  const DatasetManifest m = cmd::gen_synth(cfg, out);
  CHECK(m.sequences.size() == 32);
  CHECK(fs::exists(cfg.paths.manifest_path()));

  const DatasetManifest oj = cmd::fuse(cfg, out);
  CHECK(oj.sequences.size() == 32);
  const auto seq = load_sequence(oj.resolve(oj.sequences[0].path));
  for (const auto& f : seq.frames) CHECK(f.source == Source::fused);

  const TrainResult r = cmd::train(cfg, out);
  CHECK(r.loss.size() == 3);
  CHECK(fs::exists(cfg.paths.checkpoint_path()));

  const EvalResult e = cmd::eval(cfg, out);
  CHECK(e.overall() >= 0.0);
  CHECK(e.overall() <= 1.0);

  std::ostringstream p;
  const std::size_t n = cmd::params(cfg, p);
  CHECK(n == GaitModel<float>(cfg.model, 1).count_parameters(true));

  const EmbeddingBatch b = cmd::export_embeddings(cfg, out);
  CHECK(b.embeddings.dim(1) == 15);
}
