#include <unistd.h>

#include <filesystem>
#include <set>

#include "doctest.h"
#include "oracles.hpp"
#include "skgait/model.hpp"
#include "skgait/protocol.hpp"
#include "skgait/synth.hpp"

using namespace skgait;
namespace fs = std::filesystem;

namespace {

ModelConfig tiny() {
  ModelConfig cfg;
  cfg.backbone.blocks = {{3, 4, 1, false}, {4, 6, 2, true}};
  cfg.backbone.temporal_kernel = 3;
  cfg.embedding_per_group = 3;
  cfg.frames = 8;
  cfg.num_classes = 3;
  return cfg;
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("skgait-unit-" + std::to_string(::getpid())) / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

Tensor<float> randf(const Shape& s, std::mt19937_64& rng) {
  std::normal_distribution<float> n;
  Tensor<float> t(s);
  for (auto& v : t.storage()) v = n(rng);
  return t;
}

EmbeddingBatch batch(std::vector<std::vector<double>> rows, std::vector<std::string> subj,
                     std::vector<std::string> cond, std::vector<std::string> view) {
  EmbeddingBatch b;
  b.embeddings = Tensor<double>({rows.size(), rows[0].size()});
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t k = 0; k < rows[i].size(); ++k) b.embeddings.at(i, k) = rows[i][k];
    b.identity.push_back(0);
    b.sequence.push_back(subj[i] + "-" + cond[i] + "-" + view[i] + "-" + std::to_string(i));
  }
  b.subject = std::move(subj);
  b.condition = std::move(cond);
  b.view = std::move(view);
  return b;
}

DatasetManifest manifest_with(int females, int males) {
  DatasetManifest m;
  for (int i = 0; i < females + males; ++i)
    m.subjects.push_back({"S" + std::to_string(100 + i), i < females ? "F" : "M"});
  return m;
}

}  // namespace

TEST_CASE("checkpoint: serialize round trip and restore reproduces the forward pass") {
  GaitModel<float> model(tiny(), 3);
  const Checkpoint c = snapshot(model, {"A", "B", "C"}, {{"seed", "3"}});
  const std::string bytes = serialize_checkpoint(c);
  CHECK(bytes.rfind("SKGAIT-CHECKPOINT 1\n", 0) == 0);
  const Checkpoint back = parse_checkpoint(bytes);
  CHECK(back.tensors == c.tensors);
  CHECK(back.classes == c.classes);
  CHECK(back.provenance == c.provenance);
  CHECK(serialize_checkpoint(back) == bytes);

  const GaitModel<float> restored = restore<float>(back);
  std::mt19937_64 rng(4);
  const auto fj = randf({2, 3, 8, 16}, rng), fa = randf({2, 3, 8, 16}, rng);
  Graph<float> g1(GradMode::inference), g2(GradMode::inference);
  const auto a = g1.value(model.forward(g1, fj, fa, {}).embedding);
  const auto b = g2.value(restored.forward(g2, fj, fa, {}).embedding);
  CHECK(a == b);

  CHECK_THROWS_AS(parse_checkpoint(bytes.substr(0, bytes.size() - 4)), FormatError);
  CHECK_THROWS_AS(parse_checkpoint("SKGAIT-CHECKPOINT 9\n{}"), FormatError);

  const fs::path p = scratch("ckpt") / "m.ckpt";
  save_checkpoint(c, p.string());
  CHECK(load_checkpoint(p.string()).tensors == c.tensors);
}

TEST_CASE("GaitModel: seeded initialization and embedding layout") {
  GaitModel<float> a(tiny(), 11), b(tiny(), 11), c(tiny(), 12);
  CHECK(serialize_checkpoint(snapshot(a)) == serialize_checkpoint(snapshot(b)));
  CHECK(serialize_checkpoint(snapshot(a)) != serialize_checkpoint(snapshot(c)));
  CHECK(a.embedding_size() == 15);
  std::mt19937_64 rng(5);
  Graph<float> g(GradMode::inference);
  const auto out = a.forward(g, randf({3, 3, 8, 16}, rng), randf({3, 3, 8, 16}, rng), {});
  CHECK(g.value(out.embedding).shape() == Shape{3, 15});
  REQUIRE(out.group_embeddings.size() == 5);
  for (std::size_t k = 0; k < 5; ++k)
    for (std::size_t n = 0; n < 3; ++n)
      for (std::size_t d = 0; d < 3; ++d)
        CHECK(g.value(out.embedding).at(n, k * 3 + d) == g.value(out.group_embeddings[k]).at(n, d));
  ModelConfig bad = tiny();
  bad.frames = 0;
  CHECK_THROWS(bad.validate());
}

TEST_CASE("split_subjects: per-sex halves, odd goes to train, seeded") {
  const auto m = manifest_with(36, 60);
  const Split s = split_subjects(m, 7);
  CHECK(s.train.size() == 48);
  CHECK(s.test.size() == 48);
  auto females = [&](const std::vector<std::string>& ids) {
    return std::count_if(ids.begin(), ids.end(), [&](const std::string& id) { return m.subject(id)->sex == "F"; });
  };
  CHECK(females(s.train) == 18);
  CHECK(females(s.test) == 18);
  check_disjoint(s);
  CHECK(split_subjects(m, 7).train == s.train);
  CHECK(split_subjects(m, 8).train != s.train);

  const Split small = split_subjects(manifest_with(2, 3), 1);
  CHECK(small.train.size() == 3);
  CHECK(small.test.size() == 2);
  CHECK_THROWS_AS(split_subjects(manifest_with(1, 4), 1), ProtocolError);
  CHECK_THROWS(check_disjoint(Split{{"a", "b"}, {"b"}, 0}));
}

TEST_CASE("BatchSampler: P identities by K samples") {
  std::vector<int> labels;
  for (int id = 0; id < 10; ++id)
    for (int r = 0; r < (id == 0 ? 2 : 6); ++r) labels.push_back(id);
  BatchSampler s(labels, {4, 3}, 9);
  for (int it = 0; it < 50; ++it) {
    const auto b = s.next();
    REQUIRE(b.size() == 12);
    std::map<int, int> per;
    for (std::size_t i : b) ++per[labels[i]];
    CHECK(per.size() == 4);
    for (auto [id, n] : per) CHECK(n == 3);
    for (std::size_t i = 0; i < 12; i += 3)
      for (std::size_t j = i; j < i + 3; ++j) CHECK(labels[b[j]] == labels[b[i]]);
  }
  CHECK_THROWS(BatchSampler(labels, {11, 2}, 1));
}

TEST_CASE("evaluate: identical-view exclusion and brute-force agreement") {
  const auto gallery = batch({{0, 0}, {10, 0}, {0.5, 0}}, {"A", "B", "B"}, {"LCL", "LCL", "LCL"}, {"0", "90", "0"});
  // Probe at view 0 next to A's view-0 gallery entry; only B's view-90 entry is eligible.
  const auto probes = batch({{0.1, 0}}, {"A"}, {"HCL"}, {"0"});
  const EvalResult r = evaluate(gallery, probes);
  CHECK(r.failures == std::vector<std::string>{probes.sequence[0]});
  CHECK(*r.accuracy("HCL", "0") == 0.0);

  std::mt19937_64 rng(12);
  std::normal_distribution<double> nd;
  const std::vector<std::string> views{"0", "90", "180"};
  for (int trial = 0; trial < 10; ++trial) {
    std::vector<std::vector<double>> gr, pr;
    std::vector<std::string> gs, gc, gv, ps, pc, pv;
    for (const std::string id : {"A", "B", "C"})
      for (const auto& v : views) {
        gr.push_back({nd(rng), nd(rng)});
        gs.push_back(id), gc.push_back("LCL"), gv.push_back(v);
        pr.push_back({nd(rng), nd(rng)});
        ps.push_back(id), pc.push_back(trial % 2 ? "MCL" : "HCL"), pv.push_back(v);
      }
    const auto gb = batch(gr, gs, gc, gv), pb = batch(pr, ps, pc, pv);
    const auto got = evaluate(gb, pb);
    const auto want = oracle::rank1_bruteforce(gb, pb);
    for (const auto& [key, acc] : want) CHECK(*got.accuracy(key.first, key.second) == doctest::Approx(acc));
  }
}

TEST_CASE("eval_to_csv: header, provenance and mean column") {
  EvalResult r;
  r.conditions = {"HCL"};
  r.views = {"0", "90"};
  r.cells[{"HCL", "0"}] = {1, 2};
  r.cells[{"HCL", "90"}] = {2, 2};
  CHECK(r.condition_mean("HCL") == doctest::Approx(0.75));
  CHECK(r.overall() == doctest::Approx(0.75));
  const std::string csv = eval_to_csv(r, {{"seed", "1"}});
  CHECK(csv.find("# seed=1") != std::string::npos);
  CHECK(csv.find("HCL") != std::string::npos);
  CHECK(csv.find("0.75") != std::string::npos);
}

TEST_CASE("prepare + train + extract: deterministic end to end on a tiny dataset") {
  const fs::path dir = scratch("e2e");
  synth::SynthConfig sc;
  sc.identities = 4;
  sc.views = {"0", "90"};
  sc.sequences_per_cell = 2;
  sc.min_frames = 20;
  sc.max_frames = 24;
  sc.seed = 3;
  const DatasetManifest m = build_synthetic_manifest(sc, dir.string());
  const CalibrationSet cal = load_calibration(m.resolve(m.calibration));
  PrepareOptions po;
  po.frames = 8;
  std::vector<std::string> all;
  for (const auto& s : m.subjects) all.push_back(s.id);
  const auto data = prepare_dataset(m, select_sequences(m, all), cal, po, 2);
  REQUIRE(data.size() == 16);

  ModelConfig mc = tiny();
  TrainConfig tc;
  tc.iterations = 5;
  tc.batch = {2, 2};
  tc.seed = 4;
  const TrainResult a = train(data, mc, FusionLossConfig{}, tc);
  const TrainResult b = train(data, mc, FusionLossConfig{}, tc);
  CHECK(a.loss.size() == 5);
  CHECK(a.loss == b.loss);
  CHECK(serialize_checkpoint(a.checkpoint) == serialize_checkpoint(b.checkpoint));
  CHECK(a.classes.size() == 4);

  const auto model = restore<float>(a.checkpoint);
  const auto e1 = extract(model, data, 1), e3 = extract(model, data, 3);
  CHECK(e1.embeddings == e3.embeddings);
  CHECK(e1.sequence == e3.sequence);
  CHECK(e1.embeddings.shape() == Shape{16, 15});
}
