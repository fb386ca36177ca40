#include "skgait/commands.hpp"

#include <cstdio>
#include <filesystem>
#include <ostream>
#include <set>

#include "skgait/error.hpp"
#include "skgait/textio.hpp"

namespace skgait::cmd {

namespace fs = std::filesystem;

namespace {

std::string under(const std::string& dir, const std::string& name) { return (fs::path(dir) / name).string(); }

std::vector<std::string> eval_subjects(const RunConfig& cfg, const DatasetManifest& m) {
  if (cfg.eval.subjects == "all") {
    std::vector<std::string> ids;
    for (const auto& s : m.subjects) ids.push_back(s.id);
    return ids;
  }
  const Split split = split_subjects(m, cfg.seed);
  return cfg.eval.subjects == "train" ? split.train : split.test;
}

std::vector<PreparedSequence> prepare(const RunConfig& cfg, const DatasetManifest& m,
                                      const std::vector<SequenceRecord>& records, std::ostream& out) {
  const CalibrationSet calib = load_dataset_calibration(cfg, m);
  return prepare_dataset(m, records, calib, cfg.prepare_options(), cfg.workers,
                         [&](const std::string& w) { out << "warning: " << w << "\n"; });
}

}  // namespace

CalibrationSet load_dataset_calibration(const RunConfig& cfg, const DatasetManifest& m) {
  if (!cfg.paths.calibration.empty()) return load_calibration(cfg.paths.calibration);
  if (!m.calibration.empty()) return load_calibration(m.resolve(m.calibration));
  return CalibrationSet::identity_rig();
}

DatasetManifest gen_synth(const RunConfig& cfg, std::ostream& out) {
  const auto m = synth::build_synthetic_manifest(cfg.synth, cfg.paths.dataset, cfg.provenance("gen-synth"));
  out << "wrote " << m.sequences.size() << " sequences of " << m.subjects.size() << " subjects to "
      << cfg.paths.dataset << "\n";
  return m;
}

DatasetManifest fuse(const RunConfig& cfg, std::ostream& out) {
  const DatasetManifest m = load_manifest(cfg.paths.manifest_path());
  const CalibrationSet calib = load_dataset_calibration(cfg, m);
  const std::string dir = under(cfg.paths.output, "oj");
  DatasetManifest fused = m;
  fused.base_dir = dir;
  fused.calibration.clear();
  fused.provenance = cfg.provenance("fuse");
  fused.provenance["chain_mode"] = std::string(to_string(cfg.chain));
  for (auto& q : fused.sequences) {
    SkeletonSequence s = fuse_sequence(load_sequence(m.resolve(q.path)), calib, cfg.chain, cfg.fusion);
    for (const auto& [k, v] : fused.provenance) s.provenance[k] = v;
    q.path = "sequences/" + q.id + ".jsonl";
    save_sequence(s, under(dir, q.path));
  }
  save_manifest(fused, under(dir, "manifest.json"));
  out << "fused " << fused.sequences.size() << " sequences into " << dir << "\n";
  return fused;
}

void fuse_file(const RunConfig& cfg, const std::string& input, const std::string& output, std::ostream& out) {
  if (cfg.paths.calibration.empty()) throw ConfigError("fuse --input needs a calibration file (--calibration)");
  const CalibrationSet calib = load_calibration(cfg.paths.calibration);
  SkeletonSequence s = fuse_sequence(load_sequence(input), calib, cfg.chain, cfg.fusion);
  for (const auto& [k, v] : cfg.provenance("fuse")) s.provenance[k] = v;
  s.provenance["chain_mode"] = std::string(to_string(cfg.chain));
  save_sequence(s, output);
  out << "fused " << s.frames.size() << " frames into " << output << "\n";
}

TrainResult train(const RunConfig& cfg, std::ostream& out) {
  const DatasetManifest m = load_manifest(cfg.paths.manifest_path());
  const Split split = split_subjects(m, cfg.seed);
  const auto data = prepare(cfg, m, select_sequences(m, split.train), out);
  out << "training on " << data.size() << " sequences of " << split.train.size() << " subjects, "
      << cfg.train.iterations << " iterations\n";
  auto prov = cfg.provenance("train");
  const std::size_t every = std::max<std::size_t>(1, cfg.train.iterations / 20);
  TrainResult r = skgait::train(data, cfg.model, cfg.loss, cfg.train, prov, [&](std::size_t it, double loss) {
    if (it % every == 0 || it == cfg.train.iterations) out << "iteration " << it << " loss " << loss << "\n";
  });
  save_checkpoint(r.checkpoint, cfg.paths.checkpoint_path());
  write_text_file(under(cfg.paths.output, "loss.txt"), loss_trace_text(r.loss, prov));
  out << "checkpoint " << cfg.paths.checkpoint_path() << "\n";
  return r;
}

EvalResult eval(const RunConfig& cfg, std::ostream& out) {
  const Checkpoint ck = load_checkpoint(cfg.paths.checkpoint_path());
  const GaitModel<float> model = restore<float>(ck);
  const DatasetManifest m = load_manifest(cfg.paths.manifest_path());
  const auto subjects = eval_subjects(cfg, m);

  std::vector<std::string> probes = cfg.eval.probe_conditions;
  if (probes.empty()) {
    std::set<std::string> present;
    for (const auto& q : select_sequences(m, subjects))
      if (q.condition != cfg.eval.gallery_condition) present.insert(q.condition);
    for (auto c : kConditions)
      if (present.count(std::string(c))) probes.emplace_back(c);
  }
  if (probes.empty()) throw ProtocolError("no probe sequences: the dataset only holds the gallery condition");

  const auto gallery = extract(model, prepare(cfg, m, select_sequences(m, subjects, {cfg.eval.gallery_condition}), out),
                               cfg.workers);
  const auto probe = extract(model, prepare(cfg, m, select_sequences(m, subjects, probes), out), cfg.workers);
  const EvalResult r = evaluate(gallery, probe, cfg.eval.metric);
  for (const auto& f : r.failures) out << "warning: probe " << f << " has no gallery match for its identity\n";
  auto prov = cfg.provenance("eval");
  prov["metric"] = std::string(to_string(cfg.eval.metric));
  const std::string csv = eval_to_csv(r, prov);
  write_text_file(under(cfg.paths.output, "eval.csv"), csv);
  out << csv;
  return r;
}

std::size_t params(const RunConfig& cfg, std::ostream& out) {
  const GaitModel<float> model(cfg.model, cfg.seed);
  const std::size_t total = model.count_parameters(true);
  char buf[160];
  std::snprintf(buf, sizeof buf, "parameters %zu (%.3f M), without classifier %zu\n", total, double(total) / 1e6,
                model.count_parameters(false));
  out << buf;
  return total;
}

EmbeddingBatch export_embeddings(const RunConfig& cfg, std::ostream& out) {
  const Checkpoint ck = load_checkpoint(cfg.paths.checkpoint_path());
  const GaitModel<float> model = restore<float>(ck);
  const DatasetManifest m = load_manifest(cfg.paths.manifest_path());
  const auto data = prepare(cfg, m, select_sequences(m, eval_subjects(cfg, m)), out);
  const EmbeddingBatch b = extract(model, data, cfg.workers);
  const std::string path = under(cfg.paths.output, "embeddings.csv");
  write_text_file(path, embeddings_to_csv(b, model.pyramid(), model.config().embedding_per_group,
                                          cfg.provenance("export-embeddings")));
  out << "wrote " << b.size() << " embeddings to " << path << "\n";
  return b;
}

}  // namespace skgait::cmd
