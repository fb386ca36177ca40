#include "skgait/protocol.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <set>
#include <thread>

#include "skgait/error.hpp"
#include "skgait/skeleton.hpp"

namespace skgait {

namespace {

// Runs fn(i) for i in [0, n) on `workers` threads with a static stride.
void parallel_for(std::size_t n, std::size_t workers, const std::function<void(std::size_t)>& fn) {
  workers = std::max<std::size_t>(1, std::min(workers, n));
  if (workers == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::exception_ptr> errors(workers);
  std::vector<std::thread> pool;
  for (std::size_t w = 0; w < workers; ++w)
    pool.emplace_back([&, w] {
      try {
        for (std::size_t i = w; i < n; i += workers) fn(i);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace

Split split_subjects(const DatasetManifest& m, std::uint64_t seed) {
  std::map<std::string, std::vector<std::string>> by_sex;
  for (const auto& s : m.subjects) by_sex[s.sex].push_back(s.id);
  for (const char* sex : {"F", "M"})
    if (by_sex[sex].size() < 2)
      throw ProtocolError(std::string("split needs at least 2 subjects of sex ") + sex + ", found " +
                          std::to_string(by_sex[sex].size()));
  Split out;
  out.seed = seed;
  std::mt19937_64 rng(seed);
  for (auto& [sex, ids] : by_sex) {
    std::sort(ids.begin(), ids.end());
    std::shuffle(ids.begin(), ids.end(), rng);
    const std::size_t n_test = ids.size() / 2;
    out.test.insert(out.test.end(), ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(n_test));
    out.train.insert(out.train.end(), ids.begin() + static_cast<std::ptrdiff_t>(n_test), ids.end());
  }
  std::sort(out.train.begin(), out.train.end());
  std::sort(out.test.begin(), out.test.end());
  check_disjoint(out);
  return out;
}

void check_disjoint(const Split& s) {
  const std::set<std::string> train(s.train.begin(), s.train.end());
  for (const auto& id : s.test)
    if (train.count(id)) throw ProtocolError("subject " + id + " is in both train and test");
}

BatchSampler::BatchSampler(std::vector<int> labels, BatchPlan plan, std::uint64_t seed) : plan_(plan), rng_(seed) {
  if (plan.p < 2 || plan.k < 1) throw ConfigError("batch plan needs P >= 2 and K >= 1");
  for (std::size_t i = 0; i < labels.size(); ++i) by_label_[labels[i]].push_back(i);
  for (const auto& [id, _] : by_label_) ids_.push_back(id);
  if (ids_.size() < plan.p)
    throw ProtocolError("batch plan wants " + std::to_string(plan.p) + " identities, data has " +
                        std::to_string(ids_.size()));
}

std::vector<std::size_t> BatchSampler::next() {
  std::vector<int> ids = ids_;
  std::shuffle(ids.begin(), ids.end(), rng_);
  std::vector<std::size_t> out;
  out.reserve(plan_.p * plan_.k);
  for (std::size_t i = 0; i < plan_.p; ++i) {
    std::vector<std::size_t> pool = by_label_.at(ids[i]);
    if (pool.size() >= plan_.k) {
      for (std::size_t j = 0; j < plan_.k; ++j) {
        std::uniform_int_distribution<std::size_t> pick(j, pool.size() - 1);
        std::swap(pool[j], pool[pick(rng_)]);
        out.push_back(pool[j]);
      }
    } else {
      std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
      for (std::size_t j = 0; j < plan_.k; ++j) out.push_back(pool[pick(rng_)]);
    }
  }
  return out;
}

std::optional<PreparedSequence> prepare_sequence(const SequenceRecord& record, const SkeletonSequence& seq,
                                                 const CalibrationSet& calibration, const PrepareOptions& opt,
                                                 std::string* warning) {
  std::optional<std::array<RigidTransform, 3>> chain;
  std::vector<DualSkeleton> duals;
  for (const auto& step : seq.by_time()) {
    const bool fused = step.front().source == Source::fused;
    for (const auto& f : step)
      if ((f.source == Source::fused) != fused)
        throw FormatError("sequence " + record.id + " mixes fused and raw frames at t=" +
                          std::to_string(f.frame_index));
    try {
      Skeleton16 s;
      if (fused) {
        if (step.size() != 1)
          throw FormatError("sequence " + record.id + " has several fused frames at t=" +
                            std::to_string(step.front().frame_index));
        s = select_joints(step.front());
      } else {
        if (!chain) {
          chain.emplace();
          for (std::size_t d = 0; d < 3; ++d) (*chain)[d] = chain_to_master(calibration, kDevices[d], opt.chain);
        }
        std::vector<SkeletonFrame32> aligned;
        aligned.reserve(step.size());
        for (const auto& f : step) aligned.push_back(align_frame(f, (*chain)[static_cast<std::size_t>(f.source)]));
        s = select_joints(fuse(aligned, opt.fusion));
      }
      duals.push_back(build_dual_skeleton(s));
    } catch (const IncompleteSkeletonError&) {
    } catch (const DegenerateSkeletonError&) {
    }
  }
  if (duals.size() < 2) {
    if (warning)
      *warning = "sequence " + record.id + " skipped: " + std::to_string(duals.size()) + " usable frame(s)";
    return std::nullopt;
  }
  PreparedSequence out;
  out.record = record;
  out.usable_frames = duals.size();
  out.tensors = sequence_to_tensors(duals, opt.frames);
  return out;
}

SkeletonSequence fuse_sequence(const SkeletonSequence& raw, const CalibrationSet& calibration, ChainMode chain,
                               const FusionPolicy& policy) {
  std::array<RigidTransform, 3> to_master;
  for (std::size_t d = 0; d < 3; ++d) to_master[d] = chain_to_master(calibration, kDevices[d], chain);
  SkeletonSequence out;
  out.provenance = raw.provenance;
  for (const auto& step : raw.by_time()) {
    std::vector<SkeletonFrame32> aligned;
    for (const auto& f : step) {
      if (f.source == Source::fused) throw FormatError("sequence is already fused");
      aligned.push_back(align_frame(f, to_master[static_cast<std::size_t>(f.source)]));
    }
    out.frames.push_back(fuse(aligned, policy).as_frame());
  }
  return out;
}

std::vector<PreparedSequence> prepare_dataset(const DatasetManifest& m, const std::vector<SequenceRecord>& records,
                                              const CalibrationSet& calibration, const PrepareOptions& opt,
                                              std::size_t workers,
                                              const std::function<void(const std::string&)>& log) {
  std::vector<std::optional<PreparedSequence>> slots(records.size());
  std::vector<std::string> warnings(records.size());
  parallel_for(records.size(), workers, [&](std::size_t i) {
    const SkeletonSequence seq = load_sequence(m.resolve(records[i].path));
    slots[i] = prepare_sequence(records[i], seq, calibration, opt, &warnings[i]);
  });
  std::vector<PreparedSequence> out;
  for (std::size_t i = 0; i < slots.size(); ++i) {
    if (slots[i])
      out.push_back(std::move(*slots[i]));
    else if (log)
      log(warnings[i]);
  }
  return out;
}

std::vector<SequenceRecord> select_sequences(const DatasetManifest& m, const std::vector<std::string>& subjects,
                                             const std::vector<std::string>& conditions) {
  const std::set<std::string> ids(subjects.begin(), subjects.end());
  const std::set<std::string> conds(conditions.begin(), conditions.end());
  std::vector<SequenceRecord> out;
  for (const auto& q : m.sequences)
    if (ids.count(q.subject) && (conds.empty() || conds.count(q.condition))) out.push_back(q);
  return out;
}

EmbeddingBatch extract(const GaitModel<float>& model, const std::vector<PreparedSequence>& data, std::size_t workers) {
  constexpr std::size_t kChunk = 16;
  const std::size_t e = model.embedding_size();
  EmbeddingBatch out;
  out.embeddings = Tensor<double>({std::max<std::size_t>(data.size(), 1), e});
  std::set<std::string> subjects;
  for (const auto& d : data) subjects.insert(d.record.subject);
  for (const auto& d : data) {
    out.identity.push_back(static_cast<int>(std::distance(subjects.begin(), subjects.find(d.record.subject))));
    out.subject.push_back(d.record.subject);
    out.condition.push_back(d.record.condition);
    out.view.push_back(d.record.view);
    out.sequence.push_back(d.record.id);
  }
  const std::size_t chunks = (data.size() + kChunk - 1) / kChunk;
  parallel_for(chunks, workers, [&](std::size_t c) {
    const std::size_t begin = c * kChunk, end = std::min(data.size(), begin + kChunk);
    std::vector<GaitTensor> joints, anthro;
    for (std::size_t i = begin; i < end; ++i) {
      joints.push_back(model.joint_norm.apply(data[i].tensors.joints));
      anthro.push_back(model.anthro_norm.apply(data[i].tensors.anthropometric));
    }
    std::vector<const GaitTensor*> pj, pa;
    for (std::size_t i = 0; i < joints.size(); ++i) {
      pj.push_back(&joints[i]);
      pa.push_back(&anthro[i]);
    }
    Graph<float> g(GradMode::inference);
    const auto res = model.forward(g, stack_samples<float>(pj), stack_samples<float>(pa), ForwardOptions{});
    const Tensor<float>& emb = g.value(res.embedding);
    for (std::size_t i = begin; i < end; ++i)
      for (std::size_t k = 0; k < e; ++k) out.embeddings.at(i, k) = emb.at(i - begin, k);
  });
  if (data.empty()) out.embeddings = Tensor<double>({1, e});
  return out;
}

Metric parse_metric(std::string_view s) {
  if (s == "euclidean") return Metric::euclidean;
  if (s == "cosine") return Metric::cosine;
  throw ConfigError("unknown metric '" + std::string(s) + "' (euclidean|cosine)");
}

std::string_view to_string(Metric m) { return m == Metric::euclidean ? "euclidean" : "cosine"; }

std::optional<double> EvalResult::accuracy(const std::string& condition, const std::string& view) const {
  const auto it = cells.find({condition, view});
  if (it == cells.end() || it->second.total == 0) return std::nullopt;
  return it->second.accuracy();
}

double EvalResult::condition_mean(const std::string& condition) const {
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& v : views)
    if (const auto a = accuracy(condition, v)) {
      sum += *a;
      ++n;
    }
  return n ? sum / double(n) : 0.0;
}

double EvalResult::overall() const {
  if (conditions.empty()) return 0.0;
  double sum = 0.0;
  for (const auto& c : conditions) sum += condition_mean(c);
  return sum / double(conditions.size());
}

EvalResult evaluate(const EmbeddingBatch& gallery, const EmbeddingBatch& probes, Metric metric) {
  if (gallery.size() == 0) throw ProtocolError("evaluation gallery is empty");
  const std::size_t e = gallery.embeddings.dim(1);
  if (probes.size() > 0 && probes.embeddings.dim(1) != e)
    throw ShapeError("gallery and probe embeddings differ in width");

  auto row_norm = [&](const Tensor<double>& t, std::size_t i) {
    double s = 0.0;
    for (std::size_t k = 0; k < e; ++k) s += t.at(i, k) * t.at(i, k);
    return std::sqrt(s);
  };
  auto dist = [&](std::size_t p, std::size_t q) {
    if (metric == Metric::euclidean) {
      double s = 0.0;
      for (std::size_t k = 0; k < e; ++k) {
        const double d = probes.embeddings.at(p, k) - gallery.embeddings.at(q, k);
        s += d * d;
      }
      return std::sqrt(s);
    }
    double dot = 0.0;
    for (std::size_t k = 0; k < e; ++k) dot += probes.embeddings.at(p, k) * gallery.embeddings.at(q, k);
    const double n = row_norm(probes.embeddings, p) * row_norm(gallery.embeddings, q);
    return 1.0 - (n > 0 ? dot / n : 0.0);
  };

  EvalResult r;
  std::set<std::string> conds(probes.condition.begin(), probes.condition.end());
  std::set<std::string> views(probes.view.begin(), probes.view.end());
  for (auto c : kConditions)
    if (conds.erase(std::string(c))) r.conditions.emplace_back(c);
  r.conditions.insert(r.conditions.end(), conds.begin(), conds.end());
  for (auto v : kViews)
    if (views.erase(std::string(v))) r.views.emplace_back(v);
  r.views.insert(r.views.end(), views.begin(), views.end());

  for (std::size_t p = 0; p < probes.size(); ++p) {
    // Ties go to the smallest (distance, subject, sequence) so gallery order is irrelevant.
    std::optional<std::size_t> best;
    double best_d = std::numeric_limits<double>::infinity();
    bool identity_present = false;
    for (std::size_t q = 0; q < gallery.size(); ++q) {
      if (gallery.view[q] == probes.view[p]) continue;
      identity_present = identity_present || gallery.subject[q] == probes.subject[p];
      const double d = dist(p, q);
      if (!best || d < best_d ||
          (d == best_d && std::tie(gallery.subject[q], gallery.sequence[q]) <
                              std::tie(gallery.subject[*best], gallery.sequence[*best]))) {
        best = q;
        best_d = d;
      }
    }
    EvalCell& cell = r.cells[{probes.condition[p], probes.view[p]}];
    ++cell.total;
    if (!identity_present) r.failures.push_back(probes.sequence[p]);
    if (best && gallery.subject[*best] == probes.subject[p]) ++cell.correct;
  }
  return r;
}

std::string provenance_comment(const std::map<std::string, std::string>& provenance) {
  std::string out;
  for (const auto& [k, v] : provenance) out += "# " + k + "=" + v + "\n";
  return out;
}

namespace {

std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

}  // namespace

std::string eval_to_csv(const EvalResult& r, const std::map<std::string, std::string>& provenance) {
  std::string out = provenance_comment(provenance);
  out += "condition";
  std::vector<std::string> cols;
  for (auto v : kViews) cols.emplace_back(v);
  for (const auto& v : r.views)
    if (std::find(cols.begin(), cols.end(), v) == cols.end()) cols.push_back(v);
  for (const auto& c : cols) out += "," + c;
  out += ",mean\n";
  for (const auto& c : r.conditions) {
    out += c;
    for (const auto& v : cols) {
      out += ",";
      if (const auto a = r.accuracy(c, v)) out += fixed(*a, 4);
    }
    out += "," + fixed(r.condition_mean(c), 4) + "\n";
  }
  out += "overall";
  for (std::size_t i = 0; i < cols.size(); ++i) out += ",";
  out += "," + fixed(r.overall(), 4) + "\n";
  return out;
}

std::string loss_trace_text(const std::vector<double>& loss, const std::map<std::string, std::string>& provenance) {
  std::string out = provenance_comment(provenance);
  out += "# iteration loss\n";
  char buf[64];
  for (std::size_t i = 0; i < loss.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%zu %.9g\n", i + 1, loss[i]);
    out += buf;
  }
  return out;
}

std::string embeddings_to_csv(const EmbeddingBatch& b, const PyramidSpec& spec, std::size_t per_group,
                              const std::map<std::string, std::string>& provenance) {
  std::string out = provenance_comment(provenance);
  out += "sequence,subject,condition,view";
  for (const auto& g : spec.groups)
    for (std::size_t k = 0; k < per_group; ++k) out += "," + g.name + "_" + std::to_string(k);
  out += "\n";
  char buf[64];
  for (std::size_t i = 0; i < b.size(); ++i) {
    out += b.sequence[i] + "," + b.subject[i] + "," + b.condition[i] + "," + b.view[i];
    for (std::size_t k = 0; k < b.embeddings.dim(1); ++k) {
      std::snprintf(buf, sizeof buf, ",%.9g", b.embeddings.at(i, k));
      out += buf;
    }
    out += "\n";
  }
  return out;
}

}  // namespace skgait
