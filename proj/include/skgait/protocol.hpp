#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "skgait/dataset.hpp"
#include "skgait/graph.hpp"
#include "skgait/loss.hpp"
#include "skgait/model.hpp"

namespace skgait {

struct Split {
  std::vector<std::string> train;
  std::vector<std::string> test;
  std::uint64_t seed = 0;
};

// Halves each sex independently; an odd subject goes to train. Throws unless
// both sexes have at least two subjects.
Split split_subjects(const DatasetManifest& m, std::uint64_t seed);
void check_disjoint(const Split& s);

struct BatchPlan {
  std::size_t p = 8;  // identities per batch
  std::size_t k = 4;  // sequences per identity
};

// P identities × K sequences. Identities are drawn without replacement,
// sequences without replacement unless an identity has fewer than K.
class BatchSampler {
 public:
  BatchSampler(std::vector<int> labels, BatchPlan plan, std::uint64_t seed);
  std::vector<std::size_t> next();
  const BatchPlan& plan() const { return plan_; }

 private:
  BatchPlan plan_;
  std::map<int, std::vector<std::size_t>> by_label_;
  std::vector<int> ids_;
  std::mt19937_64 rng_;
};

struct PrepareOptions {
  ChainMode chain = ChainMode::strict;
  FusionPolicy fusion;
  std::size_t frames = kDefaultFrames;
};

// Fused, 16-joint, dual-skeleton form of one sequence.
struct PreparedSequence {
  SequenceRecord record;
  StreamTensors tensors;
  std::size_t usable_frames = 0;
};

// Raw device frames are aligned and fused per time step; already fused (OJ)
// frames pass through. Frames missing a retained joint are dropped. Returns
// nothing (and fills `warning`) when fewer than 2 frames remain.
std::optional<PreparedSequence> prepare_sequence(const SequenceRecord& record, const SkeletonSequence& seq,
                                                 const CalibrationSet& calibration, const PrepareOptions& opt,
                                                 std::string* warning = nullptr);

// Raw sequence -> fused OJ sequence (one Source::fused frame per time step).
SkeletonSequence fuse_sequence(const SkeletonSequence& raw, const CalibrationSet& calibration, ChainMode chain,
                               const FusionPolicy& policy);

// Loads and prepares the listed sequences in parallel; output keeps input
// order. Skipped sequences are reported through `log`.
std::vector<PreparedSequence> prepare_dataset(const DatasetManifest& m, const std::vector<SequenceRecord>& records,
                                              const CalibrationSet& calibration, const PrepareOptions& opt,
                                              std::size_t workers = 1,
                                              const std::function<void(const std::string&)>& log = {});

// Sequences whose subject is in `subjects` (and, if given, whose condition is
// in `conditions`), in manifest order.
std::vector<SequenceRecord> select_sequences(const DatasetManifest& m, const std::vector<std::string>& subjects,
                                             const std::vector<std::string>& conditions = {});

struct TrainConfig {
  std::size_t iterations = 20000;
  BatchPlan batch;
  std::uint64_t seed = 1;
  double learning_rate = 0.01;
  double momentum = 0.9;
  double weight_decay = 0.0;
  std::vector<double> lr_milestones{0.5, 0.75};  // fractions of the budget
  double lr_decay = 0.1;

  void validate() const;
  double learning_rate_at(std::size_t iteration) const;
};

struct TrainResult {
  Checkpoint checkpoint;
  std::vector<double> loss;  // per iteration
  std::vector<std::string> classes;
};

// Fits the input standardizers on the training sequences, then runs SGD on
// the fusion loss. Class count follows the number of training identities.
// `progress` is called after each iteration.
TrainResult train(const std::vector<PreparedSequence>& data, ModelConfig model_cfg, const FusionLossConfig& loss_cfg,
                  const TrainConfig& cfg, const std::map<std::string, std::string>& provenance = {},
                  const std::function<void(std::size_t, double)>& progress = {});

// Inference-mode embeddings (running batch-norm statistics), computed in
// fixed-size chunks so results do not depend on the worker count.
EmbeddingBatch extract(const GaitModel<float>& model, const std::vector<PreparedSequence>& data,
                       std::size_t workers = 1);

enum class Metric { euclidean, cosine };
Metric parse_metric(std::string_view s);
std::string_view to_string(Metric m);

struct EvalCell {
  std::size_t correct = 0;
  std::size_t total = 0;
  double accuracy() const { return total ? double(correct) / double(total) : 0.0; }
};

struct EvalResult {
  std::vector<std::string> conditions;  // probe conditions, row order
  std::vector<std::string> views;       // column order
  std::map<std::pair<std::string, std::string>, EvalCell> cells;
  std::vector<std::string> failures;  // probes whose identity is missing from the candidates

  std::optional<double> accuracy(const std::string& condition, const std::string& view) const;
  // Mean over the views that have probes.
  double condition_mean(const std::string& condition) const;
  // Mean of the condition means.
  double overall() const;
};

// Rank-1 nearest-neighbour identification. Each probe at view v is matched
// only against gallery entries at views other than v.
EvalResult evaluate(const EmbeddingBatch& gallery, const EmbeddingBatch& probes, Metric metric = Metric::euclidean);

// Rows are conditions, columns the views in canonical order, then the mean.
std::string eval_to_csv(const EvalResult& r, const std::map<std::string, std::string>& provenance = {});
std::string loss_trace_text(const std::vector<double>& loss, const std::map<std::string, std::string>& provenance = {});
std::string embeddings_to_csv(const EmbeddingBatch& b, const PyramidSpec& spec, std::size_t per_group,
                              const std::map<std::string, std::string>& provenance = {});

// "# key=value" lines.
std::string provenance_comment(const std::map<std::string, std::string>& provenance);

}  // namespace skgait
