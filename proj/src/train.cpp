#include <algorithm>
#include <cmath>
#include <set>

#if defined(__GLIBC__)
#include <malloc.h>
#endif

#include "skgait/error.hpp"
#include "skgait/protocol.hpp"

namespace skgait {

void TrainConfig::validate() const {
  if (batch.p < 2) throw ConfigError("train.p must be >= 2 (triplets need negatives)");
  if (batch.k < 2) throw ConfigError("train.k must be >= 2 (triplets need positives)");
  if (!(learning_rate > 0.0)) throw ConfigError("train.learning_rate must be > 0");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw ConfigError("train.momentum must lie in [0, 1)");
  if (!(weight_decay >= 0.0)) throw ConfigError("train.weight_decay must be >= 0");
  if (!(lr_decay > 0.0)) throw ConfigError("train.lr_decay must be > 0");
  for (double m : lr_milestones)
    if (!(m > 0.0 && m < 1.0)) throw ConfigError("train.lr_milestones must lie in (0, 1)");
}

double TrainConfig::learning_rate_at(std::size_t iteration) const {
  double lr = learning_rate;
  for (double m : lr_milestones)
    if (double(iteration) >= m * double(iterations)) lr *= lr_decay;
  return lr;
}

namespace {

Tensor<double> round_to_float(const Tensor<double>& t) { return t.cast<float>().cast<double>(); }

// Activations are multi-megabyte and reallocated every op; keeping them on
// the heap instead of fresh mmaps avoids a page-fault storm per iteration.
void keep_large_blocks_on_heap() {
#if defined(__GLIBC__)
  static const bool once = [] {
    mallopt(M_MMAP_THRESHOLD, 512 * 1024 * 1024);
    mallopt(M_TRIM_THRESHOLD, 1024 * 1024 * 1024);
    return true;
  }();
  (void)once;
#endif
}

}  // namespace

TrainResult train(const std::vector<PreparedSequence>& data, ModelConfig model_cfg, const FusionLossConfig& loss_cfg,
                  const TrainConfig& cfg, const std::map<std::string, std::string>& provenance,
                  const std::function<void(std::size_t, double)>& progress) {
  cfg.validate();
  loss_cfg.validate();
  keep_large_blocks_on_heap();
  if (data.empty()) throw ProtocolError("training set is empty");

  TrainResult result;
  std::set<std::string> subjects;
  for (const auto& d : data) subjects.insert(d.record.subject);
  result.classes.assign(subjects.begin(), subjects.end());
  std::vector<int> labels;
  for (const auto& d : data)
    labels.push_back(static_cast<int>(std::distance(subjects.begin(), subjects.find(d.record.subject))));
  model_cfg.num_classes = result.classes.size();

  GaitModel<float> model(model_cfg, cfg.seed);
  {
    std::vector<GaitTensor> joints, anthro;
    for (const auto& d : data) {
      joints.push_back(d.tensors.joints);
      anthro.push_back(d.tensors.anthropometric);
    }
    // Stored as float in checkpoints; rounding now keeps restored models identical.
    model.joint_norm = Standardizer::fit(joints);
    model.anthro_norm = Standardizer::fit(anthro);
    for (auto* s : {&model.joint_norm, &model.anthro_norm}) {
      s->mean = round_to_float(s->mean);
      s->scale = round_to_float(s->scale);
    }
  }
  std::vector<GaitTensor> joints, anthro;
  for (const auto& d : data) {
    joints.push_back(model.joint_norm.apply(d.tensors.joints));
    anthro.push_back(model.anthro_norm.apply(d.tensors.anthropometric));
  }

  BatchSampler sampler(labels, cfg.batch, cfg.seed ^ 0x5a3d1e);
  const auto params = model.parameters();
  std::vector<Tensor<float>> velocity;
  for (auto* p : params) velocity.emplace_back(p->value.shape());

  ForwardOptions fwd;
  fwd.training = true;
  result.loss.reserve(cfg.iterations);
  for (std::size_t it = 0; it < cfg.iterations; ++it) {
    const auto batch = sampler.next();
    std::vector<const GaitTensor*> bj, ba;
    std::vector<int> bl;
    for (std::size_t i : batch) {
      bj.push_back(&joints[i]);
      ba.push_back(&anthro[i]);
      bl.push_back(labels[i]);
    }
    Graph<float> g;
    const auto out = model.forward(g, stack_samples<float>(bj), stack_samples<float>(ba), fwd);
    const auto terms =
        fusion_loss(g, out.embedding, g.parameter(model.class_weights()), bl, loss_cfg, model.pyramid().size());
    const double loss = g.value(terms.total)[0];
    if (!std::isfinite(loss)) {
      std::string ids;
      for (std::size_t i : batch) ids += (ids.empty() ? "" : ",") + data[i].record.id;
      throw ProtocolError("non-finite loss at iteration " + std::to_string(it + 1) + "; batch: " + ids);
    }
    model.zero_grad();
    g.backward(terms.total);

    const auto lr = static_cast<float>(cfg.learning_rate_at(it));
    const auto mu = static_cast<float>(cfg.momentum);
    const auto wd = static_cast<float>(cfg.weight_decay);
    for (std::size_t k = 0; k < params.size(); ++k) {
      auto w = params[k]->value.values();
      const auto gr = params[k]->grad.values();
      auto v = velocity[k].values();
      for (std::size_t i = 0; i < w.size(); ++i) {
        v[i] = mu * v[i] + gr[i] + wd * w[i];
        w[i] -= lr * v[i];
      }
    }
    result.loss.push_back(loss);
    if (progress) progress(it + 1, loss);
  }
  result.checkpoint = snapshot(model, result.classes, provenance);
  return result;
}

}  // namespace skgait
