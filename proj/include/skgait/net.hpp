#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <memory>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "skgait/autograd.hpp"
#include "skgait/graph.hpp"
#include "skgait/ops.hpp"

namespace skgait {

// Owns parameters and batch-norm statistics with stable addresses, in
// registration order (which is also checkpoint order).
template <typename Real>
class ParameterStore {
 public:
  Parameter<Real>& add(std::string name, Tensor<Real> init) {
    params_.emplace_back(std::move(name), std::move(init));
    return params_.back();
  }
  ops::BatchNormState<Real>& add_batch_norm(std::string name, std::size_t channels) {
    bn_.emplace_back(std::move(name), ops::BatchNormState<Real>(channels));
    return bn_.back().second;
  }

  std::vector<Parameter<Real>*> parameters() {
    std::vector<Parameter<Real>*> out;
    for (auto& p : params_) out.push_back(&p);
    return out;
  }
  std::vector<const Parameter<Real>*> parameters() const {
    std::vector<const Parameter<Real>*> out;
    for (const auto& p : params_) out.push_back(&p);
    return out;
  }
  // Non-trainable state: "<bn>.running_mean", "<bn>.running_var".
  std::vector<std::pair<std::string, Tensor<Real>*>> buffers() {
    std::vector<std::pair<std::string, Tensor<Real>*>> out;
    for (auto& [name, st] : bn_) {
      out.emplace_back(name + ".running_mean", &st.running_mean);
      out.emplace_back(name + ".running_var", &st.running_var);
    }
    return out;
  }
  Parameter<Real>* find(const std::string& name) {
    for (auto& p : params_)
      if (p.name == name) return &p;
    return nullptr;
  }
  void zero_grad() {
    for (auto& p : params_) p.zero_grad();
  }

 private:
  std::deque<Parameter<Real>> params_;
  std::deque<std::pair<std::string, ops::BatchNormState<Real>>> bn_;
};

struct BlockSpec {
  std::size_t in = 3;
  std::size_t out = 32;
  int stride = 1;
  bool residual = true;
  friend bool operator==(const BlockSpec&, const BlockSpec&) = default;
};

struct BackboneConfig {
  std::vector<BlockSpec> blocks = default_blocks();
  int temporal_kernel = 9;
  double alpha = kAdjacencyAlpha;
  double bn_momentum = 0.1;
  double bn_eps = 1e-5;

  static std::vector<BlockSpec> default_blocks();
  std::size_t output_channels() const { return blocks.empty() ? 3 : blocks.back().out; }
  std::size_t output_frames(std::size_t t_in) const;
  void validate() const;
};

struct ForwardOptions {
  bool training = false;
  // Normalize with running statistics even while training.
  bool freeze_bn = false;

  ops::BatchNormOptions bn(double momentum, double eps) const {
    const bool batch = training && !freeze_bn;
    return {batch, batch, momentum, eps};
  }
};

// Spatial graph conv -> BN -> ReLU -> temporal conv -> BN, plus a residual
// (identity, or strided 1-wide conv + BN when the shape changes), then ReLU.
template <typename Real>
class STGCNBlock {
 public:
  STGCNBlock(ParameterStore<Real>& store, const std::string& prefix, const BlockSpec& spec, int temporal_kernel,
             std::mt19937_64& rng);

  Var forward(Graph<Real>& g, Var x, const Tensor<Real>& adjacency, const ForwardOptions& opt, double momentum,
              double eps) const;
  const BlockSpec& spec() const { return spec_; }

 private:
  BlockSpec spec_;
  Parameter<Real>* spatial_;
  Parameter<Real>* bn1_gamma_;
  Parameter<Real>* bn1_beta_;
  ops::BatchNormState<Real>* bn1_;
  Parameter<Real>* temporal_;
  Parameter<Real>* bn2_gamma_;
  Parameter<Real>* bn2_beta_;
  ops::BatchNormState<Real>* bn2_;
  Parameter<Real>* res_kernel_ = nullptr;
  Parameter<Real>* res_gamma_ = nullptr;
  Parameter<Real>* res_beta_ = nullptr;
  ops::BatchNormState<Real>* res_bn_ = nullptr;
};

// Two-stream ST-GCN whose streams run through one block list. Both streams
// are stacked into a single batch [f_J; f_A], so they share parameters and
// normalization statistics by construction.
template <typename Real>
class SiameseSTGCN {
 public:
  SiameseSTGCN(ParameterStore<Real>& store, const BackboneConfig& cfg, const NormalizedAdjacency& adjacency,
               std::mt19937_64& rng);

  struct Streams {
    Var joints;          // F_Jst (N, C, T', V)
    Var anthropometric;  // F_Ast
  };
  Streams forward(Graph<Real>& g, const Tensor<Real>& f_joints, const Tensor<Real>& f_anthro,
                  const ForwardOptions& opt) const;
  // Runs the shared blocks on any (N, 3, T, V) batch.
  Var run_blocks(Graph<Real>& g, Var x, const ForwardOptions& opt) const;

  const BackboneConfig& config() const { return cfg_; }
  const Tensor<Real>& adjacency() const { return adjacency_; }

 private:
  BackboneConfig cfg_;
  Tensor<Real> adjacency_;
  std::vector<STGCNBlock<Real>> blocks_;
};

// F_Sst = concat(F_Jst, F_Ast) along channels, real stream first.
template <typename Real>
Var concat_features(Graph<Real>& g, Var f_joints, Var f_anthro) {
  return ops::concat_channels(g, f_joints, f_anthro);
}

// Stacks (3, T, V) samples into (N, 3, T, V) in the requested precision.
template <typename Real>
Tensor<Real> stack_samples(const std::vector<const GaitTensor*>& samples);

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::string worst_parameter;
  std::size_t worst_index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  std::size_t checked = 0;
  std::size_t kinks = 0;  // entries whose central difference straddles a kink
};

inline constexpr double kGradCheckFloor = 1e-6;
inline constexpr double kKinkTolerance = 1e-2;

// Compares analytic gradients of the scalar built by `loss` against central
// differences for every entry of every parameter in `wrt`. Relative error is
// |a − n| / max(|a|, |n|, floor). Where the two one-sided differences
// disagree by more than kKinkTolerance the step crossed a kink, and the
// closer one-sided difference is used instead.
GradCheckReport grad_check(const std::function<Var(Graph<double>&)>& loss, const std::vector<Parameter<double>*>& wrt,
                           double eps = 1e-5, double floor = kGradCheckFloor);

}  // namespace skgait
