#pragma once

#include <string>
#include <vector>

#include "skgait/autograd.hpp"

namespace skgait {

// N embeddings with their labels; the unit exchanged between the network,
// the losses and the evaluation protocol.
struct EmbeddingBatch {
  Tensor<double> embeddings;  // (N, E)
  std::vector<int> identity;
  std::vector<std::string> subject;
  std::vector<std::string> condition;
  std::vector<std::string> view;
  std::vector<std::string> sequence;

  std::size_t size() const { return identity.size(); }
};

struct TripletConfig {
  double margin = 0.2;
  // Average the loss over each group's slice instead of using the full
  // concatenated embedding.
  bool per_group = false;
};

struct ArcfaceConfig {
  double scale = 30.0;
  double margin = 0.5;  // radians
};

struct FusionLossConfig {
  double lambda = 0.9;
  TripletConfig triplet;
  ArcfaceConfig arcface;

  void validate() const;
};

inline constexpr double kArcfaceCosClamp = 1e-7;

namespace ops {

// Batch-hard triplet: per anchor, the farthest same-identity sample and the
// nearest other-identity sample; mean over anchors of max(0, margin + d_p − d_n).
// Anchors lacking a positive or a negative are left out of the mean.
// emb (N, E) -> scalar.
template <typename Real>
Var batch_hard_triplet(Graph<Real>& g, Var emb, const std::vector<int>& labels, Real margin);

// Additive angular margin softmax. Embeddings and class weights are L2
// normalized; the true class logit is s·cos(θ + m), others s·cos θ.
// emb (N, E), class_weights (n_classes, E) -> mean cross-entropy.
template <typename Real>
Var arcface(Graph<Real>& g, Var emb, Var class_weights, const std::vector<int>& labels, Real scale, Real margin);

}  // namespace ops

// λ·triplet + (1 − λ)·arcface on a (N, E) embedding.
struct FusionLossTerms {
  Var triplet;
  Var arcface;
  Var total;
};

template <typename Real>
FusionLossTerms fusion_loss(Graph<Real>& g, Var emb, Var class_weights, const std::vector<int>& labels,
                            const FusionLossConfig& cfg, std::size_t groups = 1);

}  // namespace skgait
