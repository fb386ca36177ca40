#pragma once

#include <span>
#include <utility>
#include <vector>

#include "skgait/skeleton.hpp"
#include "skgait/tensor.hpp"

namespace skgait {

inline constexpr double kAdjacencyAlpha = 0.001;
inline constexpr int kPartitions = 3;
inline constexpr int kDefaultFrames = 60;

// Undirected tree over V vertices with a designated centre of gravity.
struct GaitGraph {
  int num_nodes = kJoints;
  int center = idx(Joint::pelvis);
  std::vector<std::pair<int, int>> edges;  // (parent, child)

  // The 16-joint bone tree.
  static GaitGraph skeleton();

  // Hop distance from the centre for every vertex; throws if disconnected.
  std::vector<int> hops_from_center() const;
};

// K = 3 binary V×V matrices, stored (K, V, V). A_k(i, j) = 1 iff vertex j
// belongs to subset k of vertex i: k = 0 itself, k = 1 neighbours closer to
// the centre (centripetal), k = 2 neighbours farther (centrifugal).
struct AdjacencyStack {
  Tensor<double> a;
  std::size_t partitions() const { return a.dim(0); }
  std::size_t nodes() const { return a.dim(1); }
};

// Λ_k^{-1/2} A_k Λ_k^{-1/2} with Λ_k^{ii} = Σ_j A_k^{ij} + α, stored (K, V, V).
struct NormalizedAdjacency {
  Tensor<double> a;
  double alpha = kAdjacencyAlpha;

  std::size_t partitions() const { return a.dim(0); }
  std::size_t nodes() const { return a.dim(1); }
  template <typename Real>
  Tensor<Real> as() const {
    return a.cast<Real>();
  }
};

AdjacencyStack build_adjacency(const GaitGraph& g = GaitGraph::skeleton());
NormalizedAdjacency normalize(const AdjacencyStack& a, double alpha = kAdjacencyAlpha);

// Channels-first spatio-temporal signal (3, T, 16).
using GaitTensor = Tensor<double>;

struct StreamTensors {
  GaitTensor joints;       // pelvis-centred real skeleton
  GaitTensor anthropometric;  // pseudo skeleton
};

// Linear resampling of a (C, F, V) signal to (C, t_out, V). First and last
// frames are kept exactly.
GaitTensor resample_time(const GaitTensor& x, std::size_t t_out);

// Builds both stream tensors and resamples them to t_out frames.
StreamTensors sequence_to_tensors(std::span<const DualSkeleton> frames, std::size_t t_out = kDefaultFrames);

// Per (channel, vertex) affine standardization of one stream, estimated on
// training data. Default-constructed is the identity.
struct Standardizer {
  Tensor<double> mean;  // (3, 16)
  Tensor<double> scale; // (3, 16), multiplied after subtracting mean

  Standardizer();
  static Standardizer fit(std::span<const GaitTensor> samples);
  GaitTensor apply(const GaitTensor& x) const;
};

}  // namespace skgait
