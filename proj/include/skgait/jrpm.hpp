#pragma once

#include <string>
#include <vector>

#include "skgait/autograd.hpp"
#include "skgait/skeleton.hpp"

namespace skgait {

struct PyramidGroup {
  int scale = 1;
  std::string name;
  std::vector<int> joints;  // Skeleton16 indices, ascending
};

// Physiological joint groups over three scales, in embedding order:
// [whole body; upper; lower; left arm + right leg; right arm + left leg].
struct PyramidSpec {
  std::vector<PyramidGroup> groups;

  static PyramidSpec standard();
  // Scales 1 and 2 must each partition all 16 joints; scale 3 groups must be
  // disjoint and cover exactly the 12 limb joints.
  void validate() const;
  std::size_t size() const { return groups.size(); }
};

inline constexpr std::size_t kDefaultEmbeddingPerGroup = 128;

namespace ops {

// x (N, C, T, V) -> (N, C, T, J) keeping the listed vertices in order.
template <typename Real>
Var gather_joints(Graph<Real>& g, Var x, const std::vector<int>& joints);

// One learned weighted sum over the whole joint×time extent, shared by all
// channels: x (N, C, T, J), kernel (T, J) -> (N, C).
template <typename Real>
Var weighted_pool(Graph<Real>& g, Var x, Var kernel);

// x (N, C) · w (C, D) + b (D) -> (N, D).
template <typename Real>
Var linear(Graph<Real>& g, Var x, Var w, Var b);

// Columns [begin, end) of a (N, E) matrix.
template <typename Real>
Var slice_columns(Graph<Real>& g, Var x, std::size_t begin, std::size_t end);

}  // namespace ops

// Splits F_Sst into one local feature per pyramid group.
template <typename Real>
std::vector<Var> split(Graph<Real>& g, Var fsst, const PyramidSpec& spec);

}  // namespace skgait
