#pragma once

#include <vector>

#include "skgait/autograd.hpp"

namespace skgait::ops {

// Σ_k W_k (x Â_k): x (N, C_in, T, V), adjacency (K, V, V), w (K, C_in, C_out)
// -> (N, C_out, T, V).
template <typename Real>
Var spatial_graph_conv(Graph<Real>& g, Var x, const Tensor<Real>& adjacency, Var w);

// Convolution along time with symmetric zero padding (width − 1) / 2.
// x (N, C_in, T, V), kernel (C_out, C_in, width) -> (N, C_out, T', V) with
// T' = (T + 2·pad − width) / stride + 1.
template <typename Real>
Var temporal_conv(Graph<Real>& g, Var x, Var kernel, int stride = 1);

template <typename Real>
struct BatchNormState {
  Tensor<Real> running_mean;
  Tensor<Real> running_var;
  explicit BatchNormState(std::size_t channels = 1)
      : running_mean({channels}, Real(0)), running_var({channels}, Real(1)) {}
};

struct BatchNormOptions {
  bool use_batch_stats = true;  // false: normalize with the running statistics
  bool update_running = true;   // only meaningful with batch stats
  double momentum = 0.1;
  double eps = 1e-5;
};

// Per-channel normalization over every axis except 1. x is (N, C, ...).
template <typename Real>
Var batch_norm(Graph<Real>& g, Var x, Var gamma, Var beta, BatchNormState<Real>& state, const BatchNormOptions& opt);

template <typename Real>
Var relu(Graph<Real>& g, Var x);

template <typename Real>
Var add(Graph<Real>& g, Var a, Var b);

// a·wa + b·wb, same shapes.
template <typename Real>
Var add_scaled(Graph<Real>& g, Var a, Real wa, Var b, Real wb);

// Rows [begin, end) of the leading axis.
template <typename Real>
Var slice_batch(Graph<Real>& g, Var x, std::size_t begin, std::size_t end);

// Concatenation along axis 1: (N, Ca, ...) + (N, Cb, ...) -> (N, Ca + Cb, ...).
template <typename Real>
Var concat_channels(Graph<Real>& g, Var a, Var b);

template <typename Real>
Var concat_channels(Graph<Real>& g, const std::vector<Var>& parts);

// Σ x², a scalar.
template <typename Real>
Var sum_squares(Graph<Real>& g, Var x);

}  // namespace skgait::ops
