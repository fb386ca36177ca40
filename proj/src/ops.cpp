#include "skgait/ops.hpp"

#include <Eigen/Core>
#include <cmath>
#include <sstream>

namespace skgait::ops {

namespace {

template <typename Real>
using RowMat = Eigen::Matrix<Real, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename Real>
using MatMap = Eigen::Map<RowMat<Real>>;
template <typename Real>
using ConstMatMap = Eigen::Map<const RowMat<Real>>;

using Index = Eigen::Index;

inline Index ix(std::size_t v) { return static_cast<Index>(v); }

void expect_rank(const Shape& s, std::size_t rank, const char* what) {
  if (s.size() != rank) {
    std::ostringstream msg;
    msg << what << ": expected rank " << rank << ", got " << shape_string(s);
    throw ShapeError(msg.str());
  }
}

struct TemporalGeometry {
  std::size_t n, cin, t, v, cout, width, pad, stride, t_out;
};

template <typename Real>
void im2col(const Real* x, const TemporalGeometry& geo, Real* col) {
  const std::size_t row_len = geo.t_out * geo.v;
  for (std::size_t c = 0; c < geo.cin; ++c) {
    for (std::size_t d = 0; d < geo.width; ++d) {
      Real* row = col + (c * geo.width + d) * row_len;
      for (std::size_t tp = 0; tp < geo.t_out; ++tp) {
        const std::ptrdiff_t t = static_cast<std::ptrdiff_t>(tp * geo.stride + d) - static_cast<std::ptrdiff_t>(geo.pad);
        Real* dst = row + tp * geo.v;
        if (t < 0 || t >= static_cast<std::ptrdiff_t>(geo.t)) {
          std::fill(dst, dst + geo.v, Real(0));
        } else {
          const Real* src = x + (c * geo.t + static_cast<std::size_t>(t)) * geo.v;
          std::copy(src, src + geo.v, dst);
        }
      }
    }
  }
}

template <typename Real>
void col2im_add(const Real* col, const TemporalGeometry& geo, Real* dx) {
  const std::size_t row_len = geo.t_out * geo.v;
  for (std::size_t c = 0; c < geo.cin; ++c) {
    for (std::size_t d = 0; d < geo.width; ++d) {
      const Real* row = col + (c * geo.width + d) * row_len;
      for (std::size_t tp = 0; tp < geo.t_out; ++tp) {
        const std::ptrdiff_t t = static_cast<std::ptrdiff_t>(tp * geo.stride + d) - static_cast<std::ptrdiff_t>(geo.pad);
        if (t < 0 || t >= static_cast<std::ptrdiff_t>(geo.t)) continue;
        Real* dst = dx + (c * geo.t + static_cast<std::size_t>(t)) * geo.v;
        const Real* src = row + tp * geo.v;
        for (std::size_t i = 0; i < geo.v; ++i) dst[i] += src[i];
      }
    }
  }
}

// z_k = x Â_k for one sample, stacked as (K·C_in, T·V).
template <typename Real>
void aggregate(const Tensor<Real>& adjacency, const Real* xn, std::size_t cin, std::size_t t, Real* z) {
  const std::size_t k = adjacency.dim(0), v = adjacency.dim(1);
  const ConstMatMap<Real> xm(xn, ix(cin * t), ix(v));
  for (std::size_t kk = 0; kk < k; ++kk) {
    MatMap<Real>(z + kk * cin * t * v, ix(cin * t), ix(v)).noalias() =
        xm * ConstMatMap<Real>(adjacency.data() + kk * v * v, ix(v), ix(v));
  }
}

}  // namespace

template <typename Real>
Var spatial_graph_conv(Graph<Real>& g, Var x, const Tensor<Real>& adjacency, Var w) {
  const Tensor<Real>& X = g.value(x);
  const Tensor<Real>& W = g.value(w);
  expect_rank(X.shape(), 4, "spatial_graph_conv input");
  expect_rank(adjacency.shape(), 3, "spatial_graph_conv adjacency");
  expect_rank(W.shape(), 3, "spatial_graph_conv weight");
  const std::size_t n = X.dim(0), cin = X.dim(1), t = X.dim(2), v = X.dim(3);
  const std::size_t k = adjacency.dim(0), cout = W.dim(2);
  if (adjacency.dim(1) != v || adjacency.dim(2) != v)
    throw ShapeError("spatial_graph_conv: adjacency " + shape_string(adjacency.shape()) + " does not match V = " +
                     std::to_string(v));
  if (W.dim(0) != k || W.dim(1) != cin)
    throw ShapeError("spatial_graph_conv: weight " + shape_string(W.shape()) + " does not match K = " +
                     std::to_string(k) + ", C_in = " + std::to_string(cin));

  const std::size_t tv = t * v;
  Tensor<Real> out({n, cout, t, v});
  std::vector<Real> z(k * cin * tv);
  const ConstMatMap<Real> wm(W.data(), ix(k * cin), ix(cout));

  for (std::size_t b = 0; b < n; ++b) {
    aggregate(adjacency, X.data() + b * cin * tv, cin, t, z.data());
    MatMap<Real> yn(out.data() + b * cout * tv, ix(cout), ix(tv));
    yn.noalias() = wm.transpose() * ConstMatMap<Real>(z.data(), ix(k * cin), ix(tv));
  }

  return g.record(std::move(out), {x, w},
                  [x, w, adjacency, n, cin, cout, k, t, v, tv](Graph<Real>& gr, Var self) {
                    const Tensor<Real>& G = gr.grad(self);
                    const Tensor<Real>& Xv = gr.value(x);
                    const Tensor<Real>& Wv = gr.value(w);
                    const bool need_x = gr.requires_grad(x), need_w = gr.requires_grad(w);
                    Real* dw = need_w ? gr.grad_mut(w).data() : nullptr;
                    Real* dx = need_x ? gr.grad_mut(x).data() : nullptr;
                    const ConstMatMap<Real> wmat(Wv.data(), ix(k * cin), ix(cout));
                    std::vector<Real> zb(k * cin * tv), dz(k * cin * tv);
                    for (std::size_t b = 0; b < n; ++b) {
                      const ConstMatMap<Real> gn(G.data() + b * cout * tv, ix(cout), ix(tv));
                      if (need_w) {
                        aggregate(adjacency, Xv.data() + b * cin * tv, cin, t, zb.data());
                        MatMap<Real> dwm(dw, ix(k * cin), ix(cout));
                        dwm.noalias() += ConstMatMap<Real>(zb.data(), ix(k * cin), ix(tv)) * gn.transpose();
                      }
                      if (need_x) {
                        MatMap<Real>(dz.data(), ix(k * cin), ix(tv)).noalias() = wmat * gn;
                        MatMap<Real> dxn(dx + b * cin * tv, ix(cin * t), ix(v));
                        for (std::size_t kk = 0; kk < k; ++kk) {
                          dxn.noalias() += ConstMatMap<Real>(dz.data() + kk * cin * tv, ix(cin * t), ix(v)) *
                                           ConstMatMap<Real>(adjacency.data() + kk * v * v, ix(v), ix(v)).transpose();
                        }
                      }
                    }
                  });
}

template <typename Real>
Var temporal_conv(Graph<Real>& g, Var x, Var kernel, int stride) {
  const Tensor<Real>& X = g.value(x);
  const Tensor<Real>& K = g.value(kernel);
  expect_rank(X.shape(), 4, "temporal_conv input");
  expect_rank(K.shape(), 3, "temporal_conv kernel");
  if (stride < 1) throw ShapeError("temporal_conv: stride must be >= 1");
  TemporalGeometry geo{X.dim(0), X.dim(1), X.dim(2), X.dim(3), K.dim(0), K.dim(2), 0, static_cast<std::size_t>(stride), 0};
  if (K.dim(1) != geo.cin)
    throw ShapeError("temporal_conv: kernel " + shape_string(K.shape()) + " expects C_in = " + std::to_string(K.dim(1)) +
                     ", input has " + std::to_string(geo.cin));
  if (geo.width % 2 == 0) throw ShapeError("temporal_conv: kernel width must be odd");
  geo.pad = (geo.width - 1) / 2;
  if (geo.t + 2 * geo.pad < geo.width) throw ShapeError("temporal_conv: sequence shorter than kernel");
  geo.t_out = (geo.t + 2 * geo.pad - geo.width) / geo.stride + 1;

  const std::size_t in_step = geo.cin * geo.t * geo.v, out_step = geo.cout * geo.t_out * geo.v;
  const std::size_t col_rows = geo.cin * geo.width, col_cols = geo.t_out * geo.v;
  Tensor<Real> out({geo.n, geo.cout, geo.t_out, geo.v});
  std::vector<Real> col(col_rows * col_cols);
  const ConstMatMap<Real> km(K.data(), ix(geo.cout), ix(col_rows));
  for (std::size_t b = 0; b < geo.n; ++b) {
    im2col(X.data() + b * in_step, geo, col.data());
    MatMap<Real>(out.data() + b * out_step, ix(geo.cout), ix(col_cols)).noalias() =
        km * ConstMatMap<Real>(col.data(), ix(col_rows), ix(col_cols));
  }

  return g.record(std::move(out), {x, kernel}, [x, kernel, geo, in_step, out_step, col_rows, col_cols](Graph<Real>& gr, Var self) {
    const Tensor<Real>& G = gr.grad(self);
    const Tensor<Real>& Xv = gr.value(x);
    const Tensor<Real>& Kv = gr.value(kernel);
    const bool need_x = gr.requires_grad(x), need_k = gr.requires_grad(kernel);
    Real* dk = need_k ? gr.grad_mut(kernel).data() : nullptr;
    Real* dx = need_x ? gr.grad_mut(x).data() : nullptr;
    const ConstMatMap<Real> kmat(Kv.data(), ix(geo.cout), ix(col_rows));
    std::vector<Real> colb(col_rows * col_cols), dcol(col_rows * col_cols);
    for (std::size_t b = 0; b < geo.n; ++b) {
      const ConstMatMap<Real> gn(G.data() + b * out_step, ix(geo.cout), ix(col_cols));
      if (need_k) {
        im2col(Xv.data() + b * in_step, geo, colb.data());
        MatMap<Real>(dk, ix(geo.cout), ix(col_rows)).noalias() +=
            gn * ConstMatMap<Real>(colb.data(), ix(col_rows), ix(col_cols)).transpose();
      }
      if (need_x) {
        MatMap<Real>(dcol.data(), ix(col_rows), ix(col_cols)).noalias() = kmat.transpose() * gn;
        col2im_add(dcol.data(), geo, dx + b * in_step);
      }
    }
  });
}

template <typename Real>
Var batch_norm(Graph<Real>& g, Var x, Var gamma, Var beta, BatchNormState<Real>& state, const BatchNormOptions& opt) {
  const Tensor<Real>& X = g.value(x);
  if (X.rank() < 2) throw ShapeError("batch_norm needs (N, C, ...) input");
  const std::size_t n = X.dim(0), c = X.dim(1), inner = X.size() / (n * c);
  if (g.value(gamma).size() != c || g.value(beta).size() != c || state.running_mean.size() != c)
    throw ShapeError("batch_norm: parameter size does not match " + std::to_string(c) + " channels");
  const Tensor<Real>& gm = g.value(gamma);
  const Tensor<Real>& bt = g.value(beta);
  const std::size_t m = n * inner;

  std::vector<Real> inv(c);
  Tensor<Real> xhat(X.shape());
  Tensor<Real> out(X.shape());
  for (std::size_t ch = 0; ch < c; ++ch) {
    double mean, var;
    if (opt.use_batch_stats) {
      double s = 0.0;
      for (std::size_t b = 0; b < n; ++b) {
        const Real* p = X.data() + (b * c + ch) * inner;
        for (std::size_t i = 0; i < inner; ++i) s += p[i];
      }
      mean = s / static_cast<double>(m);
      double ss = 0.0;
      for (std::size_t b = 0; b < n; ++b) {
        const Real* p = X.data() + (b * c + ch) * inner;
        for (std::size_t i = 0; i < inner; ++i) ss += (p[i] - mean) * (p[i] - mean);
      }
      var = ss / static_cast<double>(m);
      if (opt.update_running) {
        const double unbiased = m > 1 ? var * static_cast<double>(m) / static_cast<double>(m - 1) : var;
        state.running_mean[ch] = static_cast<Real>((1.0 - opt.momentum) * state.running_mean[ch] + opt.momentum * mean);
        state.running_var[ch] = static_cast<Real>((1.0 - opt.momentum) * state.running_var[ch] + opt.momentum * unbiased);
      }
    } else {
      mean = state.running_mean[ch];
      var = state.running_var[ch];
    }
    const double iv = 1.0 / std::sqrt(var + opt.eps);
    inv[ch] = static_cast<Real>(iv);
    for (std::size_t b = 0; b < n; ++b) {
      const std::size_t off = (b * c + ch) * inner;
      for (std::size_t i = 0; i < inner; ++i) {
        const Real xh = static_cast<Real>((X[off + i] - mean) * iv);
        xhat[off + i] = xh;
        out[off + i] = gm[ch] * xh + bt[ch];
      }
    }
  }

  const bool batch_stats = opt.use_batch_stats;
  return g.record(std::move(out), {x, gamma, beta},
                  [x, gamma, beta, xhat = std::move(xhat), inv = std::move(inv), n, c, inner, m, batch_stats](
                      Graph<Real>& gr, Var self) {
                    const Tensor<Real>& G = gr.grad(self);
                    const Tensor<Real>& gmv = gr.value(gamma);
                    const bool need_x = gr.requires_grad(x);
                    Real* dgamma = gr.requires_grad(gamma) ? gr.grad_mut(gamma).data() : nullptr;
                    Real* dbeta = gr.requires_grad(beta) ? gr.grad_mut(beta).data() : nullptr;
                    Real* dx = need_x ? gr.grad_mut(x).data() : nullptr;
                    for (std::size_t ch = 0; ch < c; ++ch) {
                      double sum_g = 0.0, sum_gx = 0.0;
                      for (std::size_t b = 0; b < n; ++b) {
                        const std::size_t off = (b * c + ch) * inner;
                        for (std::size_t i = 0; i < inner; ++i) {
                          sum_g += G[off + i];
                          sum_gx += static_cast<double>(G[off + i]) * xhat[off + i];
                        }
                      }
                      if (dgamma) dgamma[ch] += static_cast<Real>(sum_gx);
                      if (dbeta) dbeta[ch] += static_cast<Real>(sum_g);
                      if (!need_x) continue;
                      const double scale = static_cast<double>(gmv[ch]) * inv[ch];
                      const double md = static_cast<double>(m);
                      for (std::size_t b = 0; b < n; ++b) {
                        const std::size_t off = (b * c + ch) * inner;
                        for (std::size_t i = 0; i < inner; ++i) {
                          if (batch_stats)
                            dx[off + i] += static_cast<Real>(scale / md * (md * G[off + i] - sum_g - xhat[off + i] * sum_gx));
                          else
                            dx[off + i] += static_cast<Real>(scale * G[off + i]);
                        }
                      }
                    }
                  });
}

template <typename Real>
Var relu(Graph<Real>& g, Var x) {
  const Tensor<Real>& X = g.value(x);
  Tensor<Real> out(X.shape());
  for (std::size_t i = 0; i < X.size(); ++i) out[i] = X[i] > Real(0) ? X[i] : Real(0);
  return g.record(std::move(out), {x}, [x](Graph<Real>& gr, Var self) {
    const Tensor<Real>& G = gr.grad(self);
    const Tensor<Real>& Xv = gr.value(x);
    Tensor<Real>& dx = gr.grad_mut(x);
    for (std::size_t i = 0; i < Xv.size(); ++i)
      if (Xv[i] > Real(0)) dx[i] += G[i];
  });
}

template <typename Real>
Var add(Graph<Real>& g, Var a, Var b) {
  return add_scaled(g, a, Real(1), b, Real(1));
}

template <typename Real>
Var add_scaled(Graph<Real>& g, Var a, Real wa, Var b, Real wb) {
  const Tensor<Real>& A = g.value(a);
  const Tensor<Real>& B = g.value(b);
  if (A.shape() != B.shape())
    throw ShapeError("add: shapes " + shape_string(A.shape()) + " and " + shape_string(B.shape()) + " differ");
  Tensor<Real> out(A.shape());
  for (std::size_t i = 0; i < A.size(); ++i) out[i] = wa * A[i] + wb * B[i];
  return g.record(std::move(out), {a, b}, [a, b, wa, wb](Graph<Real>& gr, Var self) {
    const Tensor<Real>& G = gr.grad(self);
    if (gr.requires_grad(a)) {
      Tensor<Real>& da = gr.grad_mut(a);
      for (std::size_t i = 0; i < G.size(); ++i) da[i] += wa * G[i];
    }
    if (gr.requires_grad(b)) {
      Tensor<Real>& db = gr.grad_mut(b);
      for (std::size_t i = 0; i < G.size(); ++i) db[i] += wb * G[i];
    }
  });
}

template <typename Real>
Var slice_batch(Graph<Real>& g, Var x, std::size_t begin, std::size_t end) {
  const Tensor<Real>& X = g.value(x);
  if (begin >= end || end > X.dim(0))
    throw ShapeError("slice_batch: [" + std::to_string(begin) + ", " + std::to_string(end) + ") outside batch of " +
                     std::to_string(X.dim(0)));
  Shape s = X.shape();
  s[0] = end - begin;
  const std::size_t row = X.size() / X.dim(0);
  Tensor<Real> out(s, std::vector<Real>(X.data() + begin * row, X.data() + end * row));
  return g.record(std::move(out), {x}, [x, begin, row](Graph<Real>& gr, Var self) {
    const Tensor<Real>& G = gr.grad(self);
    Tensor<Real>& dx = gr.grad_mut(x);
    for (std::size_t i = 0; i < G.size(); ++i) dx[begin * row + i] += G[i];
  });
}

template <typename Real>
Var concat_channels(Graph<Real>& g, const std::vector<Var>& parts) {
  if (parts.empty()) throw ShapeError("concat_channels: nothing to concatenate");
  const Shape& first = g.value(parts.front()).shape();
  if (first.size() < 2) throw ShapeError("concat_channels needs rank >= 2");
  const std::size_t n = first[0];
  std::size_t inner = 1;
  for (std::size_t i = 2; i < first.size(); ++i) inner *= first[i];

  std::vector<std::size_t> channels;
  std::size_t total = 0;
  for (Var p : parts) {
    const Shape& s = g.value(p).shape();
    bool ok = s.size() == first.size() && s[0] == n;
    for (std::size_t i = 2; ok && i < s.size(); ++i) ok = s[i] == first[i];
    if (!ok) throw ShapeError("concat_channels: " + shape_string(s) + " incompatible with " + shape_string(first));
    channels.push_back(s[1]);
    total += s[1];
  }
  Shape out_shape = first;
  out_shape[1] = total;
  Tensor<Real> out(out_shape);
  std::size_t offset = 0;
  for (std::size_t p = 0; p < parts.size(); ++p) {
    const Tensor<Real>& src = g.value(parts[p]);
    const std::size_t block = channels[p] * inner;
    for (std::size_t b = 0; b < n; ++b)
      std::copy(src.data() + b * block, src.data() + (b + 1) * block, out.data() + (b * total + offset) * inner);
    offset += channels[p];
  }
  return g.record(std::move(out), parts, [parts, channels, n, total, inner](Graph<Real>& gr, Var self) {
    const Tensor<Real>& G = gr.grad(self);
    std::size_t off = 0;
    for (std::size_t p = 0; p < parts.size(); ++p) {
      const std::size_t block = channels[p] * inner;
      if (gr.requires_grad(parts[p])) {
        Tensor<Real>& d = gr.grad_mut(parts[p]);
        for (std::size_t b = 0; b < n; ++b) {
          const Real* src = G.data() + (b * total + off) * inner;
          Real* dst = d.data() + b * block;
          for (std::size_t i = 0; i < block; ++i) dst[i] += src[i];
        }
      }
      off += channels[p];
    }
  });
}

template <typename Real>
Var concat_channels(Graph<Real>& g, Var a, Var b) {
  return concat_channels(g, std::vector<Var>{a, b});
}

template <typename Real>
Var sum_squares(Graph<Real>& g, Var x) {
  const Tensor<Real>& X = g.value(x);
  Real s = 0;
  for (std::size_t i = 0; i < X.size(); ++i) s += X[i] * X[i];
  return g.record(Tensor<Real>({1}, s), {x}, [x](Graph<Real>& gr, Var self) {
    const Real gs = gr.grad(self)[0];
    const Tensor<Real>& Xv = gr.value(x);
    Tensor<Real>& dx = gr.grad_mut(x);
    for (std::size_t i = 0; i < Xv.size(); ++i) dx[i] += Real(2) * Xv[i] * gs;
  });
}

#define SKGAIT_INSTANTIATE_OPS(R)                                                                        \
  template Var spatial_graph_conv<R>(Graph<R>&, Var, const Tensor<R>&, Var);                             \
  template Var temporal_conv<R>(Graph<R>&, Var, Var, int);                                               \
  template Var batch_norm<R>(Graph<R>&, Var, Var, Var, BatchNormState<R>&, const BatchNormOptions&);     \
  template Var relu<R>(Graph<R>&, Var);                                                                  \
  template Var add<R>(Graph<R>&, Var, Var);                                                              \
  template Var add_scaled<R>(Graph<R>&, Var, R, Var, R);                                                 \
  template Var slice_batch<R>(Graph<R>&, Var, std::size_t, std::size_t);                                 \
  template Var concat_channels<R>(Graph<R>&, const std::vector<Var>&);                                   \
  template Var concat_channels<R>(Graph<R>&, Var, Var);                                                  \
  template Var sum_squares<R>(Graph<R>&, Var);

SKGAIT_INSTANTIATE_OPS(float)
SKGAIT_INSTANTIATE_OPS(double)

}  // namespace skgait::ops

namespace skgait {

std::string shape_string(const Shape& s) {
  std::string out = "(";
  for (std::size_t i = 0; i < s.size(); ++i) out += (i ? ", " : "") + std::to_string(s[i]);
  return out + ")";
}

}  // namespace skgait
