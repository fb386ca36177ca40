#include "skgait/jrpm.hpp"

#include <algorithm>
#include <set>

#include "skgait/error.hpp"

namespace skgait {

PyramidSpec PyramidSpec::standard() {
  auto j = [](Joint joint) { return idx(joint); };
  PyramidSpec s;
  std::vector<int> all(kJoints);
  for (int i = 0; i < kJoints; ++i) all[static_cast<std::size_t>(i)] = i;
  s.groups.push_back({1, "whole", all});
  s.groups.push_back({2, "upper",
                      {j(Joint::spine_navel), j(Joint::neck), j(Joint::l_shoulder), j(Joint::l_elbow), j(Joint::l_wrist),
                       j(Joint::r_shoulder), j(Joint::r_elbow), j(Joint::r_wrist), j(Joint::head)}});
  s.groups.push_back({2, "lower",
                      {j(Joint::pelvis), j(Joint::l_hip), j(Joint::l_knee), j(Joint::l_ankle), j(Joint::r_hip),
                       j(Joint::r_knee), j(Joint::r_ankle)}});
  s.groups.push_back({3, "larm_rleg",
                      {j(Joint::l_shoulder), j(Joint::l_elbow), j(Joint::l_wrist), j(Joint::r_hip), j(Joint::r_knee),
                       j(Joint::r_ankle)}});
  s.groups.push_back({3, "rarm_lleg",
                      {j(Joint::r_shoulder), j(Joint::r_elbow), j(Joint::r_wrist), j(Joint::l_hip), j(Joint::l_knee),
                       j(Joint::l_ankle)}});
  s.validate();
  return s;
}

void PyramidSpec::validate() const {
  const std::set<int> limbs{idx(Joint::l_shoulder), idx(Joint::l_elbow), idx(Joint::l_wrist), idx(Joint::r_shoulder),
                            idx(Joint::r_elbow),    idx(Joint::r_wrist), idx(Joint::l_hip),   idx(Joint::l_knee),
                            idx(Joint::l_ankle),    idx(Joint::r_hip),   idx(Joint::r_knee),  idx(Joint::r_ankle)};
  for (int scale = 1; scale <= 3; ++scale) {
    std::vector<int> seen;
    bool any = false;
    for (const auto& grp : groups) {
      if (grp.scale < 1 || grp.scale > 3) throw ShapeError("pyramid scale must be 1..3");
      if (grp.scale != scale) continue;
      any = true;
      if (grp.joints.empty()) throw ShapeError("pyramid group '" + grp.name + "' is empty");
      for (int v : grp.joints) {
        if (v < 0 || v >= kJoints) throw ShapeError("pyramid group '" + grp.name + "' has joint out of range");
        seen.push_back(v);
      }
    }
    if (!any) throw ShapeError("pyramid scale " + std::to_string(scale) + " has no groups");
    std::sort(seen.begin(), seen.end());
    if (std::adjacent_find(seen.begin(), seen.end()) != seen.end())
      throw ShapeError("pyramid scale " + std::to_string(scale) + " groups overlap");
    if (scale < 3 && seen.size() != kJoints)
      throw ShapeError("pyramid scale " + std::to_string(scale) + " does not cover all 16 joints");
    if (scale == 3 && std::set<int>(seen.begin(), seen.end()) != limbs)
      throw ShapeError("pyramid scale 3 must cover exactly the 12 limb joints");
  }
}

namespace ops {

template <typename Real>
Var gather_joints(Graph<Real>& g, Var x, const std::vector<int>& joints) {
  const Tensor<Real>& X = g.value(x);
  if (X.rank() != 4) throw ShapeError("gather_joints expects (N, C, T, V)");
  const std::size_t n = X.dim(0), c = X.dim(1), t = X.dim(2), v = X.dim(3), jn = joints.size();
  for (int j : joints)
    if (j < 0 || static_cast<std::size_t>(j) >= v) throw ShapeError("gather_joints: joint index out of range");
  Tensor<Real> out({n, c, t, jn});
  const std::size_t rows = n * c * t;
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t k = 0; k < jn; ++k) out[r * jn + k] = X[r * v + static_cast<std::size_t>(joints[k])];
  return g.record(std::move(out), {x}, [x, joints, rows, v, jn](Graph<Real>& gr, Var self) {
    const Tensor<Real>& G = gr.grad(self);
    Tensor<Real>& dx = gr.grad_mut(x);
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t k = 0; k < jn; ++k) dx[r * v + static_cast<std::size_t>(joints[k])] += G[r * jn + k];
  });
}

template <typename Real>
Var weighted_pool(Graph<Real>& g, Var x, Var kernel) {
  const Tensor<Real>& X = g.value(x);
  const Tensor<Real>& K = g.value(kernel);
  if (X.rank() != 4 || K.rank() != 2 || K.dim(0) != X.dim(2) || K.dim(1) != X.dim(3))
    throw ShapeError("weighted_pool: kernel " + shape_string(K.shape()) + " does not match local feature " +
                     shape_string(X.shape()));
  const std::size_t rows = X.dim(0) * X.dim(1), extent = K.size();
  Tensor<Real> out({X.dim(0), X.dim(1)});
  for (std::size_t r = 0; r < rows; ++r) {
    Real s = 0;
    const Real* p = X.data() + r * extent;
    for (std::size_t i = 0; i < extent; ++i) s += p[i] * K[i];
    out[r] = s;
  }
  return g.record(std::move(out), {x, kernel}, [x, kernel, rows, extent](Graph<Real>& gr, Var self) {
    const Tensor<Real>& G = gr.grad(self);
    const Tensor<Real>& Xv = gr.value(x);
    const Tensor<Real>& Kv = gr.value(kernel);
    if (gr.requires_grad(x)) {
      Tensor<Real>& dx = gr.grad_mut(x);
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t i = 0; i < extent; ++i) dx[r * extent + i] += G[r] * Kv[i];
    }
    if (gr.requires_grad(kernel)) {
      Tensor<Real>& dk = gr.grad_mut(kernel);
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t i = 0; i < extent; ++i) dk[i] += G[r] * Xv[r * extent + i];
    }
  });
}

template <typename Real>
Var linear(Graph<Real>& g, Var x, Var w, Var b) {
  const Tensor<Real>& X = g.value(x);
  const Tensor<Real>& W = g.value(w);
  const Tensor<Real>& B = g.value(b);
  if (X.rank() != 2 || W.rank() != 2 || W.dim(0) != X.dim(1) || B.size() != W.dim(1))
    throw ShapeError("linear: input " + shape_string(X.shape()) + " weight " + shape_string(W.shape()) + " bias " +
                     shape_string(B.shape()));
  const std::size_t n = X.dim(0), c = X.dim(1), d = W.dim(1);
  Tensor<Real> out({n, d});
  for (std::size_t i = 0; i < n; ++i) {
    Real* y = out.data() + i * d;
    for (std::size_t o = 0; o < d; ++o) y[o] = B[o];
    for (std::size_t k = 0; k < c; ++k) {
      const Real xv = X[i * c + k];
      const Real* wr = W.data() + k * d;
      for (std::size_t o = 0; o < d; ++o) y[o] += xv * wr[o];
    }
  }
  return g.record(std::move(out), {x, w, b}, [x, w, b, n, c, d](Graph<Real>& gr, Var self) {
    const Tensor<Real>& G = gr.grad(self);
    const Tensor<Real>& Xv = gr.value(x);
    const Tensor<Real>& Wv = gr.value(w);
    if (gr.requires_grad(b)) {
      Tensor<Real>& db = gr.grad_mut(b);
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t o = 0; o < d; ++o) db[o] += G[i * d + o];
    }
    if (gr.requires_grad(w)) {
      Tensor<Real>& dw = gr.grad_mut(w);
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t k = 0; k < c; ++k) {
          const Real xv = Xv[i * c + k];
          for (std::size_t o = 0; o < d; ++o) dw[k * d + o] += xv * G[i * d + o];
        }
    }
    if (gr.requires_grad(x)) {
      Tensor<Real>& dx = gr.grad_mut(x);
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t k = 0; k < c; ++k) {
          Real s = 0;
          for (std::size_t o = 0; o < d; ++o) s += Wv[k * d + o] * G[i * d + o];
          dx[i * c + k] += s;
        }
    }
  });
}

template <typename Real>
Var slice_columns(Graph<Real>& g, Var x, std::size_t begin, std::size_t end) {
  const Tensor<Real>& X = g.value(x);
  if (X.rank() != 2 || begin >= end || end > X.dim(1)) throw ShapeError("slice_columns: bad range");
  const std::size_t n = X.dim(0), e = X.dim(1), w = end - begin;
  Tensor<Real> out({n, w});
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t k = 0; k < w; ++k) out[i * w + k] = X[i * e + begin + k];
  return g.record(std::move(out), {x}, [x, begin, n, e, w](Graph<Real>& gr, Var self) {
    const Tensor<Real>& G = gr.grad(self);
    Tensor<Real>& dx = gr.grad_mut(x);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t k = 0; k < w; ++k) dx[i * e + begin + k] += G[i * w + k];
  });
}

}  // namespace ops

template <typename Real>
std::vector<Var> split(Graph<Real>& g, Var fsst, const PyramidSpec& spec) {
  if (g.value(fsst).rank() != 4 || g.value(fsst).dim(3) != kJoints)
    throw ShapeError("split expects F_Sst with 16 vertices, got " + shape_string(g.value(fsst).shape()));
  std::vector<Var> out;
  for (const auto& grp : spec.groups) out.push_back(ops::gather_joints(g, fsst, grp.joints));
  return out;
}

#define SKGAIT_INSTANTIATE_JRPM(R)                                                   \
  template Var ops::gather_joints<R>(Graph<R>&, Var, const std::vector<int>&);       \
  template Var ops::weighted_pool<R>(Graph<R>&, Var, Var);                           \
  template Var ops::linear<R>(Graph<R>&, Var, Var, Var);                             \
  template Var ops::slice_columns<R>(Graph<R>&, Var, std::size_t, std::size_t);      \
  template std::vector<Var> split<R>(Graph<R>&, Var, const PyramidSpec&);

SKGAIT_INSTANTIATE_JRPM(float)
SKGAIT_INSTANTIATE_JRPM(double)

}  // namespace skgait
