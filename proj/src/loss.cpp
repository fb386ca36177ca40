#include "skgait/loss.hpp"

#include <cmath>
#include <numbers>

#include "skgait/error.hpp"
#include "skgait/jrpm.hpp"
#include "skgait/ops.hpp"

namespace skgait {

void FusionLossConfig::validate() const {
  if (!(lambda >= 0.0 && lambda <= 1.0)) throw ConfigError("loss lambda must be in [0, 1]");
  if (!(triplet.margin > 0.0)) throw ConfigError("triplet margin must be > 0");
  if (!(arcface.scale > 0.0)) throw ConfigError("arcface scale must be > 0");
  if (!(arcface.margin >= 0.0 && arcface.margin < std::numbers::pi / 2))
    throw ConfigError("arcface margin must be in [0, pi/2)");
}

namespace ops {

template <typename Real>
Var batch_hard_triplet(Graph<Real>& g, Var emb, const std::vector<int>& labels, Real margin) {
  const Tensor<Real>& E = g.value(emb);
  if (E.rank() != 2 || E.dim(0) != labels.size())
    throw ShapeError("batch_hard_triplet: embeddings " + shape_string(E.shape()) + " vs " +
                     std::to_string(labels.size()) + " labels");
  const std::size_t n = E.dim(0), e = E.dim(1);
  std::vector<Real> dist(n * n, Real(0));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      Real s = 0;
      for (std::size_t k = 0; k < e; ++k) {
        const Real d = E[i * e + k] - E[j * e + k];
        s += d * d;
      }
      dist[i * n + j] = std::sqrt(s);
    }
  }

  struct Active {
    std::size_t anchor, pos, neg;
  };
  std::vector<Active> active;
  std::size_t valid = 0;
  Real total = 0;
  for (std::size_t a = 0; a < n; ++a) {
    std::ptrdiff_t hp = -1, hn = -1;
    for (std::size_t j = 0; j < n; ++j) {
      if (j == a) continue;
      const Real d = dist[a * n + j];
      if (labels[j] == labels[a]) {
        if (hp < 0 || d > dist[a * n + static_cast<std::size_t>(hp)]) hp = static_cast<std::ptrdiff_t>(j);
      } else if (hn < 0 || d < dist[a * n + static_cast<std::size_t>(hn)]) {
        hn = static_cast<std::ptrdiff_t>(j);
      }
    }
    if (hp < 0 || hn < 0) continue;
    ++valid;
    const Real hinge = (margin + dist[a * n + static_cast<std::size_t>(hp)]) - dist[a * n + static_cast<std::size_t>(hn)];
    if (hinge > Real(0)) {
      total += hinge;
      active.push_back({a, static_cast<std::size_t>(hp), static_cast<std::size_t>(hn)});
    }
  }
  if (valid == 0) throw LossError("batch_hard_triplet: no anchor has both a positive and a negative");
  const Real loss = total / static_cast<Real>(valid);

  return g.record(Tensor<Real>({1}, loss), {emb},
                  [emb, active = std::move(active), dist = std::move(dist), n, e, valid](Graph<Real>& gr, Var self) {
                    const Real gs = gr.grad(self)[0] / static_cast<Real>(valid);
                    const Tensor<Real>& Ev = gr.value(emb);
                    Tensor<Real>& de = gr.grad_mut(emb);
                    // d|x_a − x_b| / dx_a = (x_a − x_b) / |x_a − x_b|, zero at coincidence.
                    auto pull = [&](std::size_t a, std::size_t b, Real sign) {
                      const Real d = dist[a * n + b];
                      if (!(d > Real(0))) return;
                      for (std::size_t k = 0; k < e; ++k) {
                        const Real gk = sign * gs * (Ev[a * e + k] - Ev[b * e + k]) / d;
                        de[a * e + k] += gk;
                        de[b * e + k] -= gk;
                      }
                    };
                    for (const auto& t : active) {
                      pull(t.anchor, t.pos, Real(1));
                      pull(t.anchor, t.neg, Real(-1));
                    }
                  });
}

template <typename Real>
Var arcface(Graph<Real>& g, Var emb, Var class_weights, const std::vector<int>& labels, Real scale, Real margin) {
  const Tensor<Real>& E = g.value(emb);
  const Tensor<Real>& W = g.value(class_weights);
  if (E.rank() != 2 || W.rank() != 2 || W.dim(1) != E.dim(1) || labels.size() != E.dim(0))
    throw ShapeError("arcface: embeddings " + shape_string(E.shape()) + ", class weights " + shape_string(W.shape()));
  const std::size_t n = E.dim(0), e = E.dim(1), nc = W.dim(0);
  for (int y : labels)
    if (y < 0 || static_cast<std::size_t>(y) >= nc) throw LossError("arcface: label outside class-weight range");

  auto normalize_rows = [e](const Tensor<Real>& m, std::vector<double>& unit, std::vector<double>& norms,
                            const char* what) {
    const std::size_t rows = m.dim(0);
    unit.assign(rows * e, 0.0);
    norms.assign(rows, 0.0);
    for (std::size_t r = 0; r < rows; ++r) {
      double s = 0.0;
      for (std::size_t k = 0; k < e; ++k) s += static_cast<double>(m[r * e + k]) * m[r * e + k];
      const double nr = std::sqrt(s);
      if (!(nr > 0.0)) throw LossError(std::string("arcface: degenerate (zero-norm) ") + what);
      norms[r] = nr;
      for (std::size_t k = 0; k < e; ++k) unit[r * e + k] = m[r * e + k] / nr;
    }
  };
  std::vector<double> eu, en, wu, wn;
  normalize_rows(E, eu, en, "embedding");
  normalize_rows(W, wu, wn, "class weight");

  const double s = scale, cm = std::cos(static_cast<double>(margin)), sm = std::sin(static_cast<double>(margin));
  const double lo = -1.0 + kArcfaceCosClamp, hi = 1.0 - kArcfaceCosClamp;
  // dlogit/dcos per (i, c), zero where the cosine was clamped.
  std::vector<double> dlogit_dcos(n * nc), prob(n * nc);
  double total = 0.0;
  std::vector<double> logits(nc);
  for (std::size_t i = 0; i < n; ++i) {
    const auto y = static_cast<std::size_t>(labels[i]);
    for (std::size_t c = 0; c < nc; ++c) {
      double cosv = 0.0;
      for (std::size_t k = 0; k < e; ++k) cosv += eu[i * e + k] * wu[c * e + k];
      const bool clamped = cosv < lo || cosv > hi;
      cosv = std::clamp(cosv, lo, hi);
      if (c == y) {
        const double sinv = std::sqrt(1.0 - cosv * cosv);
        logits[c] = s * (cosv * cm - sinv * sm);
        dlogit_dcos[i * nc + c] = clamped ? 0.0 : s * (cm + cosv * sm / sinv);
      } else {
        logits[c] = s * cosv;
        dlogit_dcos[i * nc + c] = clamped ? 0.0 : s;
      }
    }
    double mx = logits[0];
    for (double l : logits) mx = std::max(mx, l);
    double z = 0.0;
    for (double l : logits) z += std::exp(l - mx);
    const double lse = mx + std::log(z);
    total += lse - logits[y];
    for (std::size_t c = 0; c < nc; ++c) prob[i * nc + c] = std::exp(logits[c] - lse);
  }
  const double loss = total / static_cast<double>(n);

  return g.record(
      Tensor<Real>({1}, static_cast<Real>(loss)), {emb, class_weights},
      [emb, class_weights, labels, n, e, nc, eu = std::move(eu), en = std::move(en), wu = std::move(wu),
       wn = std::move(wn), dlogit_dcos = std::move(dlogit_dcos), prob = std::move(prob)](Graph<Real>& gr, Var self) {
        const double gs = static_cast<double>(gr.grad(self)[0]) / static_cast<double>(n);
        std::vector<double> deu(n * e, 0.0), dwu(nc * e, 0.0);
        for (std::size_t i = 0; i < n; ++i) {
          for (std::size_t c = 0; c < nc; ++c) {
            const double dl = gs * (prob[i * nc + c] - (static_cast<std::size_t>(labels[i]) == c ? 1.0 : 0.0));
            const double dc = dl * dlogit_dcos[i * nc + c];
            if (dc == 0.0) continue;
            for (std::size_t k = 0; k < e; ++k) {
              deu[i * e + k] += dc * wu[c * e + k];
              dwu[c * e + k] += dc * eu[i * e + k];
            }
          }
        }
        // u = v / |v|  =>  dv = (du − u <u, du>) / |v|
        auto back_normalize = [e](const std::vector<double>& unit, const std::vector<double>& norms,
                                  const std::vector<double>& du, Tensor<Real>& dv) {
          for (std::size_t r = 0; r < norms.size(); ++r) {
            double proj = 0.0;
            for (std::size_t k = 0; k < e; ++k) proj += unit[r * e + k] * du[r * e + k];
            for (std::size_t k = 0; k < e; ++k)
              dv[r * e + k] += static_cast<Real>((du[r * e + k] - unit[r * e + k] * proj) / norms[r]);
          }
        };
        if (gr.requires_grad(emb)) back_normalize(eu, en, deu, gr.grad_mut(emb));
        if (gr.requires_grad(class_weights)) back_normalize(wu, wn, dwu, gr.grad_mut(class_weights));
      });
}

}  // namespace ops

template <typename Real>
FusionLossTerms fusion_loss(Graph<Real>& g, Var emb, Var class_weights, const std::vector<int>& labels,
                            const FusionLossConfig& cfg, std::size_t groups) {
  cfg.validate();
  const auto margin = static_cast<Real>(cfg.triplet.margin);
  Var tri;
  if (cfg.triplet.per_group && groups > 1) {
    const std::size_t width = g.value(emb).dim(1) / groups;
    for (std::size_t k = 0; k < groups; ++k) {
      Var part = ops::batch_hard_triplet(g, ops::slice_columns(g, emb, k * width, (k + 1) * width), labels, margin);
      tri = tri.valid() ? ops::add(g, tri, part) : part;
    }
    tri = ops::add_scaled(g, tri, Real(1) / static_cast<Real>(groups), tri, Real(0));
  } else {
    tri = ops::batch_hard_triplet(g, emb, labels, margin);
  }
  Var arc = ops::arcface(g, emb, class_weights, labels, static_cast<Real>(cfg.arcface.scale),
                         static_cast<Real>(cfg.arcface.margin));
  const auto lambda = static_cast<Real>(cfg.lambda);
  Var total = ops::add_scaled(g, tri, lambda, arc, Real(1) - lambda);
  return {tri, arc, total};
}

#define SKGAIT_INSTANTIATE_LOSS(R)                                                                           \
  template Var ops::batch_hard_triplet<R>(Graph<R>&, Var, const std::vector<int>&, R);                       \
  template Var ops::arcface<R>(Graph<R>&, Var, Var, const std::vector<int>&, R, R);                          \
  template FusionLossTerms fusion_loss<R>(Graph<R>&, Var, Var, const std::vector<int>&, const FusionLossConfig&, \
                                          std::size_t);

SKGAIT_INSTANTIATE_LOSS(float)
SKGAIT_INSTANTIATE_LOSS(double)

}  // namespace skgait
