#include "skgait/graph.hpp"

#include <cmath>
#include <queue>

#include "skgait/error.hpp"

namespace skgait {

GaitGraph GaitGraph::skeleton() {
  GaitGraph g;
  for (int c = 1; c < kJoints; ++c) g.edges.emplace_back(kParentOf[static_cast<std::size_t>(c)], c);
  return g;
}

std::vector<int> GaitGraph::hops_from_center() const {
  std::vector<std::vector<int>> nbr(static_cast<std::size_t>(num_nodes));
  for (auto [a, b] : edges) {
    if (a < 0 || b < 0 || a >= num_nodes || b >= num_nodes) throw ShapeError("graph edge out of range");
    nbr[static_cast<std::size_t>(a)].push_back(b);
    nbr[static_cast<std::size_t>(b)].push_back(a);
  }
  std::vector<int> hops(static_cast<std::size_t>(num_nodes), -1);
  std::queue<int> q;
  hops[static_cast<std::size_t>(center)] = 0;
  q.push(center);
  while (!q.empty()) {
    const int u = q.front();
    q.pop();
    for (int w : nbr[static_cast<std::size_t>(u)]) {
      if (hops[static_cast<std::size_t>(w)] < 0) {
        hops[static_cast<std::size_t>(w)] = hops[static_cast<std::size_t>(u)] + 1;
        q.push(w);
      }
    }
  }
  for (int h : hops)
    if (h < 0) throw ShapeError("gait graph is not connected");
  return hops;
}

AdjacencyStack build_adjacency(const GaitGraph& g) {
  const auto v = static_cast<std::size_t>(g.num_nodes);
  const std::vector<int> hops = g.hops_from_center();
  AdjacencyStack s{Tensor<double>({kPartitions, v, v})};
  for (std::size_t i = 0; i < v; ++i) s.a.at(0, i, i) = 1.0;
  for (auto [p, c] : g.edges) {
    for (auto [i, j] : {std::pair{p, c}, std::pair{c, p}}) {
      const auto ui = static_cast<std::size_t>(i), uj = static_cast<std::size_t>(j);
      const std::size_t k = hops[uj] < hops[ui] ? 1 : 2;
      s.a.at(k, ui, uj) = 1.0;
    }
  }
  return s;
}

NormalizedAdjacency normalize(const AdjacencyStack& a, double alpha) {
  if (!(alpha > 0.0)) throw ShapeError("adjacency alpha must be > 0");
  const std::size_t k = a.partitions(), v = a.nodes();
  NormalizedAdjacency out{Tensor<double>({k, v, v}), alpha};
  std::vector<double> d(v);
  for (std::size_t kk = 0; kk < k; ++kk) {
    for (std::size_t i = 0; i < v; ++i) {
      double row = 0.0;
      for (std::size_t j = 0; j < v; ++j) row += a.a.at(kk, i, j);
      d[i] = 1.0 / std::sqrt(row + alpha);
    }
    for (std::size_t i = 0; i < v; ++i)
      for (std::size_t j = 0; j < v; ++j) out.a.at(kk, i, j) = d[i] * a.a.at(kk, i, j) * d[j];
  }
  return out;
}

GaitTensor resample_time(const GaitTensor& x, std::size_t t_out) {
  if (x.rank() != 3) throw ShapeError("resample_time expects (C, T, V)");
  const std::size_t c = x.dim(0), f = x.dim(1), v = x.dim(2);
  if (f < 2 || t_out < 2) throw ShapeError("resampling needs at least 2 input and 2 output frames");
  GaitTensor out({c, t_out, v});
  for (std::size_t i = 0; i < t_out; ++i) {
    const double u = static_cast<double>(i) * static_cast<double>(f - 1) / static_cast<double>(t_out - 1);
    const auto lo = std::min(static_cast<std::size_t>(std::floor(u)), f - 1);
    const double frac = u - static_cast<double>(lo);
    for (std::size_t ch = 0; ch < c; ++ch) {
      for (std::size_t j = 0; j < v; ++j) {
        const double a = x.at(ch, lo, j);
        out.at(ch, i, j) = frac == 0.0 ? a : a + frac * (x.at(ch, lo + 1, j) - a);
      }
    }
  }
  return out;
}

StreamTensors sequence_to_tensors(std::span<const DualSkeleton> frames, std::size_t t_out) {
  if (frames.size() < 2) throw ShapeError("a gait sequence needs at least 2 usable frames, got " + std::to_string(frames.size()));
  const std::size_t f = frames.size();
  GaitTensor real({3, f, kJoints}), pseudo({3, f, kJoints});
  for (std::size_t t = 0; t < f; ++t) {
    const Vec3 root = frames[t].real[0];
    for (std::size_t j = 0; j < kJoints; ++j) {
      const Vec3 centred = frames[t].real[j] - root;
      for (int ch = 0; ch < 3; ++ch) {
        real.at(static_cast<std::size_t>(ch), t, j) = centred[ch];
        pseudo.at(static_cast<std::size_t>(ch), t, j) = frames[t].pseudo[j][ch];
      }
    }
  }
  return {resample_time(real, t_out), resample_time(pseudo, t_out)};
}

Standardizer::Standardizer() : mean({3, kJoints}, 0.0), scale({3, kJoints}, 1.0) {}

Standardizer Standardizer::fit(std::span<const GaitTensor> samples) {
  Standardizer s;
  if (samples.empty()) return s;
  const std::size_t v = samples.front().dim(2);
  s.mean = Tensor<double>({3, v});
  s.scale = Tensor<double>({3, v}, 1.0);
  for (std::size_t ch = 0; ch < 3; ++ch) {
    for (std::size_t j = 0; j < v; ++j) {
      double sum = 0.0, sq = 0.0, n = 0.0;
      for (const auto& x : samples) {
        for (std::size_t t = 0; t < x.dim(1); ++t) {
          const double val = x.at(ch, t, j);
          sum += val;
          sq += val * val;
          n += 1.0;
        }
      }
      const double m = sum / n;
      const double var = std::max(sq / n - m * m, 0.0);
      s.mean.at(ch, j) = m;
      // Constant features (e.g. the centred root) are only shifted.
      s.scale.at(ch, j) = var > 1e-12 ? 1.0 / std::sqrt(var) : 1.0;
    }
  }
  return s;
}

GaitTensor Standardizer::apply(const GaitTensor& x) const {
  GaitTensor out(x.shape());
  for (std::size_t ch = 0; ch < x.dim(0); ++ch)
    for (std::size_t t = 0; t < x.dim(1); ++t)
      for (std::size_t j = 0; j < x.dim(2); ++j) out.at(ch, t, j) = (x.at(ch, t, j) - mean.at(ch, j)) * scale.at(ch, j);
  return out;
}

}  // namespace skgait
