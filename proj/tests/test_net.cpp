#include <cstring>

#include "doctest.h"
#include "oracles.hpp"
#include "skgait/model.hpp"
#include "skgait/net.hpp"
#include "skgait/ops.hpp"

using namespace skgait;

namespace {

Tensor<double> randn(const Shape& s, std::mt19937_64& rng, double sd = 1.0) {
  std::normal_distribution<double> n(0.0, sd);
  Tensor<double> t(s);
  for (auto& v : t.storage()) v = n(rng);
  return t;
}

}  // namespace

TEST_CASE("autograd: sum of squares, detach, misuse") {
  std::mt19937_64 rng(20);
  Parameter<double> p("p", randn({4, 3}, rng));
  {
    Graph<double> g;
    g.backward(ops::sum_squares(g, g.parameter(p)));
    for (std::size_t i = 0; i < p.value.size(); ++i) CHECK(p.grad[i] == doctest::Approx(2 * p.value[i]));
  }
  p.zero_grad();
  {
    Graph<double> g;
    Var x = g.parameter(p);
    g.backward(ops::add(g, ops::sum_squares(g, g.detach(x)), ops::sum_squares(g, g.constant(p.value))));
    for (std::size_t i = 0; i < p.grad.size(); ++i) CHECK(p.grad[i] == 0.0);
  }
  Graph<double> g;
  CHECK_THROWS_AS(g.backward(Var{}), GraphStateError);
  Var l = ops::sum_squares(g, g.parameter(p));
  g.backward(l);
  CHECK_THROWS_AS(g.backward(l), GraphStateError);
  Graph<double> inf(GradMode::inference);
  CHECK_THROWS_AS(inf.backward(ops::sum_squares(inf, inf.parameter(p))), GraphStateError);
  Graph<double> shape;
  CHECK_THROWS_AS(shape.backward(shape.parameter(p)), GraphStateError);
}

TEST_CASE("spatial_graph_conv: zero, single node, linearity, dense oracle") {
  std::mt19937_64 rng(21);
  const Tensor<double> adj = normalize(build_adjacency()).as<double>();
  const auto w = randn({3, 4, 5}, rng);
  Graph<double> g;
  const auto zero = g.value(ops::spatial_graph_conv(g, g.constant(Tensor<double>({2, 4, 3, 16})), adj, g.constant(w)));
  for (double v : zero.values()) CHECK(v == 0.0);

  // One vertex, one partition, A = [1], W = I.
  const auto x1 = randn({2, 3, 4, 1}, rng);
  Tensor<double> eye({1, 3, 3});
  for (std::size_t i = 0; i < 3; ++i) eye.at(0, i, i) = 1.0;
  CHECK(g.value(ops::spatial_graph_conv(g, g.constant(x1), Tensor<double>({1, 1, 1}, 1.0), g.constant(eye))) == x1);

  const auto x = randn({2, 4, 3, 16}, rng);
  auto scaled = x;
  for (auto& v : scaled.storage()) v *= 3.5;
  const auto y = g.value(ops::spatial_graph_conv(g, g.constant(x), adj, g.constant(w)));
  const auto ys = g.value(ops::spatial_graph_conv(g, g.constant(scaled), adj, g.constant(w)));
  for (std::size_t i = 0; i < y.size(); ++i) CHECK(ys[i] == doctest::Approx(3.5 * y[i]).epsilon(1e-9));

  for (std::size_t n = 0; n < 2; ++n)
    for (std::size_t co = 0; co < 5; ++co)
      for (std::size_t t = 0; t < 3; ++t)
        for (std::size_t v = 0; v < 16; ++v) {
          double want = 0.0;
          for (std::size_t k = 0; k < 3; ++k)
            for (std::size_t ci = 0; ci < 4; ++ci)
              for (std::size_t u = 0; u < 16; ++u) want += w.at(k, ci, co) * x.at(n, ci, t, u) * adj.at(k, u, v);
          CHECK(y.at(n, co, t, v) == doctest::Approx(want).epsilon(1e-12));
        }
}

TEST_CASE("temporal_conv: identity, averaging, sliding-window oracle") {
  std::mt19937_64 rng(22);
  Graph<double> g;
  const auto x = randn({2, 3, 9, 4}, rng);
  Tensor<double> id({3, 3, 1});
  for (std::size_t i = 0; i < 3; ++i) id.at(i, i, 0) = 1.0;
  CHECK(g.value(ops::temporal_conv(g, g.constant(x), g.constant(id))) == x);

  const Tensor<double> c({1, 1, 10, 2}, 4.0);
  const auto avg = g.value(ops::temporal_conv(g, g.constant(c), g.constant(Tensor<double>({1, 1, 3}, 1.0 / 3.0))));
  for (std::size_t t = 1; t < 9; ++t) CHECK(avg.at(0, 0, t, 1) == doctest::Approx(4.0));

  const auto k = randn({5, 3, 5}, rng);
  for (int stride : {1, 2}) {
    const auto y = g.value(ops::temporal_conv(g, g.constant(x), g.constant(k), stride));
    const std::size_t t_out = (9 + 4 - 5) / stride + 1;
    REQUIRE(y.shape() == Shape{2, 5, t_out, 4});
    for (std::size_t n = 0; n < 2; ++n)
      for (std::size_t co = 0; co < 5; ++co)
        for (std::size_t t = 0; t < t_out; ++t)
          for (std::size_t v = 0; v < 4; ++v) {
            double want = 0.0;
            for (std::size_t ci = 0; ci < 3; ++ci)
              for (std::size_t d = 0; d < 5; ++d) {
                const long src = long(t) * stride + long(d) - 2;
                if (src >= 0 && src < 9) want += k.at(co, ci, d) * x.at(n, ci, std::size_t(src), v);
              }
            CHECK(y.at(n, co, t, v) == doctest::Approx(want).epsilon(1e-12));
          }
  }
  CHECK_THROWS_AS(ops::temporal_conv(g, g.constant(x), g.constant(Tensor<double>({3, 3, 2}))), ShapeError);
}

TEST_CASE("concat and slice keep order") {
  Graph<double> g;
  const Tensor<double> a({2, 3, 4}, 1.0), b({2, 5, 4}, 2.0);
  const auto c = g.value(ops::concat_channels(g, g.constant(a), g.constant(b)));
  REQUIRE(c.shape() == Shape{2, 8, 4});
  CHECK(c.at(1, 2, 3) == 1.0);
  CHECK(c.at(1, 3, 0) == 2.0);
  const Tensor<double> s({4, 2}, std::vector<double>{1, 2, 3, 4, 5, 6, 7, 8});
  CHECK(g.value(ops::slice_batch(g, g.constant(s), 1, 3)) == Tensor<double>({2, 2}, std::vector<double>{3, 4, 5, 6}));
}

TEST_CASE("batch_norm: normalizes with batch statistics and updates running stats") {
  std::mt19937_64 rng(23);
  auto x = randn({4, 2, 5, 3}, rng, 3.0);
  Graph<double> g;
  ops::BatchNormState<double> st(2);
  const Tensor<double> gamma({2}, 1.0), beta({2}, 0.0);
  const auto y = g.value(ops::batch_norm(g, g.constant(x), g.constant(gamma), g.constant(beta), st, {}));
  for (std::size_t c = 0; c < 2; ++c) {
    double s = 0, q = 0;
    for (std::size_t n = 0; n < 4; ++n)
      for (std::size_t i = 0; i < 15; ++i) {
        const double v = y[(n * 2 + c) * 15 + i];
        s += v;
        q += v * v;
      }
    CHECK(std::abs(s / 60) < 1e-12);
    CHECK(q / 60 == doctest::Approx(1.0).epsilon(1e-4));
  }
  CHECK(st.running_mean[0] != 0.0);
}

TEST_CASE("siamese: identical streams, zero input") {
  std::mt19937_64 rng(24);
  BackboneConfig cfg;
  cfg.blocks = {{3, 4, 1, false}, {4, 4, 1, true}};
  ParameterStore<double> store;
  const SiameseSTGCN<double> net(store, cfg, normalize(build_adjacency()), rng);
  const auto x = randn({3, 3, 6, 16}, rng);
  Graph<double> g;
  // Fresh running statistics (0, 1) and zero shifts keep a zero input at zero.
  const auto z = net.forward(g, Tensor<double>({1, 3, 6, 16}), Tensor<double>({1, 3, 6, 16}), {.training = false});
  for (double v : g.value(z.joints).values()) CHECK(v == 0.0);
  const auto s = net.forward(g, x, x, {.training = true});
  CHECK(g.value(s.joints) == g.value(s.anthropometric));
  CHECK_THROWS_AS(net.forward(g, x, randn({3, 3, 5, 16}, rng), {}), ShapeError);
}

TEST_CASE("siamese: two-block net matches a hand-composed oracle") {
  std::mt19937_64 rng(25);
  BackboneConfig cfg;
  cfg.blocks = {{3, 2, 1, false}, {2, 2, 1, true}};
  cfg.temporal_kernel = 3;
  ParameterStore<double> store;
  const NormalizedAdjacency adj = normalize(build_adjacency());
  const SiameseSTGCN<double> net(store, cfg, adj, rng);
  const auto x = randn({1, 3, 4, 16}, rng);
  Graph<double> g;
  const auto out = g.value(net.forward(g, x, x, {.training = false}).joints);

  // Running statistics are (0, 1), gamma 1, beta 0: batch norm divides by sqrt(1 + eps).
  const double bn = 1.0 / std::sqrt(1.0 + cfg.bn_eps);
  auto gcn = [&](const std::vector<double>& in, std::size_t cin, const Tensor<double>& w) {
    const std::size_t cout = w.dim(2);
    std::vector<double> o(cout * 4 * 16, 0.0);
    for (std::size_t co = 0; co < cout; ++co)
      for (std::size_t t = 0; t < 4; ++t)
        for (std::size_t v = 0; v < 16; ++v)
          for (std::size_t k = 0; k < 3; ++k)
            for (std::size_t ci = 0; ci < cin; ++ci)
              for (std::size_t u = 0; u < 16; ++u)
                o[(co * 4 + t) * 16 + v] += w.at(k, ci, co) * in[(ci * 4 + t) * 16 + u] * adj.a.at(k, u, v);
    return o;
  };
  auto tcn = [&](const std::vector<double>& in, const Tensor<double>& k) {
    std::vector<double> o(in.size(), 0.0);
    for (std::size_t co = 0; co < 2; ++co)
      for (std::size_t t = 0; t < 4; ++t)
        for (std::size_t v = 0; v < 16; ++v)
          for (std::size_t ci = 0; ci < 2; ++ci)
            for (std::size_t d = 0; d < 3; ++d) {
              const long s = long(t) + long(d) - 1;
              if (s >= 0 && s < 4) o[(co * 4 + t) * 16 + v] += k.at(co, ci, d) * in[(ci * 4 + std::size_t(s)) * 16 + v];
            }
    return o;
  };
  auto relu = [](double v) { return v > 0 ? v : 0.0; };
  std::vector<double> h(x.values().begin(), x.values().end());
  for (int b = 0; b < 2; ++b) {
    const std::string p = "block" + std::to_string(b);
    auto y = gcn(h, b == 0 ? 3 : 2, store.find(p + ".gcn.weight")->value);
    for (auto& v : y) v = relu(v * bn);
    y = tcn(y, store.find(p + ".tcn.weight")->value);
    for (std::size_t i = 0; i < y.size(); ++i) y[i] = relu(y[i] * bn + (b == 1 ? h[i] : 0.0));
    h = y;
  }
  REQUIRE(out.size() == h.size());
  for (std::size_t i = 0; i < h.size(); ++i) CHECK(out[i] == doctest::Approx(h[i]).epsilon(1e-12));
}

TEST_CASE("parameter counts") {
  std::mt19937_64 rng(26);
  ParameterStore<double> store;
  BackboneConfig cfg;
  cfg.blocks = {{3, 32, 1, false}};
  SiameseSTGCN<double> one(store, cfg, normalize(build_adjacency()), rng);
  CHECK(store.find("block0.gcn.weight")->value.size() == 288);

  auto spatial = [](std::size_t scale) {
    BackboneConfig c;
    std::size_t n = 0;
    for (auto& b : c.blocks) n += 3 * (b.in == 3 ? 3 : b.in * scale) * b.out * scale;
    return n;
  };
  CHECK(double(spatial(2)) / double(spatial(1)) == doctest::Approx(4.0).epsilon(0.05));

  const GaitModel<float> model(ModelConfig{}, 1);
  const double m = double(model.count_parameters()) / 1e6;
  CHECK(m >= 0.42);
  CHECK(m <= 0.62);
}

TEST_CASE("grad_check on ops") {
  std::mt19937_64 rng(27);
  const Tensor<double> adj = normalize(build_adjacency()).as<double>();
  Parameter<double> x("x", randn({2, 3, 4, 16}, rng)), w("w", randn({3, 3, 2}, rng));
  const auto r = grad_check([&](Graph<double>& g) {
    return ops::sum_squares(g, ops::spatial_graph_conv(g, g.parameter(x), adj, g.parameter(w)));
  }, {&x, &w});
  CHECK(r.max_rel_error < 1e-4);
  CHECK(r.checked == x.value.size() + w.value.size());

  Parameter<double> xt("x", randn({2, 2, 6, 3}, rng)), k("k", randn({3, 2, 3}, rng));
  CHECK(grad_check([&](Graph<double>& g) {
          return ops::sum_squares(g, ops::temporal_conv(g, g.parameter(xt), g.parameter(k), 2));
        }, {&xt, &k}).max_rel_error < 1e-4);

  Parameter<double> xb("x", randn({3, 2, 4, 2}, rng)), gm("g", randn({2}, rng)), bt("b", randn({2}, rng));
  ops::BatchNormState<double> st(2);
  const auto weights = randn({3, 2, 4, 2}, rng);
  CHECK(grad_check([&](Graph<double>& g) {
          Var y = ops::batch_norm(g, g.parameter(xb), g.parameter(gm), g.parameter(bt), st, {});
          return ops::sum_squares(g, ops::add(g, y, g.constant(weights)));
        }, {&xb, &gm, &bt}).max_rel_error < 1e-4);
}
