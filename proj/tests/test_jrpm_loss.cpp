#include "doctest.h"
#include "oracles.hpp"
#include "skgait/jrpm.hpp"
#include "skgait/loss.hpp"
#include "skgait/net.hpp"

using namespace skgait;

namespace {

Tensor<double> randn(const Shape& s, std::mt19937_64& rng, double sd = 1.0) {
  std::normal_distribution<double> n(0.0, sd);
  Tensor<double> t(s);
  for (auto& v : t.storage()) v = n(rng);
  return t;
}

}  // namespace

TEST_CASE("pyramid: hand-listed groups and validation") {
  const PyramidSpec s = PyramidSpec::standard();
  REQUIRE(s.size() == 5);
  CHECK(s.groups[0].joints.size() == 16);
  CHECK(s.groups[1].joints == std::vector<int>{1, 2, 3, 4, 5, 6, 7, 8, 15});
  CHECK(s.groups[2].joints == std::vector<int>{0, 9, 10, 11, 12, 13, 14});
  CHECK(s.groups[3].joints == std::vector<int>{3, 4, 5, 12, 13, 14});
  CHECK(s.groups[4].joints == std::vector<int>{6, 7, 8, 9, 10, 11});

  PyramidSpec overlap = s;
  overlap.groups[2].joints.push_back(1);
  CHECK_THROWS(overlap.validate());
  PyramidSpec trunk = s;
  trunk.groups[3].joints.push_back(0);
  CHECK_THROWS(trunk.validate());
}

TEST_CASE("split: whole-body slice is the input, scale-2 covers every column once") {
  std::mt19937_64 rng(30);
  const auto x = randn({2, 3, 4, 16}, rng);
  const PyramidSpec spec = PyramidSpec::standard();
  Graph<double> g;
  const auto parts = split(g, g.constant(x), spec);
  CHECK(g.value(parts[0]) == x);
  std::vector<int> seen(16, 0);
  for (int p : {1, 2}) {
    const auto& js = spec.groups[std::size_t(p)].joints;
    for (std::size_t jj = 0; jj < js.size(); ++jj) {
      ++seen[js[jj]];
      CHECK(g.value(parts[p]).at(1, 2, 3, jj) == x.at(1, 2, 3, std::size_t(js[jj])));
    }
  }
  CHECK(std::all_of(seen.begin(), seen.end(), [](int c) { return c == 1; }));
}

TEST_CASE("weighted_pool: averaging kernel, constant input, double-sum oracle") {
  std::mt19937_64 rng(31);
  Graph<double> g;
  const Tensor<double> c({2, 3, 4, 5}, 2.0);
  const auto k = randn({4, 5}, rng);
  double ksum = 0;
  for (double v : k.values()) ksum += v;
  const auto pc = g.value(ops::weighted_pool(g, g.constant(c), g.constant(k)));
  for (double v : pc.values()) CHECK(v == doctest::Approx(2.0 * ksum));

  const auto x = randn({2, 3, 4, 5}, rng);
  const auto p = g.value(ops::weighted_pool(g, g.constant(x), g.constant(k)));
  for (std::size_t n = 0; n < 2; ++n)
    for (std::size_t ch = 0; ch < 3; ++ch) {
      double want = 0.0;
      for (std::size_t t = 0; t < 4; ++t)
        for (std::size_t j = 0; j < 5; ++j) want += k.at(t, j) * x.at(n, ch, t, j);
      CHECK(p.at(n, ch) == doctest::Approx(want).epsilon(1e-12));
    }
}

TEST_CASE("linear: zero input and gradient through pool + project") {
  std::mt19937_64 rng(32);
  Graph<double> g;
  const auto w = randn({3, 4}, rng);
  const auto z = g.value(ops::linear(g, g.constant(Tensor<double>({2, 3})), g.constant(w), g.constant(Tensor<double>({4}))));
  for (double v : z.values()) CHECK(v == 0.0);

  Parameter<double> x("x", randn({2, 3, 4, 5}, rng)), k("k", randn({4, 5}, rng)), pw("w", randn({3, 2}, rng)),
      pb("b", randn({2}, rng));
  const auto r = grad_check([&](Graph<double>& gr) {
    return ops::sum_squares(gr, ops::linear(gr, ops::weighted_pool(gr, gr.parameter(x), gr.parameter(k)),
                                            gr.parameter(pw), gr.parameter(pb)));
  }, {&x, &k, &pw, &pb});
  CHECK(r.max_rel_error < 1e-4);
}

TEST_CASE("batch-hard triplet: separated, collapsed, exhaustive oracle, errors") {
  Graph<double> g;
  const Tensor<double> sep({4, 1}, std::vector<double>{0, 0, 10, 10});
  CHECK(g.value(ops::batch_hard_triplet(g, g.constant(sep), {0, 0, 1, 1}, 0.2))[0] == 0.0);
  const Tensor<double> same({4, 3}, 1.5);
  CHECK(g.value(ops::batch_hard_triplet(g, g.constant(same), {0, 0, 1, 1}, 0.2))[0] == doctest::Approx(0.2));

  std::mt19937_64 rng(33);
  for (int i = 0; i < 20; ++i) {
    const auto e = randn({8, 4}, rng, 0.1);
    const std::vector<int> labels{0, 0, 1, 1, 2, 2, 3, 3};
    CHECK(g.value(ops::batch_hard_triplet(g, g.constant(e), labels, 0.2))[0] ==
          oracle::triplet_exhaustive(e, labels, 0.2));
  }
  CHECK_THROWS_AS(ops::batch_hard_triplet(g, g.constant(same), {0, 1, 2, 3}, 0.2), LossError);
  CHECK_THROWS_AS(ops::batch_hard_triplet(g, g.constant(same), {0, 0, 1}, 0.2), ShapeError);
}

TEST_CASE("arcface: closed form, rescaling, angle-space oracle") {
  Graph<double> g;
  const Tensor<double> e({1, 2}, std::vector<double>{3, 0});
  const Tensor<double> w({2, 2}, std::vector<double>{1, 0, 0, 1});
  CHECK(g.value(ops::arcface(g, g.constant(e), g.constant(w), {0}, 1.0, 0.0))[0] ==
        doctest::Approx(-std::log(std::exp(1.0) / (std::exp(1.0) + 1.0))));

  std::mt19937_64 rng(34);
  const auto x = randn({6, 4}, rng);
  const auto cw = randn({3, 4}, rng);
  const std::vector<int> labels{0, 1, 2, 2, 1, 0};
  auto x7 = x;
  for (auto& v : x7.storage()) v *= 7.0;
  const double a = g.value(ops::arcface(g, g.constant(x), g.constant(cw), labels, 30.0, 0.5))[0];
  CHECK(g.value(ops::arcface(g, g.constant(x7), g.constant(cw), labels, 30.0, 0.5))[0] == doctest::Approx(a).epsilon(1e-12));

  double want = 0.0;
  for (std::size_t i = 0; i < 6; ++i) {
    std::vector<double> logit(3);
    for (std::size_t c = 0; c < 3; ++c) {
      double dot = 0, nx = 0, nw = 0;
      for (std::size_t k = 0; k < 4; ++k) {
        dot += x.at(i, k) * cw.at(c, k);
        nx += x.at(i, k) * x.at(i, k);
        nw += cw.at(c, k) * cw.at(c, k);
      }
      const double theta = std::acos(dot / std::sqrt(nx * nw));
      logit[c] = 30.0 * std::cos(theta + (int(c) == labels[i] ? 0.5 : 0.0));
    }
    double z = 0;
    for (double l : logit) z += std::exp(l);
    want += std::log(z) - logit[std::size_t(labels[i])];
  }
  CHECK(a == doctest::Approx(want / 6.0).epsilon(1e-9));
  CHECK_THROWS_AS(ops::arcface(g, g.constant(Tensor<double>({1, 2})), g.constant(w), {0}, 1.0, 0.0), LossError);
  CHECK_THROWS_AS(ops::arcface(g, g.constant(e), g.constant(w), {5}, 1.0, 0.0), LossError);
}

TEST_CASE("fusion loss: weighting and gradient composition") {
  std::mt19937_64 rng(35);
  const auto e = randn({8, 5}, rng, 0.3);
  const auto w = randn({4, 5}, rng);
  const std::vector<int> labels{0, 0, 1, 1, 2, 2, 3, 3};
  Graph<double> g;
  FusionLossConfig cfg;
  auto t = fusion_loss(g, g.constant(e), g.constant(w), labels, cfg);
  CHECK(g.value(t.total)[0] == doctest::Approx(0.9 * g.value(t.triplet)[0] + 0.1 * g.value(t.arcface)[0]));
  cfg.lambda = 1.0;
  t = fusion_loss(g, g.constant(e), g.constant(w), labels, cfg);
  CHECK(g.value(t.total)[0] == g.value(ops::batch_hard_triplet(g, g.constant(e), labels, 0.2))[0]);

  // Gradient of the sum equals the weighted sum of the separate gradients.
  auto grad_of = [&](int which) {
    Parameter<double> p("e", e);
    Graph<double> gr;
    FusionLossConfig c;
    const auto terms = fusion_loss(gr, gr.parameter(p), gr.constant(w), labels, c);
    gr.backward(which == 0 ? terms.total : which == 1 ? terms.triplet : terms.arcface);
    return p.grad;
  };
  const auto total = grad_of(0), tri = grad_of(1), arc = grad_of(2);
  for (std::size_t i = 0; i < total.size(); ++i) CHECK(total[i] == doctest::Approx(0.9 * tri[i] + 0.1 * arc[i]).epsilon(1e-6));

  cfg.lambda = 1.5;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
}
