#include "skgait/net.hpp"

#include <cmath>

#include "skgait/error.hpp"

namespace skgait {

std::vector<BlockSpec> BackboneConfig::default_blocks() {
  return {{3, 32, 1, false}, {32, 32, 1, true}, {32, 64, 2, true}, {64, 64, 1, true}, {64, 128, 2, true}};
}

std::size_t BackboneConfig::output_frames(std::size_t t_in) const {
  std::size_t t = t_in;
  for (const auto& b : blocks) t = (t - 1) / static_cast<std::size_t>(b.stride) + 1;
  return t;
}

void BackboneConfig::validate() const {
  if (blocks.empty()) throw ConfigError("backbone needs at least one block");
  if (blocks.front().in != 3) throw ConfigError("first block must take 3 input channels");
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    const auto& b = blocks[i];
    if (b.in == 0 || b.out == 0 || b.stride < 1) throw ConfigError("invalid block " + std::to_string(i));
    if (i > 0 && blocks[i - 1].out != b.in)
      throw ConfigError("block " + std::to_string(i) + " input channels do not match previous output");
  }
  if (temporal_kernel < 1 || temporal_kernel % 2 == 0) throw ConfigError("temporal kernel width must be odd");
  if (!(alpha > 0.0)) throw ConfigError("adjacency alpha must be > 0");
}

namespace {

template <typename Real>
Tensor<Real> he_normal(Shape shape, double fan_in, std::mt19937_64& rng) {
  std::normal_distribution<double> dist(0.0, std::sqrt(2.0 / fan_in));
  Tensor<Real> t(std::move(shape));
  for (auto& v : t.values()) v = static_cast<Real>(dist(rng));
  return t;
}

}  // namespace

template <typename Real>
STGCNBlock<Real>::STGCNBlock(ParameterStore<Real>& store, const std::string& prefix, const BlockSpec& spec,
                             int temporal_kernel, std::mt19937_64& rng)
    : spec_(spec) {
  const std::size_t width = static_cast<std::size_t>(temporal_kernel);
  const auto k = static_cast<std::size_t>(kPartitions);
  spatial_ = &store.add(prefix + ".gcn.weight", he_normal<Real>({k, spec.in, spec.out}, double(k * spec.in), rng));
  bn1_gamma_ = &store.add(prefix + ".gcn_bn.gamma", Tensor<Real>({spec.out}, Real(1)));
  bn1_beta_ = &store.add(prefix + ".gcn_bn.beta", Tensor<Real>({spec.out}));
  bn1_ = &store.add_batch_norm(prefix + ".gcn_bn", spec.out);
  temporal_ = &store.add(prefix + ".tcn.weight",
                         he_normal<Real>({spec.out, spec.out, width}, double(spec.out * width), rng));
  bn2_gamma_ = &store.add(prefix + ".tcn_bn.gamma", Tensor<Real>({spec.out}, Real(1)));
  bn2_beta_ = &store.add(prefix + ".tcn_bn.beta", Tensor<Real>({spec.out}));
  bn2_ = &store.add_batch_norm(prefix + ".tcn_bn", spec.out);
  if (spec.residual && (spec.in != spec.out || spec.stride != 1)) {
    res_kernel_ = &store.add(prefix + ".res.weight", he_normal<Real>({spec.out, spec.in, 1}, double(spec.in), rng));
    res_gamma_ = &store.add(prefix + ".res_bn.gamma", Tensor<Real>({spec.out}, Real(1)));
    res_beta_ = &store.add(prefix + ".res_bn.beta", Tensor<Real>({spec.out}));
    res_bn_ = &store.add_batch_norm(prefix + ".res_bn", spec.out);
  }
}

template <typename Real>
Var STGCNBlock<Real>::forward(Graph<Real>& g, Var x, const Tensor<Real>& adjacency, const ForwardOptions& opt,
                              double momentum, double eps) const {
  const auto bn = opt.bn(momentum, eps);
  Var h = ops::spatial_graph_conv(g, x, adjacency, g.parameter(*spatial_));
  h = ops::batch_norm(g, h, g.parameter(*bn1_gamma_), g.parameter(*bn1_beta_), *bn1_, bn);
  h = ops::relu(g, h);
  h = ops::temporal_conv(g, h, g.parameter(*temporal_), spec_.stride);
  h = ops::batch_norm(g, h, g.parameter(*bn2_gamma_), g.parameter(*bn2_beta_), *bn2_, bn);
  if (spec_.residual) {
    Var r = x;
    if (res_kernel_) {
      r = ops::temporal_conv(g, x, g.parameter(*res_kernel_), spec_.stride);
      r = ops::batch_norm(g, r, g.parameter(*res_gamma_), g.parameter(*res_beta_), *res_bn_, bn);
    }
    h = ops::add(g, h, r);
  }
  return ops::relu(g, h);
}

template <typename Real>
SiameseSTGCN<Real>::SiameseSTGCN(ParameterStore<Real>& store, const BackboneConfig& cfg,
                                 const NormalizedAdjacency& adjacency, std::mt19937_64& rng)
    : cfg_(cfg), adjacency_(adjacency.as<Real>()) {
  cfg_.validate();
  for (std::size_t i = 0; i < cfg_.blocks.size(); ++i)
    blocks_.emplace_back(store, "block" + std::to_string(i), cfg_.blocks[i], cfg_.temporal_kernel, rng);
}

template <typename Real>
Var SiameseSTGCN<Real>::run_blocks(Graph<Real>& g, Var x, const ForwardOptions& opt) const {
  for (const auto& b : blocks_) x = b.forward(g, x, adjacency_, opt, cfg_.bn_momentum, cfg_.bn_eps);
  return x;
}

template <typename Real>
typename SiameseSTGCN<Real>::Streams SiameseSTGCN<Real>::forward(Graph<Real>& g, const Tensor<Real>& f_joints,
                                                                 const Tensor<Real>& f_anthro,
                                                                 const ForwardOptions& opt) const {
  if (f_joints.shape() != f_anthro.shape() || f_joints.rank() != 4 || f_joints.dim(1) != 3 ||
      f_joints.dim(3) != adjacency_.dim(1))
    throw ShapeError("siamese forward expects matching (N, 3, T, " + std::to_string(adjacency_.dim(1)) +
                     ") inputs, got " + shape_string(f_joints.shape()) + " and " + shape_string(f_anthro.shape()));
  const std::size_t n = f_joints.dim(0);
  Tensor<Real> both({2 * n, f_joints.dim(1), f_joints.dim(2), f_joints.dim(3)});
  std::copy(f_joints.data(), f_joints.data() + f_joints.size(), both.data());
  std::copy(f_anthro.data(), f_anthro.data() + f_anthro.size(), both.data() + f_joints.size());
  Var y = run_blocks(g, g.constant(std::move(both)), opt);
  return {ops::slice_batch(g, y, 0, n), ops::slice_batch(g, y, n, 2 * n)};
}

template <typename Real>
Tensor<Real> stack_samples(const std::vector<const GaitTensor*>& samples) {
  if (samples.empty()) throw ShapeError("stack_samples: empty batch");
  const Shape& s = samples.front()->shape();
  Tensor<Real> out({samples.size(), s[0], s[1], s[2]});
  const std::size_t step = samples.front()->size();
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (samples[i]->shape() != s) throw ShapeError("stack_samples: inconsistent sample shapes");
    const auto vals = samples[i]->values();
    std::transform(vals.begin(), vals.end(), out.data() + i * step, [](double v) { return static_cast<Real>(v); });
  }
  return out;
}

GradCheckReport grad_check(const std::function<Var(Graph<double>&)>& loss, const std::vector<Parameter<double>*>& wrt,
                           double eps, double floor) {
  for (auto* p : wrt) p->grad = Tensor<double>(p->value.shape());
  {
    Graph<double> g;
    g.backward(loss(g));
  }
  auto evaluate = [&]() {
    Graph<double> g(GradMode::inference);
    return g.value(loss(g))[0];
  };

  GradCheckReport report;
  const double base = evaluate();
  for (auto* p : wrt) {
    for (std::size_t i = 0; i < p->value.size(); ++i) {
      const double orig = p->value[i];
      p->value[i] = orig + eps;
      const double up = evaluate();
      p->value[i] = orig - eps;
      const double down = evaluate();
      p->value[i] = orig;
      const double analytic = p->grad[i];
      auto rel_error = [&](double numeric) {
        return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
      };
      double numeric = (up - down) / (2.0 * eps);
      double rel = rel_error(numeric);
      // A step across a ReLU or max kink makes the one-sided slopes disagree;
      // the analytic gradient must then match the slope on its own side.
      const double right = (up - base) / eps, left = (base - down) / eps;
      if (std::abs(right - left) > kKinkTolerance * std::max({std::abs(right), std::abs(left), floor})) {
        ++report.kinks;
        const double side = rel_error(right) < rel_error(left) ? right : left;
        if (rel_error(side) < rel) {
          numeric = side;
          rel = rel_error(side);
        }
      }
      ++report.checked;
      if (rel > report.max_rel_error || report.worst_parameter.empty()) {
        report.max_rel_error = std::max(report.max_rel_error, rel);
        report.worst_parameter = p->name;
        report.worst_index = i;
        report.analytic = analytic;
        report.numeric = numeric;
      }
    }
  }
  return report;
}

template class STGCNBlock<float>;
template class STGCNBlock<double>;
template class SiameseSTGCN<float>;
template class SiameseSTGCN<double>;
template Tensor<float> stack_samples<float>(const std::vector<const GaitTensor*>&);
template Tensor<double> stack_samples<double>(const std::vector<const GaitTensor*>&);

}  // namespace skgait
