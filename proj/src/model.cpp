#include "skgait/model.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <random>

#include "json.hpp"
#include "skgait/error.hpp"
#include "skgait/json_io.hpp"
#include "skgait/textio.hpp"

namespace skgait {

void ModelConfig::validate() const {
  backbone.validate();
  if (embedding_per_group == 0) throw ConfigError("embedding_per_group must be > 0");
  if (frames < 1) throw ConfigError("frames must be >= 1");
  if (num_classes < 1) throw ConfigError("num_classes must be >= 1");
}

template <typename Real>
GaitModel<Real>::GaitModel(const ModelConfig& cfg, std::uint64_t seed)
    : cfg_(cfg), pyramid_(PyramidSpec::standard()), store_(std::make_unique<ParameterStore<Real>>()) {
  cfg_.validate();
  pyramid_.validate();
  std::mt19937_64 rng(seed);
  backbone_ = std::make_unique<SiameseSTGCN<Real>>(*store_, cfg_.backbone,
                                                   normalize(build_adjacency(), cfg_.backbone.alpha), rng);

  const std::size_t t_out = cfg_.backbone.output_frames(cfg_.frames);
  const std::size_t c = 2 * cfg_.backbone.output_channels();
  const std::size_t d = cfg_.embedding_per_group;
  const double bound = 1.0 / std::sqrt(static_cast<double>(c));
  std::uniform_real_distribution<double> proj(-bound, bound);
  for (std::size_t i = 0; i < pyramid_.size(); ++i) {
    const auto& grp = pyramid_.groups[i];
    const std::size_t j = grp.joints.size();
    const std::string prefix = "jrpm." + grp.name;
    pool_.push_back(&store_->add(prefix + ".pool", Tensor<Real>({t_out, j}, static_cast<Real>(1.0 / double(j * t_out)))));
    Tensor<Real> w({c, d});
    for (auto& v : w.values()) v = static_cast<Real>(proj(rng));
    proj_w_.push_back(&store_->add(prefix + ".proj.weight", std::move(w)));
    Tensor<Real> b({d});
    for (auto& v : b.values()) v = static_cast<Real>(proj(rng));
    proj_b_.push_back(&store_->add(prefix + ".proj.bias", std::move(b)));
  }
  std::normal_distribution<double> cls(0.0, 0.01);
  Tensor<Real> cw({cfg_.num_classes, embedding_size()});
  for (auto& v : cw.values()) v = static_cast<Real>(cls(rng));
  class_weights_ = &store_->add("arcface.weight", std::move(cw));
}

template <typename Real>
typename GaitModel<Real>::Output GaitModel<Real>::forward(Graph<Real>& g, const Tensor<Real>& f_joints,
                                                          const Tensor<Real>& f_anthro,
                                                          const ForwardOptions& opt) const {
  if (f_joints.rank() != 4 || f_joints.dim(2) != cfg_.frames)
    throw ShapeError("model expects (N, 3, " + std::to_string(cfg_.frames) + ", V) input, got " +
                     shape_string(f_joints.shape()));
  Output out;
  const auto streams = backbone_->forward(g, f_joints, f_anthro, opt);
  out.f_joints = streams.joints;
  out.f_anthro = streams.anthropometric;
  out.f_fused = concat_features(g, out.f_joints, out.f_anthro);
  const auto local = split(g, out.f_fused, pyramid_);
  for (std::size_t i = 0; i < local.size(); ++i) {
    Var pooled = ops::weighted_pool(g, local[i], g.parameter(*pool_[i]));
    out.pooled.push_back(pooled);
    out.group_embeddings.push_back(
        ops::linear(g, pooled, g.parameter(*proj_w_[i]), g.parameter(*proj_b_[i])));
  }
  out.embedding = ops::concat_channels(g, out.group_embeddings);
  return out;
}

template <typename Real>
std::size_t GaitModel<Real>::count_parameters(bool include_classifier) const {
  std::size_t n = 0;
  for (const auto* p : std::as_const(*store_).parameters()) {
    if (!include_classifier && p == class_weights_) continue;
    n += p->value.size();
  }
  return n;
}

const NamedTensor* Checkpoint::find(std::string_view name) const {
  for (const auto& t : tensors)
    if (t.name == name) return &t;
  return nullptr;
}

namespace {

constexpr std::string_view kMagic = "SKGAIT-CHECKPOINT 1\n";

void append_le_float(std::string& out, float v) {
  std::uint32_t bits = std::bit_cast<std::uint32_t>(v);
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xffu));
}

float read_le_float(const char* p) {
  std::uint32_t bits = 0;
  for (int i = 0; i < 4; ++i) bits |= std::uint32_t(static_cast<unsigned char>(p[i])) << (8 * i);
  return std::bit_cast<float>(bits);
}

Tensor<float> standardizer_part(const Tensor<double>& t) { return t.cast<float>(); }

}  // namespace

std::string serialize_checkpoint(const Checkpoint& c) {
  Json manifest = Json::array();
  std::size_t offset = 0;
  for (const auto& t : c.tensors) {
    const std::size_t bytes = t.value.size() * 4;
    manifest.push_back({{"name", t.name}, {"shape", t.value.shape()}, {"offset", offset}, {"bytes", bytes}});
    offset += bytes;
  }
  Json header = {{"format", "skgait-checkpoint"},
                 {"version", kCheckpointVersion},
                 {"model", to_json(c.model)},
                 {"classes", c.classes},
                 {"provenance", c.provenance},
                 {"tensors", manifest},
                 {"payload_bytes", offset}};
  std::string out(kMagic);
  out += header.dump();
  out.push_back('\n');
  out.reserve(out.size() + offset);
  for (const auto& t : c.tensors)
    for (float v : t.value.values()) append_le_float(out, v);
  return out;
}

Checkpoint parse_checkpoint(std::string_view bytes) {
  if (bytes.substr(0, kMagic.size()) != kMagic) throw FormatError("not a skgait checkpoint (bad magic line)");
  const std::size_t start = kMagic.size();
  const std::size_t nl = bytes.find('\n', start);
  if (nl == std::string_view::npos) throw FormatError("checkpoint header is truncated");
  Json header;
  try {
    header = Json::parse(bytes.substr(start, nl - start));
  } catch (const Json::exception& e) {
    throw FormatError(std::string("checkpoint header is not valid JSON: ") + e.what());
  }
  try {
    reject_unknown_keys(header, {"format", "version", "model", "classes", "provenance", "tensors", "payload_bytes"},
                        "checkpoint");
    if (header.at("format") != "skgait-checkpoint") throw FormatError("checkpoint format tag mismatch");
    if (header.at("version").get<int>() != kCheckpointVersion)
      throw FormatError("unsupported checkpoint version " + header.at("version").dump());
    Checkpoint c;
    c.model = model_config_from_json(header.at("model"));
    c.classes = header.at("classes").get<std::vector<std::string>>();
    c.provenance = header.at("provenance").get<std::map<std::string, std::string>>();
    const std::string_view payload = bytes.substr(nl + 1);
    if (payload.size() != header.at("payload_bytes").get<std::size_t>())
      throw FormatError("checkpoint payload is " + std::to_string(payload.size()) + " bytes, header says " +
                        header.at("payload_bytes").dump());
    std::size_t expect = 0;
    for (const auto& m : header.at("tensors")) {
      reject_unknown_keys(m, {"name", "shape", "offset", "bytes"}, "checkpoint.tensors[]");
      NamedTensor t;
      t.name = m.at("name").get<std::string>();
      const Shape shape = m.at("shape").get<Shape>();
      const auto offset = m.at("offset").get<std::size_t>();
      const auto nbytes = m.at("bytes").get<std::size_t>();
      if (offset != expect || nbytes != element_count(shape) * 4 || offset + nbytes > payload.size())
        throw FormatError("checkpoint tensor '" + t.name + "' has inconsistent offset or size");
      std::vector<float> vals(element_count(shape));
      for (std::size_t i = 0; i < vals.size(); ++i) vals[i] = read_le_float(payload.data() + offset + 4 * i);
      t.value = Tensor<float>(shape, std::move(vals));
      c.tensors.push_back(std::move(t));
      expect += nbytes;
    }
    if (expect != payload.size()) throw FormatError("checkpoint payload has trailing bytes");
    return c;
  } catch (const Json::exception& e) {
    throw FormatError(std::string("malformed checkpoint header: ") + e.what());
  }
}

void save_checkpoint(const Checkpoint& c, const std::string& path) { write_text_file(path, serialize_checkpoint(c)); }

Checkpoint load_checkpoint(const std::string& path) { return parse_checkpoint(read_text_file(path)); }

template <typename Real>
Checkpoint snapshot(GaitModel<Real>& model, std::vector<std::string> classes,
                    std::map<std::string, std::string> provenance) {
  Checkpoint c;
  c.model = model.config();
  c.classes = std::move(classes);
  c.provenance = std::move(provenance);
  for (auto* p : model.parameters()) c.tensors.push_back({p->name, p->value.template cast<float>()});
  for (auto& [name, t] : model.buffers()) c.tensors.push_back({name, t->template cast<float>()});
  c.tensors.push_back({"norm.joints.mean", standardizer_part(model.joint_norm.mean)});
  c.tensors.push_back({"norm.joints.scale", standardizer_part(model.joint_norm.scale)});
  c.tensors.push_back({"norm.anthro.mean", standardizer_part(model.anthro_norm.mean)});
  c.tensors.push_back({"norm.anthro.scale", standardizer_part(model.anthro_norm.scale)});
  return c;
}

template <typename Real>
GaitModel<Real> restore(const Checkpoint& c) {
  GaitModel<Real> model(c.model, 0);
  auto fetch = [&](const std::string& name, const Shape& shape) -> const Tensor<float>& {
    const NamedTensor* t = c.find(name);
    if (!t) throw FormatError("checkpoint is missing tensor '" + name + "'");
    if (t->value.shape() != shape)
      throw FormatError("checkpoint tensor '" + name + "' has shape " + shape_string(t->value.shape()) +
                        ", model expects " + shape_string(shape));
    return t->value;
  };
  std::size_t used = 4;
  for (auto* p : model.parameters()) {
    p->value = fetch(p->name, p->value.shape()).template cast<Real>();
    ++used;
  }
  for (auto& [name, t] : model.buffers()) {
    *t = fetch(name, t->shape()).template cast<Real>();
    ++used;
  }
  const Shape norm_shape{3, 16};
  model.joint_norm.mean = fetch("norm.joints.mean", norm_shape).template cast<double>();
  model.joint_norm.scale = fetch("norm.joints.scale", norm_shape).template cast<double>();
  model.anthro_norm.mean = fetch("norm.anthro.mean", norm_shape).template cast<double>();
  model.anthro_norm.scale = fetch("norm.anthro.scale", norm_shape).template cast<double>();
  if (used != c.tensors.size()) throw FormatError("checkpoint holds tensors the model does not use");
  return model;
}

template class GaitModel<float>;
template class GaitModel<double>;
template Checkpoint snapshot<float>(GaitModel<float>&, std::vector<std::string>, std::map<std::string, std::string>);
template Checkpoint snapshot<double>(GaitModel<double>&, std::vector<std::string>, std::map<std::string, std::string>);
template GaitModel<float> restore<float>(const Checkpoint&);
template GaitModel<double> restore<double>(const Checkpoint&);

}  // namespace skgait
