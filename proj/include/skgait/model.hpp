#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "skgait/graph.hpp"
#include "skgait/jrpm.hpp"
#include "skgait/net.hpp"

namespace skgait {

struct ModelConfig {
  BackboneConfig backbone;
  std::size_t embedding_per_group = kDefaultEmbeddingPerGroup;  // D_emb
  std::size_t frames = kDefaultFrames;                          // T_out
  std::size_t num_classes = 48;                                 // arcface rows

  void validate() const;
};

// Siamese ST-GCN, JRPM head (pooling kernels + independent projections) and
// arcface class weights, plus the input standardizers of both streams.
template <typename Real>
class GaitModel {
 public:
  GaitModel(const ModelConfig& cfg, std::uint64_t seed);

  struct Output {
    Var f_joints;  // F_Jst
    Var f_anthro;  // F_Ast
    Var f_fused;   // F_Sst
    std::vector<Var> pooled;
    std::vector<Var> group_embeddings;
    Var embedding;  // (N, groups · D_emb)
  };

  // Inputs are already standardized (N, 3, T, V) batches.
  Output forward(Graph<Real>& g, const Tensor<Real>& f_joints, const Tensor<Real>& f_anthro,
                 const ForwardOptions& opt) const;

  const ModelConfig& config() const { return cfg_; }
  const PyramidSpec& pyramid() const { return pyramid_; }
  const SiameseSTGCN<Real>& backbone() const { return *backbone_; }
  Parameter<Real>& class_weights() { return *class_weights_; }
  Parameter<Real>& pool_kernel(std::size_t group) { return *pool_[group]; }

  std::vector<Parameter<Real>*> parameters() { return store_->parameters(); }
  std::vector<std::pair<std::string, Tensor<Real>*>> buffers() { return store_->buffers(); }
  void zero_grad() { store_->zero_grad(); }

  // Trainable scalars. The classifier rows are a training-time head and can
  // be left out.
  std::size_t count_parameters(bool include_classifier = true) const;

  std::size_t embedding_size() const { return pyramid_.size() * cfg_.embedding_per_group; }

  Standardizer joint_norm;
  Standardizer anthro_norm;

 private:
  ModelConfig cfg_;
  PyramidSpec pyramid_;
  std::unique_ptr<ParameterStore<Real>> store_;
  std::unique_ptr<SiameseSTGCN<Real>> backbone_;
  std::vector<Parameter<Real>*> pool_;
  std::vector<Parameter<Real>*> proj_w_;
  std::vector<Parameter<Real>*> proj_b_;
  Parameter<Real>* class_weights_ = nullptr;
};

struct NamedTensor {
  std::string name;
  Tensor<float> value;
  friend bool operator==(const NamedTensor&, const NamedTensor&) = default;
};

// On-disk form: "SKGAIT-CHECKPOINT 1\n", one line of JSON header (format
// version, model config, class list, provenance, tensor manifest with shapes
// and byte offsets), then little-endian float32 payloads back to back.
struct Checkpoint {
  ModelConfig model;
  std::vector<std::string> classes;
  std::map<std::string, std::string> provenance;
  std::vector<NamedTensor> tensors;

  const NamedTensor* find(std::string_view name) const;
};

inline constexpr int kCheckpointVersion = 1;

std::string serialize_checkpoint(const Checkpoint& c);
Checkpoint parse_checkpoint(std::string_view bytes);
void save_checkpoint(const Checkpoint& c, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

template <typename Real>
Checkpoint snapshot(GaitModel<Real>& model, std::vector<std::string> classes = {},
                    std::map<std::string, std::string> provenance = {});

template <typename Real>
GaitModel<Real> restore(const Checkpoint& c);

}  // namespace skgait
