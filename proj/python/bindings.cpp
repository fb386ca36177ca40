#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <cmath>
#include <limits>
#include <sstream>

#include "skgait/commands.hpp"
#include "skgait/error.hpp"
#include "skgait/loss.hpp"
#include "skgait/protocol.hpp"
#include "skgait/run_config.hpp"
#include "skgait/skeleton.hpp"

namespace py = pybind11;
using namespace skgait;

namespace {

using F64 = py::array_t<double, py::array::c_style | py::array::forcecast>;
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

void expect_shape(const F64& a, std::initializer_list<py::ssize_t> dims, const char* what) {
  bool ok = a.ndim() == static_cast<py::ssize_t>(dims.size());
  std::size_t i = 0;
  for (py::ssize_t d : dims) {
    if (ok && d >= 0 && a.shape(i) != d) ok = false;
    ++i;
  }
  if (!ok) throw ShapeError(std::string(what) + " has the wrong shape");
}

Tensor<double> to_tensor(const F64& a) {
  Shape s(a.shape(), a.shape() + a.ndim());
  return Tensor<double>(s, std::vector<double>(a.data(), a.data() + a.size()));
}

F64 to_array(const Tensor<double>& t) {
  std::vector<py::ssize_t> s(t.shape().begin(), t.shape().end());
  F64 out(s);
  std::copy(t.values().begin(), t.values().end(), out.mutable_data());
  return out;
}

Skeleton16 to_skeleton(const F64& a) {
  expect_shape(a, {kJoints, 3}, "skeleton");
  Skeleton16 s;
  for (int j = 0; j < kJoints; ++j) s[j] = {a.at(j, 0), a.at(j, 1), a.at(j, 2)};
  return s;
}

F64 from_points(const std::array<Vec3, kJoints>& p) {
  F64 out({kJoints, 3});
  auto m = out.mutable_unchecked<2>();
  for (int j = 0; j < kJoints; ++j)
    for (int k = 0; k < 3; ++k) m(j, k) = p[j][k];
  return out;
}

Mat3 to_mat3(const F64& r) {
  expect_shape(r, {3, 3}, "rotation");
  Mat3 m;
  std::copy(r.data(), r.data() + 9, m.m.begin());
  return m;
}

py::tuple from_transform(const RigidTransform& t) {
  F64 r({3, 3}), tr({3});
  std::copy(t.rotation().m.begin(), t.rotation().m.end(), r.mutable_data());
  for (int k = 0; k < 3; ++k) tr.mutable_data()[k] = t.translation()[k];
  return py::make_tuple(r, tr);
}

DeviceId parse_device(const std::string& s) {
  if (s == "master") return DeviceId::master;
  if (s == "sub1") return DeviceId::sub1;
  if (s == "sub2") return DeviceId::sub2;
  throw ConfigError("unknown device '" + s + "' (master|sub1|sub2)");
}

RunConfig run_config(const std::string& json_text) {
  RunConfig cfg = merge_run_config(RunConfig{}, json_text.empty() ? Json::object() : Json::parse(json_text));
  cfg.finalize();
  cfg.validate();
  return cfg;
}

EmbeddingBatch make_batch(const F64& emb, const std::vector<std::string>& subjects,
                          const std::vector<std::string>& conditions, const std::vector<std::string>& views) {
  expect_shape(emb, {-1, -1}, "embeddings");
  const auto n = static_cast<std::size_t>(emb.shape(0));
  if (subjects.size() != n || conditions.size() != n || views.size() != n)
    throw ShapeError("labels must have one entry per embedding row");
  EmbeddingBatch b;
  b.embeddings = to_tensor(emb);
  b.subject = subjects;
  b.condition = conditions;
  b.view = views;
  for (std::size_t i = 0; i < n; ++i) {
    b.identity.push_back(0);
    b.sequence.push_back(std::to_string(i));
  }
  return b;
}

// Loss value and its gradient with respect to the embeddings.
template <typename Build>
py::tuple loss_and_grad(const F64& emb, Build build) {
  Parameter<double> p("embeddings", to_tensor(emb));
  Graph<double> g;
  const Var loss = build(g, g.parameter(p));
  const double value = g.value(loss)[0];
  g.backward(loss);
  return py::make_tuple(value, to_array(p.grad));
}

class PyModel {
 public:
  explicit PyModel(const std::string& path) : ckpt_(load_checkpoint(path)), model_(restore<float>(ckpt_)) {}

  std::size_t embedding_size() const { return model_.embedding_size(); }
  std::size_t frames() const { return model_.config().frames; }
  const std::vector<std::string>& classes() const { return ckpt_.classes; }

  // Raw (unstandardized) stream tensors (N, 3, T, 16) -> (N, E).
  F64 embed(const F64& joints, const F64& anthro) const {
    const auto t = static_cast<py::ssize_t>(frames());
    expect_shape(joints, {-1, 3, t, kJoints}, "joints");
    expect_shape(anthro, {joints.shape(0), 3, t, kJoints}, "anthropometric");
    const Tensor<double> j = to_tensor(joints), a = to_tensor(anthro);
    const std::size_t n = j.dim(0), per = 3 * frames() * kJoints;
    std::vector<PreparedSequence> data(n);
    for (std::size_t i = 0; i < n; ++i) {
      auto slice = [&](const Tensor<double>& x) {
        return GaitTensor({3, frames(), std::size_t(kJoints)},
                          std::vector<double>(x.data() + i * per, x.data() + (i + 1) * per));
      };
      data[i].tensors = {slice(j), slice(a)};
      data[i].record.id = std::to_string(i);
    }
    EmbeddingBatch b;
    {
      py::gil_scoped_release release;
      b = extract(model_, data);
    }
    return n == 0 ? F64(std::vector<py::ssize_t>{0, py::ssize_t(embedding_size())}) : to_array(b.embeddings);
  }

 private:
  Checkpoint ckpt_;
  GaitModel<float> model_;
};

}  // namespace

PYBIND11_MODULE(_skgait, m) {
  m.doc() = "Skeleton gait recognition core";

  static py::exception<Error> base(m, "SkgaitError", PyExc_RuntimeError);
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const ConfigError& e) {
      PyErr_SetString(PyExc_ValueError, e.what());
    } catch (const ShapeError& e) {
      PyErr_SetString(PyExc_ValueError, e.what());
    } catch (const Error& e) {
      py::set_error(base, (e.kind() + ": " + e.what()).c_str());
    }
  });

  m.attr("JOINTS") = kJoints;
  m.attr("SOURCE_JOINTS") = kSourceJoints;
  m.attr("SOURCE_JOINT_OF") = std::vector<int>(kSourceJointOf.begin(), kSourceJointOf.end());
  m.attr("PARENT_OF") = std::vector<int>(kParentOf.begin(), kParentOf.end());
  m.def("joint_name", [](int j) { return std::string(joint_name(j)); });

  m.def("apply_transform",
        [](const F64& rotation, const F64& translation, const F64& points) {
          expect_shape(translation, {3}, "translation");
          expect_shape(points, {-1, 3}, "points");
          const RigidTransform t(to_mat3(rotation), {translation.at(0), translation.at(1), translation.at(2)},
                                 kMasterColor, kMasterColor);
          F64 out({points.shape(0), py::ssize_t(3)});
          auto o = out.mutable_unchecked<2>();
          for (py::ssize_t i = 0; i < points.shape(0); ++i) {
            const Vec3 q = apply(t, Vec3{points.at(i, 0), points.at(i, 1), points.at(i, 2)});
            for (int k = 0; k < 3; ++k) o(i, k) = q[k];
          }
          return out;
        },
        py::arg("rotation"), py::arg("translation"), py::arg("points"));

  m.def("chain_to_master",
        [](const std::string& calibration_path, const std::string& device, const std::string& mode) {
          return from_transform(
              chain_to_master(load_calibration(calibration_path), parse_device(device), parse_chain_mode(mode)));
        },
        py::arg("calibration"), py::arg("device"), py::arg("mode") = "strict",
        "Depth frame of `device` to the master colour frame as (R, T).");

  m.def("fuse",
        [](const F64& positions, const F64& confidence, double outlier_threshold, double min_confidence,
           const std::string& strategy) {
          expect_shape(positions, {-1, kSourceJoints, 3}, "positions");
          expect_shape(confidence, {positions.shape(0), kSourceJoints}, "confidence");
          if (positions.shape(0) > 3) throw ShapeError("at most three devices");
          FusionPolicy policy{parse_fusion_strategy(strategy), outlier_threshold, min_confidence};
          policy.validate();
          std::vector<SkeletonFrame32> frames(static_cast<std::size_t>(positions.shape(0)));
          for (std::size_t d = 0; d < frames.size(); ++d) {
            frames[d].source = static_cast<Source>(d);
            for (int j = 0; j < kSourceJoints; ++j) {
              const Vec3 p{positions.at(d, j, 0), positions.at(d, j, 1), positions.at(d, j, 2)};
              if (p.finite()) frames[d].set(j, p, confidence.at(d, j));
            }
          }
          const OptimizedFrame o = fuse(frames, policy);
          F64 pos({kSourceJoints, 3}), conf({kSourceJoints});
          py::array_t<int> src({kSourceJoints});
          for (int j = 0; j < kSourceJoints; ++j) {
            for (int k = 0; k < 3; ++k) pos.mutable_at(j, k) = o.positions[j] ? (*o.positions[j])[k] : kNaN;
            conf.mutable_at(j) = o.confidence[j];
            src.mutable_at(j) = static_cast<int>(o.sources[j].to_ulong());
          }
          return py::make_tuple(pos, conf, src);
        },
        py::arg("positions"), py::arg("confidence"), py::arg("outlier_threshold") = 150.0,
        py::arg("min_confidence") = 0.1, py::arg("strategy") = "confidence_weighted_mean",
        "Fuse aligned (devices, 32, 3) observations; NaN marks a missing joint. Returns (positions, confidence, "
        "source bitmask).");

  m.def("anthropometrics",
        [](const F64& skeleton) {
          const Skeleton16 s = to_skeleton(skeleton);
          const auto sb = compute_sb_shr(s);
          py::dict d;
          d["height"] = compute_height(s);
          d["shoulder_breadth"] = sb.shoulder_breadth;
          d["shoulder_hip_ratio"] = sb.shoulder_hip_ratio;
          return d;
        },
        py::arg("skeleton"));

  m.def("dual_skeleton",
        [](const F64& skeleton) {
          const DualSkeleton d = build_dual_skeleton(to_skeleton(skeleton));
          return py::make_tuple(from_points(d.real), from_points(d.pseudo));
        },
        py::arg("skeleton"), "Real and pseudo (bone) skeletons, each (16, 3).");

  m.def("batch_hard_triplet",
        [](const F64& emb, const std::vector<int>& labels, double margin) {
          expect_shape(emb, {-1, -1}, "embeddings");
          return loss_and_grad(emb, [&](Graph<double>& g, Var e) { return ops::batch_hard_triplet(g, e, labels, margin); });
        },
        py::arg("embeddings"), py::arg("labels"), py::arg("margin") = 0.2, "Returns (loss, d loss / d embeddings).");

  m.def("arcface",
        [](const F64& emb, const F64& weights, const std::vector<int>& labels, double scale, double margin) {
          expect_shape(emb, {-1, -1}, "embeddings");
          expect_shape(weights, {-1, emb.shape(1)}, "class weights");
          const Tensor<double> w = to_tensor(weights);
          return loss_and_grad(emb, [&](Graph<double>& g, Var e) {
            return ops::arcface(g, e, g.constant(w), labels, scale, margin);
          });
        },
        py::arg("embeddings"), py::arg("class_weights"), py::arg("labels"), py::arg("scale") = 30.0,
        py::arg("margin") = 0.5, "Returns (loss, d loss / d embeddings).");

  m.def("evaluate",
        [](const F64& gallery, const std::vector<std::string>& gallery_subjects,
           const std::vector<std::string>& gallery_views, const F64& probes,
           const std::vector<std::string>& probe_subjects, const std::vector<std::string>& probe_conditions,
           const std::vector<std::string>& probe_views, const std::string& metric) {
          const EmbeddingBatch g = make_batch(
              gallery, gallery_subjects, std::vector<std::string>(gallery_subjects.size(), "gallery"), gallery_views);
          const EmbeddingBatch p = make_batch(probes, probe_subjects, probe_conditions, probe_views);
          const EvalResult r = evaluate(g, p, parse_metric(metric));
          py::dict cells;
          for (const auto& [key, cell] : r.cells) cells[py::make_tuple(key.first, key.second)] = cell.accuracy();
          py::dict out;
          out["cells"] = cells;
          out["overall"] = r.overall();
          return out;
        },
        py::arg("gallery"), py::arg("gallery_subjects"), py::arg("gallery_views"), py::arg("probes"),
        py::arg("probe_subjects"), py::arg("probe_conditions"), py::arg("probe_views"),
        py::arg("metric") = "euclidean",
        "Rank-1 accuracy per (condition, view); probes never match gallery entries of their own view.");

  m.def("count_parameters",
        [](const std::string& config_json, bool include_classifier) {
          const RunConfig cfg = run_config(config_json);
          return GaitModel<float>(cfg.model, cfg.seed).count_parameters(include_classifier);
        },
        py::arg("config_json") = "", py::arg("include_classifier") = true);

  m.def("run_command",
        [](const std::string& command, const std::string& config_json) {
          const RunConfig cfg = run_config(config_json);
          std::ostringstream out;
          py::gil_scoped_release release;
          if (command == "gen-synth") cmd::gen_synth(cfg, out);
          else if (command == "fuse") cmd::fuse(cfg, out);
          else if (command == "train") cmd::train(cfg, out);
          else if (command == "eval") cmd::eval(cfg, out);
          else if (command == "params") cmd::params(cfg, out);
          else if (command == "export-embeddings") cmd::export_embeddings(cfg, out);
          else throw ConfigError("unknown command '" + command + "'");
          return out.str();
        },
        py::arg("command"), py::arg("config_json") = "", "Run a CLI command with a JSON config; returns its report.");

  py::class_<PyModel>(m, "Model")
      .def(py::init<const std::string&>(), py::arg("checkpoint"))
      .def_property_readonly("embedding_size", &PyModel::embedding_size)
      .def_property_readonly("frames", &PyModel::frames)
      .def_property_readonly("classes", &PyModel::classes)
      .def("embed", &PyModel::embed, py::arg("joints"), py::arg("anthropometric"),
           "Raw stream tensors (N, 3, frames, 16) -> embeddings (N, E).");
}
