#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <cstring>

#include "drsl/analysis.hpp"
#include "drsl/attacks.hpp"
#include "drsl/data.hpp"
#include "drsl/harness.hpp"

namespace py = pybind11;
using namespace drsl;

namespace {

using NpArray = py::array_t<double, py::array::c_style | py::array::forcecast>;

Tensor tensor_from_numpy(const NpArray& arr) {
  Shape shape(static_cast<std::size_t>(arr.ndim()));
  for (py::ssize_t i = 0; i < arr.ndim(); ++i) {
    shape[static_cast<std::size_t>(i)] = static_cast<std::size_t>(arr.shape(i));
  }
  std::vector<double> data(arr.data(), arr.data() + arr.size());
  return Tensor(std::move(shape), std::move(data));
}

py::array_t<double> numpy_from_tensor(const Tensor& t) {
  std::vector<py::ssize_t> shape;
  for (std::size_t d : t.shape()) shape.push_back(static_cast<py::ssize_t>(d));
  py::array_t<double> out(shape);
  std::memcpy(out.mutable_data(), t.values().data(), t.numel() * sizeof(double));
  return out;
}

py::array_t<double> numpy_from_doubles(const std::vector<double>& v) {
  return py::array_t<double>(std::vector<py::ssize_t>{static_cast<py::ssize_t>(v.size())},
                             v.data());
}

std::vector<std::size_t> labels_from_numpy(const py::array_t<long>& arr) {
  if (arr.ndim() != 1) throw ShapeError("labels must be a 1-D array");
  std::vector<std::size_t> labels(static_cast<std::size_t>(arr.size()));
  auto r = arr.unchecked<1>();
  for (py::ssize_t i = 0; i < arr.size(); ++i) {
    if (r(i) < 0) throw ValueError("labels must be non-negative");
    labels[static_cast<std::size_t>(i)] = static_cast<std::size_t>(r(i));
  }
  return labels;
}

py::array_t<long> numpy_from_sizes(const std::vector<std::size_t>& v) {
  std::vector<long> longs(v.begin(), v.end());
  return py::array_t<long>(std::vector<py::ssize_t>{static_cast<py::ssize_t>(longs.size())},
                           longs.data());
}

ModelConfig config_from_kwargs(const std::string& architecture,
                               const std::vector<std::size_t>& input_shape,
                               std::size_t num_classes,
                               const std::vector<std::size_t>& hidden,
                               const std::vector<std::size_t>& channels,
                               std::size_t dense_hidden) {
  ModelConfig cfg = architecture_from_string(architecture) == Architecture::MLP
                        ? ModelConfig::mlp_mnist()
                        : ModelConfig::vgg_small_cifar10();
  if (input_shape.size() == 3) cfg.input_shape = {input_shape[0], input_shape[1], input_shape[2]};
  cfg.num_classes = num_classes;
  if (!hidden.empty()) cfg.hidden = hidden;
  if (!channels.empty()) cfg.channels = channels;
  if (dense_hidden != 0) cfg.dense_hidden = dense_hidden;
  return cfg;
}

LossSpec loss_spec_from_args(const std::string& kind, double q, double tau,
                             const std::string& metric, bool restrict_to_non_true) {
  LossSpec spec;
  spec.kind = loss_kind_from_string(kind);
  spec.q = q;
  spec.tau = tau;
  spec.metric = metric_from_string(metric);
  spec.restrict_to_non_true = restrict_to_non_true;
  spec.validate();
  return spec;
}

AttackSpec attack_spec_from_args(const std::string& kind, double epsilon, double alpha,
                                 std::size_t steps, double step_size, bool random_start,
                                 std::uint64_t seed) {
  AttackSpec spec;
  spec.kind = attack_kind_from_string(kind);
  spec.epsilon = epsilon;
  spec.alpha = alpha > 0.0 ? alpha : epsilon / 4.0;
  spec.steps = steps;
  spec.step_size = step_size > 0.0 ? step_size : (epsilon > 0.0 ? epsilon / 10.0 : 1.0);
  spec.random_start = random_start;
  spec.seed = seed;
  spec.validate();
  return spec;
}

py::dict adv_batch_to_dict(const AdvBatch& adv) {
  py::dict out;
  out["adversarial"] = numpy_from_tensor(adv.adversarial);
  py::array_t<bool> success(std::vector<py::ssize_t>{static_cast<py::ssize_t>(adv.success.size())});
  auto w = success.mutable_unchecked<1>();
  for (std::size_t i = 0; i < adv.success.size(); ++i) {
    w(static_cast<py::ssize_t>(i)) = adv.success[i] != 0;
  }
  out["success"] = success;
  out["adv_pred"] = numpy_from_sizes(adv.adv_pred);
  return out;
}

}  // namespace

PYBIND11_MODULE(drsl_lab, m) {
  m.doc() = "Distribution-restrained softmax loss laboratory: losses, attacks, "
            "datasets and analysis from the C++ core";

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<ShapeError>(m, "ShapeError", PyExc_ValueError);
  py::register_exception<ValueError>(m, "ValueErrorDrsl", PyExc_ValueError);
  py::register_exception<FormatError>(m, "FormatError", PyExc_IOError);

  // ---- core numerics -------------------------------------------------------
  m.def("softmax", [](const NpArray& logits) {
    return numpy_from_tensor(softmax(nullptr, tensor_from_numpy(logits)));
  }, py::arg("logits"), "Numerically stable softmax over a vector or matrix rows");

  m.def("uniform_distribution", [](std::size_t num_classes) {
    return numpy_from_doubles(uniform_distribution(num_classes));
  }, py::arg("num_classes"));

  m.def("euclidean_distance", [](const NpArray& a, const NpArray& b) {
    return euclidean_distance(std::span(a.data(), static_cast<std::size_t>(a.size())),
                              std::span(b.data(), static_cast<std::size_t>(b.size())));
  }, py::arg("a"), py::arg("b"));

  m.def("cosine_distance", [](const NpArray& a, const NpArray& b) {
    return cosine_distance(std::span(a.data(), static_cast<std::size_t>(a.size())),
                           std::span(b.data(), static_cast<std::size_t>(b.size())));
  }, py::arg("a"), py::arg("b"));

  m.def("loss_value", [](const NpArray& logits, const py::array_t<long>& labels,
                         const std::string& kind, double q, double tau,
                         const std::string& metric, bool restrict_to_non_true) {
    const LossSpec spec = loss_spec_from_args(kind, q, tau, metric, restrict_to_non_true);
    return loss_forward(nullptr, spec, tensor_from_numpy(logits), labels_from_numpy(labels))
        .item();
  }, py::arg("logits"), py::arg("labels"), py::arg("kind") = "CE", py::arg("q") = 0.7,
     py::arg("tau") = 0.5, py::arg("metric") = "euclidean",
     py::arg("restrict_to_non_true") = false,
     "Mean CE / GCE / DRSL loss of a (B, C) logit matrix");

  m.def("loss_grad", [](const NpArray& logits, const py::array_t<long>& labels,
                        const std::string& kind, double q, double tau, const std::string& metric,
                        bool restrict_to_non_true) {
    const LossSpec spec = loss_spec_from_args(kind, q, tau, metric, restrict_to_non_true);
    Tensor x = tensor_from_numpy(logits);
    x.set_requires_grad(true);
    Tape tape;
    Tensor loss = loss_forward(&tape, spec, x, labels_from_numpy(labels));
    tape.backward(loss);
    Tensor grad(x.shape(), std::vector<double>(x.grad().begin(), x.grad().end()));
    return py::make_tuple(loss.item(), numpy_from_tensor(grad));
  }, py::arg("logits"), py::arg("labels"), py::arg("kind") = "CE", py::arg("q") = 0.7,
     py::arg("tau") = 0.5, py::arg("metric") = "euclidean",
     py::arg("restrict_to_non_true") = false,
     "Loss value and its gradient with respect to the logits");

  // ---- model ---------------------------------------------------------------
  py::class_<Model>(m, "Model")
      .def(py::init([](const std::string& architecture, std::vector<std::size_t> input_shape,
                       std::size_t num_classes, std::vector<std::size_t> hidden,
                       std::vector<std::size_t> channels, std::size_t dense_hidden,
                       std::uint64_t seed) {
             return Model(config_from_kwargs(architecture, input_shape, num_classes, hidden,
                                             channels, dense_hidden),
                          seed);
           }),
           py::arg("architecture") = "MLP",
           py::arg("input_shape") = std::vector<std::size_t>{1, 28, 28},
           py::arg("num_classes") = 10, py::arg("hidden") = std::vector<std::size_t>{},
           py::arg("channels") = std::vector<std::size_t>{}, py::arg("dense_hidden") = 0,
           py::arg("seed") = 0)
      .def("forward", [](const Model& model, const NpArray& batch) {
        return numpy_from_tensor(model.forward(nullptr, tensor_from_numpy(batch)));
      }, py::arg("batch"), "Logits for a (B, C, H, W) batch")
      .def("param_count", &Model::param_count)
      .def("freeze", &Model::freeze)
      .def("frozen", &Model::frozen)
      .def("init_seed", &Model::init_seed)
      .def("save", &Model::save_checkpoint, py::arg("path"))
      .def_static("load", &Model::load_checkpoint, py::arg("path"))
      .def("__repr__", [](const Model& model) {
        return "<drsl_lab.Model " + to_string(model.config().arch) + ", " +
               std::to_string(model.param_count()) + " parameters>";
      });

  // ---- data ------------------------------------------------------------------
  py::class_<Dataset>(m, "Dataset")
      .def(py::init([](const NpArray& images, const py::array_t<long>& labels,
                       const std::string& name, const std::string& split) {
             if (images.ndim() != 4) throw ShapeError("images must be (N, C, H, W)");
             Dataset ds;
             ds.images = tensor_from_numpy(images);
             ds.labels = labels_from_numpy(labels);
             ds.name = dataset_name_from_string(name);
             ds.split = split == "train" ? Split::Train : Split::Test;
             ds.validate();
             return ds;
           }),
           py::arg("images"), py::arg("labels"), py::arg("name") = "MNIST",
           py::arg("split") = "train")
      .def_property_readonly("images", [](const Dataset& ds) { return numpy_from_tensor(ds.images); })
      .def_property_readonly("labels", [](const Dataset& ds) { return numpy_from_sizes(ds.labels); })
      .def("__len__", &Dataset::size)
      .def("subset", &Dataset::subset, py::arg("n"));

  m.def("load_mnist", [](const std::string& images, const std::string& labels,
                         const std::string& split) {
    return load_mnist(images, labels, split == "train" ? Split::Train : Split::Test);
  }, py::arg("image_path"), py::arg("label_path"), py::arg("split") = "train");

  m.def("load_cifar10", [](const std::vector<std::string>& paths, const std::string& split) {
    return load_cifar10(paths, split == "train" ? Split::Train : Split::Test);
  }, py::arg("batch_paths"), py::arg("split") = "train");

  m.def("load_dataset", [](const std::string& name, const std::string& dir,
                           const std::string& split) {
    return load_dataset(dataset_name_from_string(name), dir,
                        split == "train" ? Split::Train : Split::Test);
  }, py::arg("name"), py::arg("dir"), py::arg("split") = "train");

  m.def("make_synthetic_mnist", [](std::size_t count, std::uint64_t seed,
                                   const std::string& split) {
    return make_synthetic_mnist(count, seed, split == "train" ? Split::Train : Split::Test);
  }, py::arg("count"), py::arg("seed") = 0, py::arg("split") = "train");

  m.def("generate_synthetic_mnist_files", &generate_synthetic_mnist_files, py::arg("dir"),
        py::arg("n_train") = 10000, py::arg("n_test") = 2000, py::arg("seed") = 0);
  m.def("generate_synthetic_cifar10_files", &generate_synthetic_cifar10_files, py::arg("dir"),
        py::arg("n_train") = 10000, py::arg("n_test") = 2000, py::arg("seed") = 0);

  m.def("inject_label_noise", [](const Dataset& ds, double rate, std::uint64_t seed) {
    auto [noisy, mask] = inject_label_noise(ds, NoiseSpec{rate, seed});
    return py::make_tuple(noisy, numpy_from_sizes(mask));
  }, py::arg("dataset"), py::arg("rate"), py::arg("seed") = 0,
     "Symmetric label noise; returns (noisy dataset, flipped indices)");

  // ---- attacks -----------------------------------------------------------------
  m.def("run_attack", [](const Model& model, const NpArray& batch,
                         const py::array_t<long>& labels, const std::string& kind,
                         double epsilon, double alpha, std::size_t steps, double step_size,
                         bool random_start, std::uint64_t seed) {
    const AttackSpec spec =
        attack_spec_from_args(kind, epsilon, alpha, steps, step_size, random_start, seed);
    return adv_batch_to_dict(
        run_attack(model, tensor_from_numpy(batch), labels_from_numpy(labels), spec));
  }, py::arg("model"), py::arg("batch"), py::arg("labels"), py::arg("kind") = "PGD",
     py::arg("epsilon") = 0.1, py::arg("alpha") = 0.0, py::arg("steps") = 40,
     py::arg("step_size") = 0.0, py::arg("random_start") = false, py::arg("seed") = 0,
     "FGSM / I-FGSM / PGD adversarial examples for a frozen model");

  // ---- analysis ------------------------------------------------------------------
  m.def("accuracy", [](const Model& model, const Dataset& ds) { return accuracy(model, ds); },
        py::arg("model"), py::arg("dataset"));

  m.def("stochasticity", [](const Model& model, const Dataset& ds, const std::string& metric) {
    const StochasticityReport rep = stochasticity(model, ds, metric_from_string(metric));
    py::dict out;
    out["distances"] = numpy_from_doubles(rep.distances);
    out["mean"] = rep.mean;
    out["std"] = rep.stddev;
    out["max_possible"] = rep.max_possible;
    out["histogram"] = numpy_from_sizes(rep.histogram);
    return out;
  }, py::arg("model"), py::arg("dataset"), py::arg("metric") = "euclidean",
     "Per-example softmax distance to the uniform distribution");

  m.def("evaluate_attack", [](const Model& model, const Dataset& ds, const std::string& kind,
                              double epsilon, double alpha, std::size_t steps, double step_size,
                              bool random_start, std::uint64_t seed) {
    const AttackSpec spec =
        attack_spec_from_args(kind, epsilon, alpha, steps, step_size, random_start, seed);
    const AttackAnalysis eval = evaluate_attack(model, ds, spec);
    py::dict out;
    out["clean_accuracy"] = eval.clean_accuracy;
    out["attack_success_rate"] = eval.attack_success_rate;
    out["robust_accuracy"] = eval.robust_accuracy;
    out["n_clean_correct"] = eval.n_clean_correct;
    out["n_flipped"] = eval.n_flipped;
    out["second_argmax_rate"] = eval.second_argmax.overall_rate;
    out["second_argmax_chance"] = eval.second_argmax.chance_level;
    out["second_argmax_empty"] = eval.second_argmax.empty_denominator;
    return out;
  }, py::arg("model"), py::arg("dataset"), py::arg("kind") = "PGD", py::arg("epsilon") = 0.1,
     py::arg("alpha") = 0.0, py::arg("steps") = 40, py::arg("step_size") = 0.0,
     py::arg("random_start") = false, py::arg("seed") = 0);

  m.def("pearson_correlation", [](const NpArray& xs, const NpArray& ys) {
    return pearson_correlation(std::span(xs.data(), static_cast<std::size_t>(xs.size())),
                               std::span(ys.data(), static_cast<std::size_t>(ys.size())));
  }, py::arg("xs"), py::arg("ys"));

  m.def("pca_project", [](const NpArray& points, std::size_t out_dims) {
    const PcaResult res = pca_project(tensor_from_numpy(points), out_dims);
    return py::make_tuple(numpy_from_tensor(res.scores),
                          numpy_from_doubles(res.explained_variance_ratio));
  }, py::arg("points"), py::arg("out_dims") = 2,
     "Mean-centered projection onto the leading principal components");

  // ---- harness ----------------------------------------------------------------------
  m.def("run_experiment", [](const std::string& config_path, const std::string& output_dir,
                             bool quiet) {
    ExperimentConfig cfg = parse_config_file(config_path);
    if (!output_dir.empty()) cfg.output_dir = output_dir;
    RunOptions opts;
    opts.quiet = quiet;
    const MetricsReport report = run_pipeline(cfg, opts);
    return report.run_id;
  }, py::arg("config_path"), py::arg("output_dir") = "", py::arg("quiet") = true,
     "Full experiment pipeline; returns the run id");
}
