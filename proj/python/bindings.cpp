#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "mmfusion/chunking.hpp"
#include "mmfusion/corpus.hpp"
#include "mmfusion/embeddings.hpp"
#include "mmfusion/error.hpp"
#include "mmfusion/harness.hpp"
#include "mmfusion/metrics.hpp"
#include "mmfusion/svm.hpp"

namespace py = pybind11;
using namespace mmf;

namespace {

Matrix to_matrix(const py::array_t<double, py::array::c_style | py::array::forcecast>& a) {
  if (a.ndim() != 2) throw ShapeError("expected a 2-D array, got " + std::to_string(a.ndim()) + " dimensions");
  Matrix m(static_cast<std::size_t>(a.shape(0)), static_cast<std::size_t>(a.shape(1)));
  std::copy(a.data(), a.data() + a.size(), m.data().begin());
  return m;
}

py::array_t<double> to_array(const Matrix& m) {
  py::array_t<double> out({m.rows(), m.cols()});
  std::copy(m.data().begin(), m.data().end(), out.mutable_data());
  return out;
}

// A fitted SVM over the caller's original label values.
struct PySvm {
  MulticlassSvm model;
  std::vector<int> labels;  // class index -> original label

  py::array_t<double> decision_function(const py::array_t<double, py::array::c_style | py::array::forcecast>& x) const {
    return to_array(predict(model, to_matrix(x)).values);
  }
  std::vector<int> predict_labels(const py::array_t<double, py::array::c_style | py::array::forcecast>& x) const {
    std::vector<int> out;
    for (int c : predict(model, to_matrix(x)).labels) out.push_back(labels[static_cast<std::size_t>(c)]);
    return out;
  }
};

PySvm fit_svm(const py::array_t<double, py::array::c_style | py::array::forcecast>& x, const std::vector<int>& y,
              const std::string& kernel, double C, std::optional<double> gamma, double tol) {
  PySvm out;
  out.labels = y;
  std::sort(out.labels.begin(), out.labels.end());
  out.labels.erase(std::unique(out.labels.begin(), out.labels.end()), out.labels.end());
  std::vector<int> idx;
  for (int v : y)
    idx.push_back(static_cast<int>(std::lower_bound(out.labels.begin(), out.labels.end(), v) - out.labels.begin()));
  out.model = train_svm_multiclass(to_matrix(x), idx, KernelSpec{parse_kernel_kind(kernel), gamma}, C, tol,
                                   std::max<std::size_t>(out.labels.size(), 2));
  return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Compiled core of mmfusion.";

  auto base = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<ConfigError>(m, "ConfigError", base.ptr());
  py::register_exception<ValidationError>(m, "ValidationError", base.ptr());
  py::register_exception<ParameterError>(m, "ParameterError", base.ptr());
  py::register_exception<DataError>(m, "DataError", base.ptr());
  py::register_exception<DegenerateDataError>(m, "DegenerateDataError", base.ptr());

  m.def(
      "derive_labels",
      [](int phq8, int pclc) {
        const auto l = derive_labels(phq8, pclc);
        py::dict d;
        d["dep_binary"] = l.dep_binary;
        d["ptsd_binary"] = l.ptsd_binary;
        d["dep_severity"] = l.dep_severity;
        d["ptsd_severity"] = l.ptsd_severity;
        d["multiclass"] = l.multiclass;
        return d;
      },
      py::arg("phq8"), py::arg("pclc"));

  m.def(
      "window_indices",
      [](std::size_t n, std::size_t window, std::size_t overlap) {
        std::vector<std::pair<std::size_t, std::size_t>> out;
        for (const auto& w : window_indices(n, window, overlap)) out.emplace_back(w.start_idx, w.end_idx);
        return out;
      },
      py::arg("n_items"), py::arg("window"), py::arg("overlap"));

  m.def("format_names", [](const std::vector<std::string>& names) {
    std::vector<std::string> out;
    for (const auto& n : names) out.push_back(parse_format(n).name());
    return out;
  });

  m.def(
      "generate_corpus",
      [](const std::string& path, std::size_t n_sessions, double signal, double noise_sigma, std::uint64_t seed) {
        SyntheticSpec s;
        s.n_sessions = n_sessions;
        s.text_signal = s.audio_signal = s.video_signal = signal;
        s.noise_sigma = noise_sigma;
        s.seed = seed;
        const auto corpus = generate_synthetic(s);
        save_corpus(path, corpus);
        return corpus.size();
      },
      py::arg("path"), py::arg("n_sessions") = 200, py::arg("signal") = 1.0, py::arg("noise_sigma") = 1.0,
      py::arg("seed") = 0);

  m.def("deterministic_embed", &deterministic_embed, py::arg("content"), py::arg("dim") = 256, py::arg("seed") = 0);

  m.def(
      "balanced_accuracy",
      [](const std::vector<int>& pred, const std::vector<int>& truth, std::size_t k) {
        return balanced_accuracy_multiclass(pred, truth, k);
      },
      py::arg("pred"), py::arg("truth"), py::arg("k") = 0);
  m.def(
      "accuracy", [](const std::vector<int>& p, const std::vector<int>& t) { return accuracy(p, t); }, py::arg("pred"),
      py::arg("truth"));
  m.def(
      "mae", [](const std::vector<double>& p, const std::vector<double>& t) { return mae(p, t); }, py::arg("pred"),
      py::arg("truth"));
  m.def(
      "classification_report",
      [](const std::vector<int>& pred, const std::vector<int>& truth, std::size_t k) {
        const auto r = classification_report(pred, truth, k);
        py::dict d;
        d["precision"] = r.precision;
        d["recall"] = r.recall;
        d["f1"] = r.f1;
        d["macro_f1"] = r.macro_f1;
        d["accuracy"] = r.accuracy;
        std::vector<std::vector<std::size_t>> cm(k, std::vector<std::size_t>(k));
        for (std::size_t i = 0; i < k; ++i)
          for (std::size_t j = 0; j < k; ++j) cm[i][j] = r.confusion(i, j);
        d["confusion"] = cm;
        return d;
      },
      py::arg("pred"), py::arg("truth"), py::arg("k"));

  py::class_<PySvm>(m, "SvmModel")
      .def_property_readonly("classes", [](const PySvm& s) { return s.labels; })
      .def("decision_function", &PySvm::decision_function, py::arg("x"))
      .def("predict", &PySvm::predict_labels, py::arg("x"));
  m.def("train_svm", &fit_svm, py::arg("x"), py::arg("y"), py::arg("kernel") = "linear", py::arg("C") = 1.0,
        py::arg("gamma") = py::none(), py::arg("tol") = 1e-3);

  m.def("run_config_text", [](const std::string& text) {
    ExperimentConfig c;
    {
      py::gil_scoped_release release;
      c = parse_config(text);
    }
    py::gil_scoped_release release;
    return run_result_to_json(run(c));
  });
  m.def("run_config_file", [](const std::string& path) {
    py::gil_scoped_release release;
    return run_result_to_json(run(load_config(path)));
  });
}
