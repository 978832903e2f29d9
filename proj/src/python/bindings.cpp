// Python extension module _mqttids.
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "mqttids/pipeline.hpp"

namespace py = pybind11;
using namespace mqttids;

namespace {

using Array2 = py::array_t<double, py::array::c_style | py::array::forcecast>;
using Labels = py::array_t<int, py::array::c_style | py::array::forcecast>;

Matrix to_matrix(const Array2& a) {
  if (a.ndim() != 2) throw Error(ErrorKind::InvalidSpec, "expected a 2-D feature array");
  const auto rows = static_cast<std::size_t>(a.shape(0));
  const auto cols = static_cast<std::size_t>(a.shape(1));
  return Matrix(rows, cols, std::vector<double>(a.data(), a.data() + rows * cols));
}

std::vector<int> to_labels(const Labels& a) {
  if (a.ndim() != 1) throw Error(ErrorKind::InvalidSpec, "expected a 1-D label array");
  return std::vector<int>(a.data(), a.data() + a.size());
}

Labels to_array(const std::vector<int>& v) {
  Labels out(static_cast<py::ssize_t>(v.size()));
  std::copy(v.begin(), v.end(), out.mutable_data());
  return out;
}

SynthSpec make_spec(std::size_t rows_per_class, std::size_t n_features, double separation, std::uint64_t seed,
                    const std::vector<std::string>& classes) {
  SynthSpec spec;
  spec.rows_per_class.clear();
  for (const auto& c : classes) spec.rows_per_class.emplace_back(c, rows_per_class);
  spec.n_features = n_features;
  spec.separation = separation;
  spec.seed = seed;
  validate(spec);
  return spec;
}

}  // namespace

PYBIND11_MODULE(_mqttids, m) {
  m.doc() = "MQTT intrusion detection toolkit";
  static py::exception<Error> error(m, "MqttidsError", PyExc_RuntimeError);
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      error(e.what());
    }
  });

  m.def("methods", [] {
    std::vector<std::string> names;
    for (Method method : all_methods()) names.push_back(to_string(method));
    return names;
  });

  const std::vector<std::string> default_classes{"legitimate", "dos", "bruteforce"};
  m.def(
      "generate",
      [](std::size_t rows_per_class, std::size_t n_features, double separation, std::uint64_t seed,
         const std::vector<std::string>& classes) {
        const Dataset ds = generate(make_spec(rows_per_class, n_features, separation, seed, classes));
        Array2 x({ds.size(), ds.width()});
        std::copy(ds.rows.data().begin(), ds.rows.data().end(), x.mutable_data());
        return py::make_tuple(x, to_array(ds.labels), ds.feature_names(), ds.label_names);
      },
      py::arg("rows_per_class") = 1000, py::arg("n_features") = 10, py::arg("separation") = 4.0,
      py::arg("seed") = 42, py::arg("classes") = default_classes);

  m.def(
      "synth",
      [](const std::filesystem::path& out, std::size_t rows_per_class, std::size_t n_features, double separation,
         std::uint64_t seed, const std::vector<std::string>& classes) {
        cmd_synth(make_spec(rows_per_class, n_features, separation, seed, classes), out);
      },
      py::arg("out"), py::arg("rows_per_class") = 1000, py::arg("n_features") = 10, py::arg("separation") = 4.0,
      py::arg("seed") = 42, py::arg("classes") = default_classes);

  m.def(
      "evaluate_json",
      [](const Labels& y_true, const Labels& y_pred, int n_classes, const std::vector<std::string>& label_names) {
        return to_json(make_report(confusion(to_labels(y_true), to_labels(y_pred), n_classes, label_names))).dump();
      },
      py::arg("y_true"), py::arg("y_pred"), py::arg("n_classes"), py::arg("label_names") = std::vector<std::string>{});

  m.def(
      "compare_json",
      [](const std::string& config_json) {
        const RunConfig config = run_config_from_json(nlohmann::json::parse(config_json));
        validate(config);
        py::gil_scoped_release release;
        cmd_compare(config);
        return read_json(config.output_dir / "compare.json").dump();
      },
      py::arg("config_json"));

  py::class_<Model>(m, "Model")
      .def_static(
          "fit",
          [](const std::string& method, const Array2& x, const Labels& y, std::uint64_t seed,
             const std::string& config_json) {
            MethodConfig config = config_json.empty() ? MethodConfig{}
                                                      : method_config_from_json(nlohmann::json::parse(config_json));
            config.method = method_from_string(method);
            const Matrix mx = to_matrix(x);
            const std::vector<int> my = to_labels(y);
            py::gil_scoped_release release;
            return fit_method(config, mx, my, seed);
          },
          py::arg("method"), py::arg("x"), py::arg("y"), py::arg("seed") = 42, py::arg("config_json") = "")
      .def("predict", [](const Model& model, const Array2& x) { return to_array(predict(model, to_matrix(x))); })
      .def("to_json", [](const Model& model) { return to_json(model).dump(); })
      .def_static("from_json", [](const std::string& text) { return model_from_json(nlohmann::json::parse(text)); })
      .def_property_readonly("method", [](const Model& model) { return to_string(model.method); })
      .def_property_readonly("n_classes", [](const Model& model) { return model.n_classes; })
      .def_property_readonly("n_features", [](const Model& model) { return model.n_features; });

  m.attr("__version__") = "0.1.0";
}
