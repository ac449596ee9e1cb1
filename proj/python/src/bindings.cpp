#include "modt/data.hpp"
#include "modt/error.hpp"
#include "modt/predict.hpp"
#include "modt/trainer.hpp"
#include "modt/viz.hpp"

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <optional>
#include <string>

namespace py = pybind11;
using namespace modt;

namespace {

// A dataset plus the one-hot layout it was read with, if it came from a CSV.
struct Table {
  Dataset data;
  std::optional<FeatureEncoding> encoding;
};

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

Table make_table(const RowMatrix& X, const std::vector<int>& y, std::vector<std::string> class_names,
                 std::vector<std::string> feature_names) {
  if (static_cast<std::size_t>(X.rows()) != y.size())
    throw Error(ErrorKind::WidthMismatch, "X has " + std::to_string(X.rows()) + " rows but y has " +
                                              std::to_string(y.size()) + " labels");
  int top = -1;
  for (int label : y) {
    if (label < 0) throw Error(ErrorKind::UnknownLabel, "labels must be nonnegative");
    top = std::max(top, label);
  }
  if (class_names.empty())
    for (int c = 0; c <= top; ++c) class_names.push_back(std::to_string(c));
  if (static_cast<int>(class_names.size()) <= top)
    throw Error(ErrorKind::UnknownLabel, "label " + std::to_string(top) + " has no class name");
  if (feature_names.empty())
    for (Eigen::Index f = 0; f < X.cols(); ++f) feature_names.push_back("x" + std::to_string(f));
  if (static_cast<Eigen::Index>(feature_names.size()) != X.cols())
    throw Error(ErrorKind::WidthMismatch, "feature_names does not match the column count");
  Table t;
  t.data.X = X;
  t.data.y = y;
  t.data.class_names = std::move(class_names);
  t.data.feature_names = std::move(feature_names);
  return t;
}

Table load_table(const std::filesystem::path& csv, const std::filesystem::path& schema) {
  const RawDataset raw = load_csv(csv, Schema::load(schema));
  Table t;
  t.encoding = FeatureEncoding::fit(raw);
  t.data = t.encoding->apply(raw);
  return t;
}

Table load_for(const MoDTModel& model, const std::filesystem::path& csv) {
  if (!model.encoding) throw Error(ErrorKind::InvalidConfig, "model carries no CSV encoding; pass a schema");
  Table t;
  t.encoding = model.encoding;
  t.data = model.encoding->apply(load_csv(csv, model.encoding->schema()));
  return t;
}

std::string gate_name(const TrainConfig& c) { return to_string(c.gate); }

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Mixture of decision trees with a linear softmax gate";

  static py::exception<Error> error(m, "Error", PyExc_ValueError);
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      py::set_error(error, (std::string(to_string(e.kind())) + ": " + e.what()).c_str());
    }
  });

  py::class_<Table>(m, "Dataset")
      .def(py::init(&make_table), py::arg("X"), py::arg("y"), py::arg("class_names") = std::vector<std::string>{},
           py::arg("feature_names") = std::vector<std::string>{})
      .def_property_readonly("X", [](const Table& t) -> RowMatrix { return t.data.X; })
      .def_property_readonly("y", [](const Table& t) { return t.data.y; })
      .def_property_readonly("class_names", [](const Table& t) { return t.data.class_names; })
      .def_property_readonly("feature_names", [](const Table& t) { return t.data.feature_names; })
      .def("__len__", [](const Table& t) { return t.data.rows(); })
      .def(
          "split",
          [](const Table& t, double test_fraction, std::uint64_t seed) {
            auto [train, test] = train_test_split(t.data, test_fraction, seed);
            return py::make_tuple(Table{std::move(train), t.encoding}, Table{std::move(test), t.encoding});
          },
          py::arg("test_fraction") = 0.25, py::arg("seed") = 0)
      .def("__repr__", [](const Table& t) {
        return "<Dataset rows=" + std::to_string(t.data.rows()) + " features=" + std::to_string(t.data.features()) +
               " classes=" + std::to_string(t.data.classes()) + ">";
      });

  m.def("load_dataset", &load_table, py::arg("csv"), py::arg("schema"));

  py::class_<TrainConfig>(m, "TrainConfig")
      .def(py::init<>())
      .def_readwrite("experts", &TrainConfig::experts)
      .def_readwrite("max_depth", &TrainConfig::max_depth)
      .def_readwrite("gamma", &TrainConfig::gamma)
      .def_readwrite("iterations", &TrainConfig::iterations)
      .def_readwrite("seed", &TrainConfig::seed)
      .def_readwrite("early_stop", &TrainConfig::early_stop)
      .def_readwrite("threads", &TrainConfig::threads)
      .def_property(
          "gate", &gate_name, [](TrainConfig& c, const std::string& s) { c.gate = parse_gate_kind(s); })
      .def_property(
          "selection", [](const TrainConfig& c) { return std::string(to_string(c.selection)); },
          [](TrainConfig& c, const std::string& s) { c.selection = parse_selection_method(s); })
      .def_property(
          "model_selection", [](const TrainConfig& c) { return std::string(to_string(c.model_selection)); },
          [](TrainConfig& c, const std::string& s) { c.model_selection = parse_model_selection(s); })
      .def_property(
          "features",
          [](const TrainConfig& c) -> std::optional<std::pair<std::size_t, std::size_t>> {
            if (!c.features) return std::nullopt;
            return std::pair{c.features->first, c.features->second};
          },
          [](TrainConfig& c, std::optional<std::pair<std::size_t, std::size_t>> f) {
            if (f) {
              c.features = FeaturePair{f->first, f->second};
              c.selection = SelectionMethod::Manual;
            } else {
              c.features.reset();
            }
          })
      .def("validate", &TrainConfig::validate);

  py::class_<MoDTModel>(m, "Model")
      .def_property_readonly("experts", &MoDTModel::experts)
      .def_property_readonly("class_names", [](const MoDTModel& mo) { return mo.class_names; })
      .def_property_readonly("feature_names", [](const MoDTModel& mo) { return mo.feature_names; })
      .def_property_readonly("gate", [](const MoDTModel& mo) { return std::string(to_string(mo.gating.mode.kind)); })
      .def_property_readonly("gate_features",
                             [](const MoDTModel& mo) -> std::optional<std::pair<std::size_t, std::size_t>> {
                               if (!mo.gating.mode.is_two_d()) return std::nullopt;
                               return std::pair{mo.gating.mode.features.first, mo.gating.mode.features.second};
                             })
      .def_property_readonly("theta", [](const MoDTModel& mo) -> Matrix { return mo.gating.theta; })
      .def_property_readonly("config", [](const MoDTModel& mo) { return mo.meta.config; })
      .def_property_readonly("training_accuracy", [](const MoDTModel& mo) { return mo.meta.training_accuracy; })
      .def_property_readonly("selected_iteration", [](const MoDTModel& mo) { return mo.meta.selected_iteration; })
      .def("predict", [](const MoDTModel& mo, const RowMatrix& X) { return predict(mo, X); }, py::arg("X"))
      .def(
          "predict_experts",
          [](const MoDTModel& mo, const RowMatrix& X) {
            std::vector<std::size_t> out;
            for (const auto& p : predict_detailed(mo, X)) out.push_back(p.expert);
            return out;
          },
          py::arg("X"))
      .def("gate_values", [](const MoDTModel& mo, const RowMatrix& X) -> Matrix { return mo.gating.values(X); },
           py::arg("X"))
      .def("evaluate", [](const MoDTModel& mo, const Table& t) { return evaluate(mo, t.data); }, py::arg("dataset"))
      .def("load_dataset", &load_for, py::arg("csv"))
      .def("to_json", &model_to_json)
      .def("save", [](const MoDTModel& mo, const std::filesystem::path& p) { save_model(mo, p); }, py::arg("path"))
      .def(
          "render_gate",
          [](const MoDTModel& mo, const Table& t, std::size_t resolution) {
            return render_gating_plot({mo, t.data, resolution, {}, {}});
          },
          py::arg("dataset"), py::arg("resolution") = 300)
      .def(
          "render_tree",
          [](const MoDTModel& mo, std::size_t expert) {
            if (expert >= mo.experts()) throw py::index_error("no expert " + std::to_string(expert));
            return render_tree(
                {mo.trees[expert], mo.feature_names, mo.class_names, {}, "Expert " + std::to_string(expert)});
          },
          py::arg("expert"));

  m.def(
      "train",
      [](const Table& t, const TrainConfig& config) {
        MoDTModel model;
        {
          py::gil_scoped_release release;
          model = train(t.data, config);
        }
        model.encoding = t.encoding;
        return model;
      },
      py::arg("dataset"), py::arg("config") = TrainConfig{});
  m.def("load_model", [](const std::filesystem::path& p) { return load_model(p); }, py::arg("path"));
  m.def("model_from_json", &model_from_json, py::arg("text"));
}
