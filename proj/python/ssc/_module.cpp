#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "ssc/corpus/corpus.hpp"
#include "ssc/forest/forest.hpp"
#include "ssc/geometry/delaunay.hpp"
#include "ssc/geometry/features.hpp"
#include "ssc/geometry/stats.hpp"
#include "ssc/pipeline/pipeline.hpp"
#include "ssc/train/harness.hpp"
#include "ssc/wsi/inference.hpp"

namespace py = pybind11;
using namespace ssc;

namespace {

using Rgb = py::array_t<float, py::array::c_style | py::array::forcecast>;

py::array_t<float> to_numpy(const RgbImage& img) {
  py::array_t<float> out({img.height, img.width, 3});
  auto v = out.mutable_unchecked<3>();
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x)
      for (int c = 0; c < 3; ++c) v(y, x, c) = img.at(c, y, x);
  return out;
}

RgbImage from_numpy(const Rgb& a) {
  if (a.ndim() != 3 || a.shape(2) != 3) throw ShapeError("expected an (H, W, 3) array");
  RgbImage img(static_cast<int>(a.shape(1)), static_cast<int>(a.shape(0)));
  auto v = a.unchecked<3>();
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x)
      for (int c = 0; c < 3; ++c) img.at(c, y, x) = v(y, x, c);
  return img;
}

template <typename T>
py::array_t<T> grid_to_numpy(const Grid<T>& g) {
  py::array_t<T> out({g.rows(), g.cols()});
  std::copy(g.cells().begin(), g.cells().end(), out.mutable_data());
  return out;
}

forest::Dataset dataset(const std::vector<std::vector<double>>& x, const std::vector<int>& y) {
  forest::Dataset d;
  d.rows = x;
  d.labels = y;
  return d;
}

}  // namespace

PYBIND11_MODULE(_ssc, m) {
  m.doc() = "Core routines of the slide classification pipeline";

  static py::exception<Error> error(m, "Error");
  static py::exception<ConfigError> config_error(m, "ConfigError", error.ptr());
  static py::exception<IoError> io_error(m, "IoError", error.ptr());
  static py::exception<DegenerateGeometry> degenerate(m, "DegenerateGeometry", error.ptr());
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const ConfigError& e) {
      PyErr_SetString(config_error.ptr(), e.what());
    } catch (const IoError& e) {
      PyErr_SetString(io_error.ptr(), e.what());
    } catch (const DegenerateGeometry& e) {
      PyErr_SetString(degenerate.ptr(), e.what());
    } catch (const Error& e) {
      PyErr_SetString(error.ptr(), e.what());
    }
  });

  m.def(
      "roc_auc",
      [](const std::vector<double>& scores, const std::vector<int>& labels) {
        auto r = forest::roc_auc(scores, labels);
        std::vector<std::tuple<double, double, double>> pts;
        for (const auto& p : r.points) pts.emplace_back(p.threshold, p.fpr, p.tpr);
        return py::make_tuple(r.auc, pts);
      },
      py::arg("scores"), py::arg("labels"), "AUC and the (threshold, fpr, tpr) sweep");

  m.def(
      "bootstrap_ci",
      [](const std::vector<double>& scores, const std::vector<int>& labels,
         const std::vector<std::string>& patients, int n, double level, std::uint64_t seed) {
        auto ci = forest::bootstrap_ci(scores, labels, patients, n, level, seed);
        return py::make_tuple(ci.low, ci.high);
      },
      py::arg("scores"), py::arg("labels"), py::arg("patients"), py::arg("n") = 1000,
      py::arg("level") = 0.95, py::arg("seed") = 0);

  m.def(
      "stats4",
      [](const std::vector<double>& v) {
        auto s = geometry::stats4(v);
        return py::dict(py::arg("mean") = s.mean, py::arg("std") = s.std,
                        py::arg("median") = s.median, py::arg("iqr") = s.iqr);
      },
      "mean, population std, median and IQR");

  m.def(
      "delaunay",
      [](const std::vector<std::pair<double, double>>& pts) {
        std::vector<geometry::Point> p;
        for (auto [x, y] : pts) p.push_back({x, y});
        auto g = geometry::delaunay(p);
        std::vector<std::pair<double, double>> nodes;
        for (const auto& n : g.nodes) nodes.emplace_back(n.x, n.y);
        return py::make_tuple(nodes, g.triangles, g.edges);
      },
      "nodes (sorted, deduplicated), triangles and edges");

  m.def("negative_weight_at", &train::negative_weight_at, py::arg("epoch"),
        py::arg("growth") = 1.0034);

  m.def(
      "lr_trace",
      [](const std::vector<double>& metrics) {
        train::LrScheduleState s;
        std::vector<double> out;
        for (double v : metrics) {
          out.push_back(s.learning_rate);
          s = train::lr_step(s, v);
        }
        return out;
      },
      "learning rate in force at each epoch of a metric sequence");

  m.def("feature_names", [] {
    std::vector<std::string> out;
    for (const auto& f : geometry::default_manifest().features) out.push_back(f.name);
    return out;
  });

  m.def(
      "generate_slide",
      [](std::uint64_t seed, int index, bool cancer, int size) {
        corpus::CorpusConfig c;
        c.seed = seed;
        c.size = size;
        auto s = corpus::generate_slide(c, index, cancer, "S", "P");
        return py::dict(py::arg("rgb") = to_numpy(s.image.rgb),
                        py::arg("truth") = grid_to_numpy(s.truth),
                        py::arg("fractions") = s.fractions);
      },
      py::arg("seed"), py::arg("index") = 0, py::arg("cancer") = true, py::arg("size") = 256);

  m.def(
      "background_mask", [](const Rgb& rgb) { return grid_to_numpy(wsi::background_mask(from_numpy(rgb))); },
      "tissue mask of an (H, W, 3) image in [0, 1]");

  m.def("config_defaults", [] {
    pipeline::Config c;
    py::dict d;
    for (const auto& e : c.entries()) d[py::str(e.key)] = e.value;
    return d;
  });

  m.def(
      "run_stage",
      [](const std::string& stage, const std::map<std::string, std::string>& settings) {
        pipeline::Config c;
        for (const auto& [k, v] : settings) c.set(k, v);
        py::gil_scoped_release release;
        if (stage == "gen-corpus") pipeline::gen_corpus(c);
        else if (stage == "train-cnn1") pipeline::train_cnn(c, 1);
        else if (stage == "train-cnn2") pipeline::train_cnn(c, 2);
        else if (stage == "mine") pipeline::mine(c);
        else if (stage == "infer") pipeline::infer(c);
        else if (stage == "features") pipeline::features(c);
        else if (stage == "train-rf") pipeline::train_rf(c);
        else if (stage == "evaluate") pipeline::evaluate(c);
        else if (stage == "run-all") pipeline::run_all(c);
        else throw ConfigError("unknown stage '" + stage + "'");
      },
      py::arg("stage"), py::arg("settings") = std::map<std::string, std::string>{});

  py::class_<forest::ForestModel>(m, "RandomForest")
      .def_static(
          "fit",
          [](const std::vector<std::vector<double>>& x, const std::vector<int>& y, int n_trees,
             std::uint64_t seed) {
            forest::ForestConfig c;
            c.n_trees = n_trees;
            c.seed = seed;
            return forest::rf_train(dataset(x, y), c);
          },
          py::arg("x"), py::arg("y"), py::arg("n_trees") = 100, py::arg("seed") = 0)
      .def("predict",
           [](const forest::ForestModel& f, const std::vector<std::vector<double>>& x) {
             std::vector<double> out;
             for (const auto& row : x) out.push_back(forest::rf_predict(f, row));
             return out;
           })
      .def("to_json", [](const forest::ForestModel& f) { return forest::to_json(f); })
      .def_static("from_json", &forest::forest_from_json)
      .def_property_readonly("n_trees", [](const forest::ForestModel& f) { return f.trees.size(); });
}
