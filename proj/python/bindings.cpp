#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "mifs/classify.hpp"
#include "mifs/conditioning.hpp"
#include "mifs/dataset.hpp"
#include "mifs/encoder.hpp"
#include "mifs/error.hpp"
#include "mifs/experiment.hpp"
#include "mifs/skipstack.hpp"

namespace py = pybind11;
using namespace mifs;

namespace {

py::dict report_dict(const ConditionReport& r) {
  py::dict d;
  d["beta"] = r.beta_empirical;
  d["lambda_max"] = r.lambda_max;
  d["lambda_min"] = r.lambda_min;
  d["lower"] = r.bound_lower;
  d["upper"] = r.bound_upper;
  d["delta_tau"] = r.delta_tau;
  d["t_min"] = r.t_min_required;
  return d;
}

nlohmann::json to_json(const py::object& obj) {
  if (obj.is_none()) return nlohmann::json::object();
  return nlohmann::json::parse(py::module_::import("json").attr("dumps")(obj).cast<std::string>());
}

}  // namespace

PYBIND11_MODULE(_mifs, m) {
  m.doc() = "Multi-skip feature stacking";
  m.attr("__version__") = kToolVersion;

  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const ValidationError& e) {
      PyErr_SetString(PyExc_ValueError, e.what());
    } catch (const NumericalError& e) {
      PyErr_SetString(PyExc_ArithmeticError, e.what());
    } catch (const IoError& e) {
      PyErr_SetString(PyExc_OSError, e.what());
    }
  });

  py::class_<LatentModel>(m, "LatentModel")
      .def_readonly("k", &LatentModel::k)
      .def_readonly("d", &LatentModel::d)
      .def_readonly("gammas", &LatentModel::gammas)
      .def_readonly("c", &LatentModel::c)
      .def_readonly("sigma", &LatentModel::sigma)
      .def_readonly("seed", &LatentModel::seed)
      .def_readonly("xbar", &LatentModel::xbar);
  m.def("new_model", &new_model, py::arg("k"), py::arg("d"), py::arg("gammas"), py::arg("c"), py::arg("sigma"),
        py::arg("seed"));

  py::class_<SkipSchedule>(m, "SkipSchedule")
      .def(py::init<double, int, std::vector<int>>(), py::arg("base_tau"), py::arg("levels"),
           py::arg("excluded") = std::vector<int>{})
      .def_static("for_frames", &SkipSchedule::for_frames, py::arg("frames"), py::arg("levels"),
                  py::arg("excluded") = std::vector<int>{})
      .def("tau", &SkipSchedule::tau)
      .def("budget", &SkipSchedule::budget)
      .def("active_levels", &SkipSchedule::active_levels)
      .def("total_budget", &SkipSchedule::total_budget)
      .def_property_readonly("label", &SkipSchedule::label);

  py::class_<FeatureMatrix>(m, "FeatureMatrix")
      .def_readonly("p", &FeatureMatrix::p)
      .def_readonly("f", &FeatureMatrix::f)
      .def_readonly("level_of_column", &FeatureMatrix::level_of_column);
  m.def(
      "mifs_stack",
      [](const LatentModel& model, const SkipSchedule& schedule, std::uint64_t seed, bool observe, unsigned threads) {
        return mifs_stack(model, schedule, Rng(seed), observe, threads);
      },
      py::arg("model"), py::arg("schedule"), py::arg("seed"), py::arg("observe") = true, py::arg("threads") = 1);

  m.def("condition_number", [](const Eigen::MatrixXd& p) { return report_dict(condition_number(p)); });
  m.def(
      "theorem1_bounds",
      [](double gamma1, double gammak, double c, double tau, int k, std::size_t t, double delta) {
        return report_dict(theorem1_bounds(gamma1, gammak, c, tau, k, t, delta));
      },
      py::arg("gamma1"), py::arg("gammak"), py::arg("c"), py::arg("tau"), py::arg("k"), py::arg("t"),
      py::arg("delta"));
  m.def(
      "theorem2_bounds",
      [](const std::vector<double>& gammas, double c, const SkipSchedule& schedule, double delta) {
        return report_dict(theorem2_bounds(gammas, c, schedule, delta));
      },
      py::arg("gammas"), py::arg("c"), py::arg("schedule"), py::arg("delta"));
  m.def("delta_tau", &delta_tau, py::arg("k"), py::arg("total_features"), py::arg("c"), py::arg("delta"));
  m.def(
      "corollary1_lower",
      [](int m_, double gamma1, double tau, double c) {
        const auto b = corollary1_lower(m_, gamma1, tau, c);
        return py::make_tuple(b.exponential, b.polynomial);
      },
      py::arg("m"), py::arg("gamma1"), py::arg("tau"), py::arg("c"));
  m.def("bernstein_bound", &bernstein_bound, py::arg("b"), py::arg("norm_es"), py::arg("p_dim"), py::arg("n"),
        py::arg("delta"));
  m.def(
      "spectrum", [](const Eigen::MatrixXd& x, int count) { return spectrum_curve(x, {}, count).sigmas; },
      py::arg("matrix"), py::arg("count") = 10);

  py::class_<CostReport>(m, "CostReport")
      .def_readonly("total_relative", &CostReport::total_relative)
      .def_property_readonly("budgets", [](const CostReport& r) {
        std::vector<std::size_t> b;
        for (const auto& l : r.levels) b.push_back(l.budget);
        return b;
      });
  m.def("level_cost_report", &level_cost_report);

  py::class_<GmmModel>(m, "GmmModel")
      .def_readonly("weights", &GmmModel::weights)
      .def_readonly("means", &GmmModel::means)
      .def_readonly("variances", &GmmModel::variances)
      .def_readonly("log_likelihood_trace", &GmmModel::log_likelihood_trace);
  m.def(
      "gmm_fit",
      [](const Eigen::MatrixXd& data, int components, int max_iters, std::uint64_t seed) {
        GmmOptions opt;
        opt.components = components;
        opt.max_iters = max_iters;
        Rng rng(seed);
        return gmm_fit(data, opt, rng);
      },
      py::arg("data"), py::arg("components"), py::arg("max_iters") = 100, py::arg("seed") = 0);
  m.def(
      "fisher_vector", [](const GmmModel& g, const Eigen::MatrixXd& x) { return fisher_vector(g, x).values; },
      py::arg("gmm"), py::arg("descriptors"));

  py::class_<LinearModel>(m, "LinearModel")
      .def_property_readonly("class_count", &LinearModel::class_count)
      .def("decision_function", [](const LinearModel& model, const Eigen::MatrixXd& x) { return predict(model, x).scores; })
      .def("predict", [](const LinearModel& model, const Eigen::MatrixXd& x) { return predict(model, x).labels; });
  m.def(
      "svm_train",
      [](const Eigen::MatrixXd& x, const std::vector<int>& labels, double c, std::uint64_t seed) {
        SvmOptions opt;
        opt.c = c;
        opt.seed = seed;
        return svm_train(x, labels, opt);
      },
      py::arg("x"), py::arg("labels"), py::arg("c") = 100.0, py::arg("seed") = 0);
  m.def(
      "evaluate_scores",
      [](const Eigen::MatrixXd& scores, const std::vector<int>& labels) {
        const auto r = evaluate_scores(scores, labels);
        py::dict d;
        d["macc"] = r.macc;
        d["map"] = r.map;
        d["warnings"] = r.warnings;
        return d;
      },
      py::arg("scores"), py::arg("labels"));

  m.def(
      "generate_dataset",
      [](std::uint64_t seed, const py::object& config) {
        const auto ds = generate_dataset(dataset_config_from_json(to_json(config), DatasetConfig{}), seed);
        py::list out;
        for (const auto& s : ds.samples) {
          py::dict d;
          d["series"] = s.series;
          d["label"] = s.label;
          d["speed"] = s.speed;
          d["train"] = s.train;
          out.append(d);
        }
        return out;
      },
      py::arg("seed"), py::arg("config") = py::none());
}
