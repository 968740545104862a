// Python bindings for the main operations: dataset construction, the
// regularizer matrices, the fitting paths, metrics and the evaluation
// protocol.

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <cmath>
#include <memory>
#include <optional>

#include <nlohmann/json.hpp>

#include "invreg/dataset.hpp"
#include "invreg/estimators.hpp"
#include "invreg/evaluation.hpp"
#include "invreg/moments.hpp"
#include "invreg/scm.hpp"

namespace py = pybind11;
using namespace invreg;

namespace {

using DatasetPtr = std::shared_ptr<MultiEnvDataset>;

DatasetPtr dataset_from_arrays(const Eigen::MatrixXd& features,
                               std::optional<Eigen::VectorXd> outcomes,
                               const std::vector<std::string>& envs) {
  Eigen::VectorXd y;
  if (outcomes) y = *outcomes;  // NaN entries mark unlabeled rows
  return std::make_shared<MultiEnvDataset>(
      MultiEnvDataset::from_rows(features, y, envs));
}

std::pair<LabeledView, UnlabeledView> views_of(
    const MultiEnvDataset& ds,
    const std::optional<std::vector<std::string>>& labeled_envs) {
  return split_views(ds, labeled_envs);
}

FitOptions options_of(const std::string& weighting, double jitter) {
  return FitOptions{weighting_from_name(weighting), jitter};
}

py::object json_to_py(const nlohmann::json& j) {
  const py::module_ json_mod = py::module_::import("json");
  return json_mod.attr("loads")(j.dump());
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "invariant regularization for anti-causal multi-environment "
            "regression";
  m.attr("__version__") = "0.1.0";

  py::class_<MultiEnvDataset, DatasetPtr>(m, "Dataset")
      .def_static("from_arrays", &dataset_from_arrays, py::arg("features"),
                  py::arg("outcomes") = std::nullopt, py::arg("envs"),
                  "Build a dataset from an (n, d) feature matrix, an optional "
                  "outcome vector (NaN entries are unlabeled) and one "
                  "environment id per row.")
      .def_property_readonly("n_rows", &MultiEnvDataset::rows)
      .def_property_readonly("n_features", &MultiEnvDataset::dim)
      .def_property_readonly("n_environments", &MultiEnvDataset::env_count)
      .def_property_readonly("environments", &MultiEnvDataset::environments)
      .def_property_readonly("labeled_environments",
                             &MultiEnvDataset::labeled_environments)
      .def("features",
           [](const MultiEnvDataset& ds) { return ds.features(); })
      .def("outcomes",
           [](const MultiEnvDataset& ds) { return ds.outcomes(); })
      .def("env_of_row", [](const MultiEnvDataset& ds) {
        std::vector<std::string> out;
        out.reserve(ds.rows());
        for (Eigen::Index r = 0; r < ds.rows(); ++r)
          out.push_back(ds.environment(ds.env_index_of_row(r)));
        return out;
      });

  m.def(
      "load_csv",
      [](const std::string& path, const std::string& env_column,
         std::optional<std::string> outcome_column,
         const std::vector<std::string>& feature_columns) {
        ColumnSchema schema{env_column, std::move(outcome_column),
                            feature_columns};
        return std::make_shared<MultiEnvDataset>(
            load_csv_dataset(path, schema));
      },
      py::arg("path"), py::arg("env_column"),
      py::arg("outcome_column") = std::nullopt,
      py::arg("feature_columns") = std::vector<std::string>{});

  m.def("center_per_environment", [](const MultiEnvDataset& ds) {
    return std::make_shared<MultiEnvDataset>(center_per_environment(ds));
  });

  m.def(
      "h_mir",
      [](const MultiEnvDataset& ds) {
        const auto [_, unlabeled] = views_of(ds, std::nullopt);
        return mir_regularizer(env_moment_summaries(unlabeled)).h;
      },
      py::arg("dataset"),
      "Covariance of the per-environment feature means (d x d).");
  m.def(
      "h_vir",
      [](const MultiEnvDataset& ds) {
        const auto [_, unlabeled] = views_of(ds, std::nullopt);
        return vir_regularizer(env_moment_summaries(unlabeled)).h;
      },
      py::arg("dataset"),
      "Averaged squared deviation of the per-environment covariances (d x d).");
  m.def(
      "h_combined",
      [](const MultiEnvDataset& ds, double weight_mean, double weight_cov) {
        const auto [_, unlabeled] = views_of(ds, std::nullopt);
        return combined_regularizer(env_moment_summaries(unlabeled),
                                    weight_mean, weight_cov)
            .h;
      },
      py::arg("dataset"), py::arg("weight_mean"), py::arg("weight_cov"));
  m.def(
      "vir_penalty",
      [](const MultiEnvDataset& ds, const Eigen::VectorXd& beta) {
        const auto [_, unlabeled] = views_of(ds, std::nullopt);
        return vir_penalty(env_moment_summaries(unlabeled), beta);
      },
      py::arg("dataset"), py::arg("beta"));
  m.def(
      "vir_alternative_penalty",
      [](const MultiEnvDataset& ds, const Eigen::VectorXd& beta) {
        const auto [_, unlabeled] = views_of(ds, std::nullopt);
        return vir_alternative_penalty(env_moment_summaries(unlabeled), beta);
      },
      py::arg("dataset"), py::arg("beta"));

  py::class_<FittedModel>(m, "Model")
      .def_property_readonly("beta",
                             [](const FittedModel& m_) { return m_.beta; })
      .def_property_readonly(
          "x_offset", [](const FittedModel& m_) { return m_.x_offset; })
      .def_property_readonly(
          "y_offset", [](const FittedModel& m_) { return m_.y_offset; })
      .def_property_readonly(
          "method",
          [](const FittedModel& m_) { return method_name(m_.method); })
      .def_property_readonly(
          "gammas", [](const FittedModel& m_) { return m_.gammas; })
      .def_property_readonly(
          "labeled_envs",
          [](const FittedModel& m_) { return m_.labeled_envs; })
      .def_property_readonly(
          "converged", [](const FittedModel& m_) { return m_.converged; })
      .def("predict",
           [](const FittedModel& m_, const Eigen::MatrixXd& x) {
             return predict(m_, x);
           })
      .def("save", [](const FittedModel& m_, const std::string& path) {
        save_model(path, m_);
      })
      .def_static("load", &load_model);

  const auto no_envs = std::optional<std::vector<std::string>>{};

  m.def(
      "fit_mir",
      [](const MultiEnvDataset& ds, double gamma, const std::string& weighting,
         std::optional<std::vector<std::string>> labeled_envs, double jitter) {
        const auto [labeled, unlabeled] = views_of(ds, labeled_envs);
        return fit_mir(labeled, unlabeled, gamma, options_of(weighting, jitter));
      },
      py::arg("dataset"), py::arg("gamma"), py::arg("weighting") = "pooled",
      py::arg("labeled_envs") = no_envs, py::arg("jitter") = 0.0);
  m.def(
      "fit_vir",
      [](const MultiEnvDataset& ds, double gamma, const std::string& weighting,
         std::optional<std::vector<std::string>> labeled_envs, double jitter) {
        const auto [labeled, unlabeled] = views_of(ds, labeled_envs);
        return fit_vir(labeled, unlabeled, gamma, options_of(weighting, jitter));
      },
      py::arg("dataset"), py::arg("gamma"), py::arg("weighting") = "pooled",
      py::arg("labeled_envs") = no_envs, py::arg("jitter") = 0.0);
  m.def(
      "fit_mir_vir",
      [](const MultiEnvDataset& ds, double gamma_mean, double gamma_cov,
         const std::string& weighting,
         std::optional<std::vector<std::string>> labeled_envs, double jitter) {
        const auto [labeled, unlabeled] = views_of(ds, labeled_envs);
        return fit_mir_vir(labeled, unlabeled, gamma_mean, gamma_cov,
                           options_of(weighting, jitter));
      },
      py::arg("dataset"), py::arg("gamma_mean"), py::arg("gamma_cov"),
      py::arg("weighting") = "pooled", py::arg("labeled_envs") = no_envs,
      py::arg("jitter") = 0.0);
  m.def(
      "fit_ols",
      [](const MultiEnvDataset& ds, const std::string& weighting,
         std::optional<std::vector<std::string>> labeled_envs, double jitter) {
        const auto [labeled, unlabeled] = views_of(ds, labeled_envs);
        return fit_ols(labeled, options_of(weighting, jitter));
      },
      py::arg("dataset"), py::arg("weighting") = "pooled",
      py::arg("labeled_envs") = no_envs, py::arg("jitter") = 0.0);
  m.def(
      "fit_ridge",
      [](const MultiEnvDataset& ds, double alpha,
         std::optional<std::vector<std::string>> labeled_envs, double jitter) {
        const auto [labeled, unlabeled] = views_of(ds, labeled_envs);
        return fit_pooled_ridge(labeled, alpha, jitter);
      },
      py::arg("dataset"), py::arg("alpha"), py::arg("labeled_envs") = no_envs,
      py::arg("jitter") = 0.0);
  m.def(
      "fit_anchor",
      [](const MultiEnvDataset& ds, double gamma,
         std::optional<std::vector<std::string>> labeled_envs, double jitter) {
        const auto [labeled, unlabeled] = views_of(ds, labeled_envs);
        return fit_anchor(labeled, gamma, options_of("pooled", jitter));
      },
      py::arg("dataset"), py::arg("gamma"), py::arg("labeled_envs") = no_envs,
      py::arg("jitter") = 0.0);
  m.def(
      "fit_group_dro",
      [](const MultiEnvDataset& ds, double step_size, int iterations,
         const std::string& weighting,
         std::optional<std::vector<std::string>> labeled_envs, double jitter) {
        const auto [labeled, unlabeled] = views_of(ds, labeled_envs);
        GroupDroOptions options;
        options.iterations = iterations;
        options.weighting = weighting_from_name(weighting);
        options.jitter = jitter;
        return fit_group_dro(labeled, step_size, options);
      },
      py::arg("dataset"), py::arg("step_size"), py::arg("iterations") = 500,
      py::arg("weighting") = "pooled", py::arg("labeled_envs") = no_envs,
      py::arg("jitter") = 0.0);
  m.def(
      "fit_general_loss",
      [](const MultiEnvDataset& ds, const Eigen::MatrixXd& h, double gamma,
         const std::string& loss, double huber_delta,
         std::optional<std::vector<std::string>> labeled_envs) {
        const auto [labeled, unlabeled] = views_of(ds, labeled_envs);
        GeneralLossOptions options;
        if (loss == "squared") options.loss = LossKind::Squared;
        else if (loss == "logistic") options.loss = LossKind::Logistic;
        else if (loss == "huber") options.loss = LossKind::Huber;
        else throw std::invalid_argument("unknown loss: " + loss);
        options.huber_delta = huber_delta;
        return fit_general_loss(labeled, h, gamma, options);
      },
      py::arg("dataset"), py::arg("h"), py::arg("gamma"),
      py::arg("loss") = "squared", py::arg("huber_delta") = 1.0,
      py::arg("labeled_envs") = no_envs);

  m.def("rmse", &rmse, py::arg("pred"), py::arg("truth"));
  m.def("nmse", &nmse, py::arg("pred"), py::arg("truth"));
  m.def("cvar", &cvar, py::arg("scores"), py::arg("q"));
  m.def("spearman", &spearman, py::arg("pred"), py::arg("truth"));
  m.def("moving_average", &moving_average, py::arg("series"),
        py::arg("window"));

  m.def(
      "run_loeo",
      [](const MultiEnvDataset& ds, const std::string& method,
         const std::vector<double>& grid, int n_labeled, int trials,
         std::uint64_t seed, const std::string& weighting, bool oracle_mode) {
        ProtocolConfig config;
        config.method = method_from_name(method);
        config.grid = grid;
        config.n_labeled = n_labeled;
        config.trials = trials;
        config.seed = seed;
        config.weighting = weighting_from_name(weighting);
        config.oracle_mode = oracle_mode;
        return json_to_py(report_to_json(run_loeo_protocol(ds, config)));
      },
      py::arg("dataset"), py::arg("method"), py::arg("grid"),
      py::arg("n_labeled"), py::arg("trials") = 1, py::arg("seed") = 1,
      py::arg("weighting") = "pooled", py::arg("oracle_mode") = false,
      "Leave-one-environment-out protocol; returns the report as a dict.");
}
