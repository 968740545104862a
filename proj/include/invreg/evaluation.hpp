#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <nlohmann/json_fwd.hpp>

#include "invreg/dataset.hpp"
#include "invreg/estimators.hpp"

namespace invreg {

double rmse(const Eigen::VectorXd& pred, const Eigen::VectorXd& truth);

// mean squared error divided by the variance of the truth (divisor n)
double nmse(const Eigen::VectorXd& pred, const Eigen::VectorXd& truth);

// Mean of the scores at or above the empirical q-quantile (linear
// interpolation of order statistics); q = 0 is the plain mean.
double cvar(std::vector<double> scores, double q);

// Pearson correlation of average-tie ranks. Requires at least two distinct
// values on each side.
double spearman(const Eigen::VectorXd& pred, const Eigen::VectorXd& truth);

// Centered moving average with the window truncated at the boundaries;
// output length equals input length. An even window extends one element
// further to the right than to the left.
Eigen::VectorXd moving_average(const Eigen::VectorXd& series, int window);

// One leave-one-environment-out evaluation run for a single method.
struct ProtocolConfig {
  Method method = Method::Mir;
  std::vector<double> grid;  // hyperparameter values; must be non-empty
  Weighting weighting = Weighting::Pooled;
  int n_labeled = 2;  // environments given labels per trial
  int trials = 1;
  std::uint64_t seed = 1;
  bool oracle_mode = false;  // select the hyperparameter on the test env
  int group_dro_iterations = 500;
  double jitter = 0.0;
};

struct EvalRecord {
  EnvironmentId test_env;
  int trial = 0;
  double selected = 0.0;
  double rmse_value = 0.0;
  double nmse_value = 0.0;
  double spearman_value = 0.0;  // NaN when ranks are degenerate
};

struct MetricAggregate {
  double mean = 0.0;
  double standard_error = 0.0;
  int count = 0;
};

struct EvalReport {
  Method method = Method::Mir;
  int n_labeled = 0;
  bool oracle_mode = false;
  std::vector<EvalRecord> records;

  MetricAggregate rmse_aggregate() const;
  MetricAggregate nmse_aggregate() const;
  MetricAggregate spearman_aggregate() const;  // over finite records
};

struct SelectionResult {
  double selected = 0.0;
  // (grid value, mean held-out MSE across folds), ascending in value
  std::vector<std::pair<double, double>> grid_scores;
};

// Leave-one-environment-out cross-validation over the labeled environments:
// each fold holds out one labeled environment, fits on the rest and scores
// MSE on the held-out one. The unlabeled view is used as passed (it spans
// all training environments of the outer split, including environments
// whose labels are masked). Ties select the smallest value.
SelectionResult loeo_hyperparam_select(const LabeledView& labeled,
                                       const UnlabeledView& unlabeled,
                                       Method method,
                                       const std::vector<double>& grid,
                                       Weighting weighting,
                                       int group_dro_iterations = 500,
                                       double jitter = 0.0);

// Full protocol: hold out each environment in turn, draw n_labeled labeled
// environments from the rest (seeded per (seed, env, trial)), select the
// hyperparameter, fit on all drawn labeled data, and score on the held-out
// environment. Invariance-regularized methods see unlabeled data from all
// training environments regardless of n_labeled. When n_labeled equals the
// number of available labeled environments a single trial is run.
EvalReport run_loeo_protocol(const MultiEnvDataset& dataset,
                             const ProtocolConfig& config);

void write_report_csv(const std::string& path,
                      const std::vector<EvalReport>& reports);
nlohmann::json report_to_json(const EvalReport& report);

}  // namespace invreg
