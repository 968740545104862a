#include "invreg/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "invreg/linalg.hpp"
#include "invreg/rng.hpp"

namespace invreg {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

Eigen::VectorXd average_ranks(const Eigen::VectorXd& values) {
  const Eigen::Index n = values.size();
  std::vector<Eigen::Index> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
    return values[a] < values[b];
  });
  Eigen::VectorXd ranks(n);
  Eigen::Index i = 0;
  while (i < n) {
    Eigen::Index j = i;
    while (j + 1 < n && values[order[j + 1]] == values[order[i]]) ++j;
    const double avg = 0.5 * static_cast<double>(i + j) + 1.0;  // 1-based
    for (Eigen::Index k = i; k <= j; ++k) ranks[order[k]] = avg;
    i = j + 1;
  }
  return ranks;
}

MetricAggregate aggregate_of(const std::vector<double>& values) {
  MetricAggregate agg;
  std::vector<double> finite;
  for (double v : values)
    if (std::isfinite(v)) finite.push_back(v);
  agg.count = static_cast<int>(finite.size());
  if (finite.empty()) {
    agg.mean = kNaN;
    agg.standard_error = kNaN;
    return agg;
  }
  double sum = 0.0;
  for (double v : finite) sum += v;
  agg.mean = sum / finite.size();
  if (finite.size() > 1) {
    double ss = 0.0;
    for (double v : finite) ss += (v - agg.mean) * (v - agg.mean);
    agg.standard_error =
        std::sqrt(ss / (finite.size() - 1)) / std::sqrt(double(finite.size()));
  }
  return agg;
}

FittedModel fit_with_method(Method method, const LabeledView& labeled,
                            const UnlabeledView& unlabeled, double value,
                            Weighting weighting, int dro_iterations,
                            double jitter) {
  const FitOptions options{weighting, jitter};
  switch (method) {
    case Method::Mir: return fit_mir(labeled, unlabeled, value, options);
    case Method::Vir: return fit_vir(labeled, unlabeled, value, options);
    case Method::Ols: return fit_ols(labeled, options);
    case Method::Ridge: return fit_pooled_ridge(labeled, value, jitter);
    case Method::Anchor: return fit_anchor(labeled, value, options);
    case Method::GroupDro: {
      GroupDroOptions dro;
      dro.iterations = dro_iterations;
      dro.weighting = weighting;
      dro.jitter = jitter;
      return fit_group_dro(labeled, value, dro);
    }
    default:
      throw std::invalid_argument("method not supported by the protocol: " +
                                  method_name(method));
  }
}

}  // namespace

double rmse(const Eigen::VectorXd& pred, const Eigen::VectorXd& truth) {
  if (pred.size() != truth.size())
    throw std::invalid_argument("rmse: length mismatch");
  if (pred.size() < 2) throw std::invalid_argument("rmse: need >= 2 values");
  return std::sqrt((pred - truth).squaredNorm() /
                   static_cast<double>(pred.size()));
}

double nmse(const Eigen::VectorXd& pred, const Eigen::VectorXd& truth) {
  if (pred.size() != truth.size())
    throw std::invalid_argument("nmse: length mismatch");
  if (pred.size() < 2) throw std::invalid_argument("nmse: need >= 2 values");
  const double mean = truth.mean();
  const double var =
      (truth.array() - mean).square().sum() / static_cast<double>(truth.size());
  if (!(var > 0.0))
    throw std::invalid_argument("nmse: truth variance must be positive");
  const double mse =
      (pred - truth).squaredNorm() / static_cast<double>(pred.size());
  return mse / var;
}

double cvar(std::vector<double> scores, double q) {
  if (scores.empty()) throw std::invalid_argument("cvar: no scores");
  if (!(q >= 0.0) || q >= 1.0)
    throw std::invalid_argument("cvar: quantile must be in [0, 1)");
  std::sort(scores.begin(), scores.end());
  const std::size_t n = scores.size();
  // type-7 quantile: linear interpolation of order statistics
  const double pos = q * static_cast<double>(n - 1);
  const std::size_t lo = static_cast<std::size_t>(pos);
  const double frac = pos - static_cast<double>(lo);
  double threshold = scores[lo];
  if (lo + 1 < n) threshold += frac * (scores[lo + 1] - scores[lo]);

  double sum = 0.0;
  std::size_t count = 0;
  for (double s : scores) {
    if (s >= threshold) {
      sum += s;
      ++count;
    }
  }
  return sum / static_cast<double>(count);
}

double spearman(const Eigen::VectorXd& pred, const Eigen::VectorXd& truth) {
  if (pred.size() != truth.size())
    throw std::invalid_argument("spearman: length mismatch");
  if (pred.size() < 2)
    throw std::invalid_argument("spearman: need >= 2 values");
  const Eigen::VectorXd ra = average_ranks(pred);
  const Eigen::VectorXd rb = average_ranks(truth);
  const Eigen::ArrayXd da = ra.array() - ra.mean();
  const Eigen::ArrayXd db = rb.array() - rb.mean();
  const double va = (da * da).sum();
  const double vb = (db * db).sum();
  if (!(va > 0.0) || !(vb > 0.0))
    throw std::invalid_argument("spearman: ranks have zero variance");
  return (da * db).sum() / std::sqrt(va * vb);
}

Eigen::VectorXd moving_average(const Eigen::VectorXd& series, int window) {
  if (window < 1) throw std::invalid_argument("window must be >= 1");
  const Eigen::Index n = series.size();
  const Eigen::Index left = (window - 1) / 2;
  const Eigen::Index right = window / 2;
  Eigen::VectorXd out(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Eigen::Index lo = std::max<Eigen::Index>(0, i - left);
    const Eigen::Index hi = std::min<Eigen::Index>(n - 1, i + right);
    out[i] = series.segment(lo, hi - lo + 1).mean();
  }
  return out;
}

MetricAggregate EvalReport::rmse_aggregate() const {
  std::vector<double> v;
  for (const auto& r : records) v.push_back(r.rmse_value);
  return aggregate_of(v);
}

MetricAggregate EvalReport::nmse_aggregate() const {
  std::vector<double> v;
  for (const auto& r : records) v.push_back(r.nmse_value);
  return aggregate_of(v);
}

MetricAggregate EvalReport::spearman_aggregate() const {
  std::vector<double> v;
  for (const auto& r : records) v.push_back(r.spearman_value);
  return aggregate_of(v);
}

SelectionResult loeo_hyperparam_select(const LabeledView& labeled,
                                       const UnlabeledView& unlabeled,
                                       Method method,
                                       const std::vector<double>& grid,
                                       Weighting weighting,
                                       int group_dro_iterations,
                                       double jitter) {
  if (labeled.env_indices.size() < 2)
    throw std::invalid_argument(
        "cross-validation needs >= 2 labeled environments");
  if (grid.empty()) throw std::invalid_argument("hyperparameter grid is empty");

  std::vector<double> values = grid;
  std::sort(values.begin(), values.end());

  const MultiEnvDataset& data = *labeled.data;
  SelectionResult result;
  double best_score = std::numeric_limits<double>::infinity();
  bool have_best = false;

  for (double value : values) {
    double fold_sum = 0.0;
    for (std::size_t hold = 0; hold < labeled.env_indices.size(); ++hold) {
      std::vector<int> train_envs;
      for (std::size_t i = 0; i < labeled.env_indices.size(); ++i)
        if (i != hold) train_envs.push_back(labeled.env_indices[i]);
      const LabeledView train = make_labeled_view(data, train_envs);
      const FittedModel model = fit_with_method(
          method, train, unlabeled, value, weighting, group_dro_iterations,
          jitter);
      const LabeledView held =
          make_labeled_view(data, {labeled.env_indices[hold]});
      fold_sum += mean_squared_error(model, held);
    }
    const double score = fold_sum / static_cast<double>(labeled.env_indices.size());
    result.grid_scores.emplace_back(value, score);
    // scores within 1e-12 count as ties and keep the smaller value
    const double margin = 1e-12 * (1.0 + std::abs(best_score));
    if (!have_best || score < best_score - margin) {
      best_score = score;
      result.selected = value;
      have_best = true;
    }
  }
  return result;
}

EvalReport run_loeo_protocol(const MultiEnvDataset& dataset,
                             const ProtocolConfig& config) {
  if (config.grid.empty())
    throw std::invalid_argument("hyperparameter grid is empty");
  if (config.trials < 1) throw std::invalid_argument("trials must be >= 1");
  if (config.n_labeled < 1)
    throw std::invalid_argument("n_labeled must be >= 1");

  std::vector<int> labeled_env_indices;
  for (int e = 0; e < dataset.env_count(); ++e)
    for (int r : dataset.rows_by_env()[e])
      if (dataset.is_labeled(r)) {
        labeled_env_indices.push_back(e);
        break;
      }
  if (labeled_env_indices.size() < 2)
    throw std::invalid_argument("protocol needs >= 2 labeled environments");

  std::vector<double> grid = config.grid;
  std::sort(grid.begin(), grid.end());

  EvalReport report;
  report.method = config.method;
  report.n_labeled = config.n_labeled;
  report.oracle_mode = config.oracle_mode;

  for (std::size_t ti = 0; ti < labeled_env_indices.size(); ++ti) {
    const int test_env = labeled_env_indices[ti];

    std::vector<int> training_envs;
    for (int e = 0; e < dataset.env_count(); ++e)
      if (e != test_env) training_envs.push_back(e);

    std::vector<int> candidates;
    for (int e : labeled_env_indices)
      if (e != test_env) candidates.push_back(e);
    if (config.n_labeled > static_cast<int>(candidates.size()))
      throw std::invalid_argument(
          "n_labeled exceeds available labeled training environments");

    const int trials =
        config.n_labeled == static_cast<int>(candidates.size()) ? 1
                                                                : config.trials;
    const LabeledView test_view = make_labeled_view(dataset, {test_env});
    const UnlabeledView unlabeled = make_unlabeled_view(dataset, training_envs);

    for (int trial = 0; trial < trials; ++trial) {
      Rng rng(Rng::derive(config.seed, {static_cast<std::uint64_t>(test_env),
                                        static_cast<std::uint64_t>(trial)}));
      const std::vector<int> picks = sample_without_replacement(
          rng, static_cast<int>(candidates.size()), config.n_labeled);
      std::vector<int> chosen;
      for (int idx : picks) chosen.push_back(candidates[idx]);
      const LabeledView labeled = make_labeled_view(dataset, chosen);

      double selected;
      if (grid.size() == 1) {
        selected = grid.front();
      } else if (config.oracle_mode) {
        double best = std::numeric_limits<double>::infinity();
        selected = grid.front();
        for (double value : grid) {
          const FittedModel model = fit_with_method(
              config.method, labeled, unlabeled, value, config.weighting,
              config.group_dro_iterations, config.jitter);
          const double mse = mean_squared_error(model, test_view);
          if (mse < best) {
            best = mse;
            selected = value;
          }
        }
      } else {
        selected = loeo_hyperparam_select(labeled, unlabeled, config.method,
                                          grid, config.weighting,
                                          config.group_dro_iterations,
                                          config.jitter)
                       .selected;
      }

      const FittedModel model = fit_with_method(
          config.method, labeled, unlabeled, selected, config.weighting,
          config.group_dro_iterations, config.jitter);

      // score on the held-out environment
      const auto& rows = test_view.rows_by_env.front();
      Eigen::MatrixXd x_test(rows.size(), dataset.dim());
      Eigen::VectorXd y_test(rows.size());
      for (std::size_t i = 0; i < rows.size(); ++i) {
        x_test.row(i) = dataset.features().row(rows[i]);
        y_test[i] = dataset.outcomes()[rows[i]];
      }
      const Eigen::VectorXd pred = predict(model, x_test);

      EvalRecord record;
      record.test_env = dataset.environment(test_env);
      record.trial = trial;
      record.selected = selected;
      record.rmse_value = rmse(pred, y_test);
      record.nmse_value = nmse(pred, y_test);
      try {
        record.spearman_value = spearman(pred, y_test);
      } catch (const std::invalid_argument&) {
        record.spearman_value = kNaN;  // degenerate ranks
      }
      report.records.push_back(std::move(record));
    }
  }
  return report;
}

void write_report_csv(const std::string& path,
                      const std::vector<EvalReport>& reports) {
  std::ofstream out(path);
  if (!out) throw std::invalid_argument("cannot open for writing: " + path);
  out << "method,oracle_mode,n_labeled,test_env,trial,selected,rmse,nmse,"
         "spearman\n";
  for (const auto& report : reports) {
    for (const auto& r : report.records) {
      out << method_name(report.method) << ','
          << (report.oracle_mode ? 1 : 0) << ',' << report.n_labeled << ','
          << r.test_env << ',' << r.trial << ',' << format_double(r.selected)
          << ',' << format_double(r.rmse_value) << ','
          << format_double(r.nmse_value) << ','
          << format_double(r.spearman_value) << "\n";
    }
  }
  if (!out) throw std::invalid_argument("write failed: " + path);
}

nlohmann::json report_to_json(const EvalReport& report) {
  nlohmann::json j;
  j["method"] = method_name(report.method);
  j["n_labeled"] = report.n_labeled;
  j["oracle_mode"] = report.oracle_mode;
  j["record_count"] = report.records.size();

  const MetricAggregate rm = report.rmse_aggregate();
  const MetricAggregate nm = report.nmse_aggregate();
  const MetricAggregate sp = report.spearman_aggregate();
  j["aggregate"] = {
      {"rmse_mean", rm.mean},         {"rmse_se", rm.standard_error},
      {"nmse_mean", nm.mean},         {"nmse_se", nm.standard_error},
      {"spearman_mean", sp.mean},     {"spearman_se", sp.standard_error},
      {"spearman_count", sp.count},
  };

  nlohmann::json records = nlohmann::json::array();
  for (const auto& r : report.records) {
    records.push_back({{"test_env", r.test_env},
                       {"trial", r.trial},
                       {"selected", r.selected},
                       {"rmse", r.rmse_value},
                       {"nmse", r.nmse_value},
                       {"spearman", r.spearman_value}});
  }
  j["records"] = std::move(records);
  return j;
}

}  // namespace invreg
