// Declarative experiment runner: simulate / fit / predict / evaluate /
// oracle / sweep over JSON configs. Every subcommand is deterministic given
// its config; all randomness flows from the config seed through documented
// derivations. Exit codes: 0 success, 1 numerical failure, 2 usage or
// config error.

#include <cmath>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <Eigen/Eigenvalues>
#include <nlohmann/json.hpp>

#include "invreg/dataset.hpp"
#include "invreg/estimators.hpp"
#include "invreg/evaluation.hpp"
#include "invreg/linalg.hpp"
#include "invreg/moments.hpp"
#include "invreg/oracle.hpp"
#include "invreg/rng.hpp"
#include "invreg/scm.hpp"

using nlohmann::json;
using namespace invreg;

namespace {

struct CommonFlags {
  std::string config_path;
  bool print_config = false;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> weighting;
  std::optional<double> jitter;
  std::optional<std::string> out_dir;
  bool oracle_mode = false;
  std::vector<double> eval_beta;  // fit only
};

void add_common_flags(CLI::App* cmd, CommonFlags& flags, bool with_oracle_mode) {
  cmd->add_option("--config", flags.config_path, "JSON config file");
  cmd->add_flag("--print-config", flags.print_config,
                "print the default config and exit");
  cmd->add_option("--seed", flags.seed, "override the config seed");
  cmd->add_option("--weighting", flags.weighting,
                  "override the weighting (pooled|balanced)");
  cmd->add_option("--jitter", flags.jitter,
                  "override the solver diagonal jitter");
  cmd->add_option("--out", flags.out_dir,
                  "directory prefixed to relative output paths");
  if (with_oracle_mode)
    cmd->add_flag("--oracle-mode", flags.oracle_mode,
                  "select hyperparameters on the test environment");
}

json load_config(const CommonFlags& flags, const json& defaults) {
  if (flags.config_path.empty())
    throw std::invalid_argument("--config is required (see --print-config)");
  std::ifstream in(flags.config_path);
  if (!in)
    throw std::invalid_argument("cannot open config: " + flags.config_path);
  json user;
  try {
    in >> user;
  } catch (const json::exception& e) {
    throw std::invalid_argument("config parse error: " + std::string(e.what()));
  }
  json merged = defaults;
  merged.merge_patch(user);
  if (flags.seed) merged["seed"] = *flags.seed;
  if (flags.weighting) merged["weighting"] = *flags.weighting;
  if (flags.jitter) merged["jitter"] = *flags.jitter;
  if (flags.oracle_mode) merged["oracle_mode"] = true;
  if (!flags.eval_beta.empty()) merged["eval_beta"] = flags.eval_beta;
  return merged;
}

std::string resolve_out(const CommonFlags& flags, const std::string& path) {
  if (path.empty()) return path;
  if (!flags.out_dir || path.front() == '/') return path;
  return *flags.out_dir + "/" + path;
}

Eigen::VectorXd vector_from(const json& j) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
  for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = j.at(i).get<double>();
  return v;
}

ColumnSchema schema_from(const json& ds) {
  ColumnSchema schema;
  schema.env_column = ds.at("env_column").get<std::string>();
  if (ds.contains("outcome_column") && !ds.at("outcome_column").is_null()) {
    const auto name = ds.at("outcome_column").get<std::string>();
    if (!name.empty()) schema.outcome_column = name;
  }
  if (ds.contains("feature_columns"))
    schema.feature_columns =
        ds.at("feature_columns").get<std::vector<std::string>>();
  return schema;
}

// "simulate" section shared by the simulate/evaluate/sweep subcommands
struct SimulatedSuite {
  LinearScmSpec spec;
  std::vector<PerturbationSpec> perturbations;
  std::vector<EnvironmentId> env_ids;
};

SimulatedSuite parse_suite(const json& sim) {
  SimulatedSuite out;
  out.spec = scm_from_json(sim.at("scm"));

  const bool has_envs =
      sim.contains("environments") && !sim.at("environments").empty();
  const bool has_suite = sim.contains("suite") && !sim.at("suite").is_null();
  if (has_envs == has_suite)
    throw std::invalid_argument(
        "exactly one of 'environments' and 'suite' must be given");

  if (has_envs) {
    for (const auto& e : sim.at("environments")) {
      out.perturbations.push_back(perturbation_from_json(e));
      if (e.contains("id"))
        out.env_ids.push_back(e.at("id").get<std::string>());
    }
    if (!out.env_ids.empty() && out.env_ids.size() != out.perturbations.size())
      throw std::invalid_argument("either all environments carry ids or none");
  } else {
    const json& suite = sim.at("suite");
    const auto kind = suite.at("kind").get<std::string>();
    const int p = suite.at("p").get<int>();
    const std::uint64_t seed = suite.value("seed", 0ULL);
    if (kind == "mean_shift") {
      Eigen::MatrixXd mean_cov(out.spec.dim(), out.spec.dim());
      const json& rows = suite.at("mean_cov");
      for (Eigen::Index i = 0; i < mean_cov.rows(); ++i)
        for (Eigen::Index j = 0; j < mean_cov.cols(); ++j)
          mean_cov(i, j) = rows.at(i).at(j).get<double>();
      out.perturbations = make_mean_shift_suite(p, mean_cov, seed);
    } else if (kind == "cov_shift") {
      Eigen::MatrixXd q(out.spec.dim(), out.spec.dim());
      const json& rows = suite.at("Q");
      for (Eigen::Index i = 0; i < q.rows(); ++i)
        for (Eigen::Index j = 0; j < q.cols(); ++j)
          q(i, j) = rows.at(i).at(j).get<double>();
      std::vector<std::pair<double, double>> ranges;
      for (const auto& r : suite.at("eigenvalue_ranges"))
        ranges.emplace_back(r.at(0).get<double>(), r.at(1).get<double>());
      out.perturbations = make_cov_shift_suite(p, q, ranges, seed);
    } else {
      throw std::invalid_argument("unknown suite kind: " + kind);
    }
  }
  return out;
}

MultiEnvDataset dataset_from_config(const json& config, std::uint64_t seed) {
  const bool has_csv =
      config.contains("dataset") && !config.at("dataset").is_null();
  const bool has_sim =
      config.contains("simulate") && !config.at("simulate").is_null();
  if (has_csv == has_sim)
    throw std::invalid_argument(
        "exactly one of 'dataset' and 'simulate' must be given");
  if (has_csv) {
    const json& ds = config.at("dataset");
    return load_csv_dataset(ds.at("csv").get<std::string>(), schema_from(ds));
  }
  const json& sim = config.at("simulate");
  const SimulatedSuite suite = parse_suite(sim);
  std::optional<std::vector<EnvironmentId>> labeled;
  if (sim.contains("labels_only_for") && !sim.at("labels_only_for").empty())
    labeled = sim.at("labels_only_for").get<std::vector<EnvironmentId>>();
  return simulate_dataset(suite.spec, suite.perturbations,
                          sim.value("n_per_env", 100), seed, suite.env_ids,
                          labeled);
}

// ----------------------------------------------------------------- simulate

json simulate_defaults() {
  return json{{"seed", 1},
              {"out", "dataset.csv"},
              {"n_per_env", 100},
              {"scm",
               {{"w", json::array()},
                {"b", {1.0}},
                {"C", json::array()},
                {"var_eps_y", 1.0},
                {"cov_eps_x", {{1.0}}}}},
              {"environments", json::array()},
              {"suite", nullptr},
              {"labels_only_for", json::array()}};
}

int cmd_simulate(const CommonFlags& flags) {
  const json config = load_config(flags, simulate_defaults());
  const std::uint64_t seed = config.at("seed").get<std::uint64_t>();
  const MultiEnvDataset ds =
      dataset_from_config(json{{"simulate", config}}, seed);

  ColumnSchema schema;
  schema.env_column = "env";
  schema.outcome_column = "y";
  const std::string out =
      resolve_out(flags, config.at("out").get<std::string>());
  write_csv_dataset(out, ds, schema);
  std::cout << "wrote " << out << " (" << ds.rows() << " rows, "
            << ds.env_count() << " environments)\n";
  return 0;
}

// ---------------------------------------------------------------------- fit

json fit_defaults() {
  return json{{"seed", 1},
              {"dataset", nullptr},
              {"simulate", nullptr},
              {"labeled_envs", json::array()},
              {"method", "mir"},
              {"gamma", 1.0},
              {"gamma_mean", 1.0},
              {"gamma_cov", 1.0},
              {"alpha", 1.0},
              {"step_size", 0.1},
              {"iterations", 500},
              {"loss", "squared"},
              {"huber_delta", 1.0},
              {"regularizer_file", ""},
              {"weighting", "pooled"},
              {"jitter", 0.0},
              {"eval_beta", json::array()},
              {"out_model", "model.json"},
              {"out_summary", ""},
              {"out_regularizer", ""}};
}

int cmd_fit(const CommonFlags& flags) {
  const json config = load_config(flags, fit_defaults());
  const MultiEnvDataset ds =
      dataset_from_config(config, config.at("seed").get<std::uint64_t>());

  std::optional<std::vector<EnvironmentId>> mask;
  if (!config.at("labeled_envs").empty())
    mask = config.at("labeled_envs").get<std::vector<EnvironmentId>>();
  const auto [labeled, unlabeled] = split_views(ds, mask);

  const Method method =
      method_from_name(config.at("method").get<std::string>());
  const Weighting weighting =
      weighting_from_name(config.at("weighting").get<std::string>());
  const double jitter = config.at("jitter").get<double>();
  const FitOptions options{weighting, jitter};

  FittedModel model;
  switch (method) {
    case Method::Mir:
      model =
          fit_mir(labeled, unlabeled, config.at("gamma").get<double>(), options);
      break;
    case Method::Vir:
      model =
          fit_vir(labeled, unlabeled, config.at("gamma").get<double>(), options);
      break;
    case Method::MirVir:
      model = fit_mir_vir(labeled, unlabeled,
                          config.at("gamma_mean").get<double>(),
                          config.at("gamma_cov").get<double>(), options);
      break;
    case Method::Ols:
      model = fit_ols(labeled, options);
      break;
    case Method::Ridge:
      model =
          fit_pooled_ridge(labeled, config.at("alpha").get<double>(), jitter);
      break;
    case Method::Anchor:
      model = fit_anchor(labeled, config.at("gamma").get<double>(), options);
      break;
    case Method::GroupDro: {
      GroupDroOptions dro;
      dro.iterations = config.at("iterations").get<int>();
      dro.weighting = weighting;
      dro.jitter = jitter;
      model =
          fit_group_dro(labeled, config.at("step_size").get<double>(), dro);
      break;
    }
    case Method::GeneralLoss: {
      GeneralLossOptions gl;
      const auto loss = config.at("loss").get<std::string>();
      if (loss == "squared")
        gl.loss = LossKind::Squared;
      else if (loss == "logistic")
        gl.loss = LossKind::Logistic;
      else if (loss == "huber")
        gl.loss = LossKind::Huber;
      else
        throw std::invalid_argument("unknown loss: " + loss);
      gl.huber_delta = config.at("huber_delta").get<double>();
      gl.weighting = weighting;
      // the quadratic penalty comes from a matrix file when given, otherwise
      // from the mean-shift regularizer of the unlabeled data
      const std::string reg_file =
          config.at("regularizer_file").get<std::string>();
      const Eigen::MatrixXd h =
          reg_file.empty()
              ? mir_regularizer(env_moment_summaries(unlabeled)).h
              : read_matrix_file(reg_file);
      model =
          fit_general_loss(labeled, h, config.at("gamma").get<double>(), gl);
      break;
    }
  }

  const std::string model_path =
      resolve_out(flags, config.at("out_model").get<std::string>());
  if (!model_path.empty()) save_model(model_path, model);

  // fit summary: training error plus the penalty actually applied
  json summary;
  summary["method"] = method_name(method);
  summary["gammas"] = model.gammas;
  summary["k"] = labeled.row_count();
  summary["p"] = unlabeled.env_indices.size();
  summary["labeled_envs"] = model.labeled_envs;
  summary["train_mse"] = mean_squared_error(model, labeled);
  summary["converged"] = model.converged;

  const auto summaries = env_moment_summaries(unlabeled, model.x_offset);
  Eigen::MatrixXd h = Eigen::MatrixXd::Zero(ds.dim(), ds.dim());
  double gamma_applied = 0.0;
  if (method == Method::Mir) {
    h = mir_regularizer(summaries).h;
    gamma_applied = model.gammas[0];
  } else if (method == Method::Vir) {
    h = vir_regularizer(summaries).h;
    gamma_applied = model.gammas[0];
  } else if (method == Method::MirVir) {
    h = combined_regularizer(summaries, model.gammas[0], model.gammas[1]).h;
    gamma_applied = 1.0;
  } else if (method == Method::Ridge) {
    h = Eigen::MatrixXd::Identity(ds.dim(), ds.dim());
    gamma_applied = model.gammas[0];
  }
  summary["penalty_quadratic"] = model.beta.dot(h * model.beta);
  summary["penalty_term"] = gamma_applied * model.beta.dot(h * model.beta);

  if (!config.at("eval_beta").empty()) {
    const Eigen::VectorXd beta = vector_from(config.at("eval_beta"));
    json at;
    at["beta"] = config.at("eval_beta");
    at["vir_penalty"] = vir_penalty(summaries, beta);
    at["vir_alternative_penalty"] = vir_alternative_penalty(summaries, beta);
    at["penalty_quadratic"] = beta.dot(h * beta);
    at["penalty_term"] = gamma_applied * beta.dot(h * beta);
    summary["eval_beta"] = at;
  }

  const std::string reg_path =
      resolve_out(flags, config.at("out_regularizer").get<std::string>());
  if (!reg_path.empty()) write_matrix_file(reg_path, h);

  const std::string summary_path =
      resolve_out(flags, config.at("out_summary").get<std::string>());
  if (!summary_path.empty()) {
    std::ofstream out(summary_path);
    if (!out)
      throw std::invalid_argument("cannot open for writing: " + summary_path);
    out << summary.dump(2) << "\n";
  }
  std::cout << summary.dump(2) << "\n";
  return 0;
}

// ------------------------------------------------------------------ predict

json predict_defaults() {
  return json{{"model", "model.json"},
              {"dataset", nullptr},
              {"out", "predictions.csv"}};
}

int cmd_predict(const CommonFlags& flags) {
  const json config = load_config(flags, predict_defaults());
  const FittedModel model = load_model(config.at("model").get<std::string>());
  const json& ds_cfg = config.at("dataset");
  const MultiEnvDataset ds = load_csv_dataset(
      ds_cfg.at("csv").get<std::string>(), schema_from(ds_cfg));
  const Eigen::VectorXd pred = predict(model, ds.features());

  const std::string out_path =
      resolve_out(flags, config.at("out").get<std::string>());
  std::ofstream out(out_path);
  if (!out)
    throw std::invalid_argument("cannot open for writing: " + out_path);
  out << "row,env,prediction\n";
  for (Eigen::Index r = 0; r < ds.rows(); ++r) {
    out << r << ',' << ds.environment(ds.env_index_of_row(r)) << ','
        << format_double(pred[r]) << "\n";
  }
  std::cout << "wrote " << out_path << " (" << ds.rows() << " predictions)\n";
  return 0;
}

// ----------------------------------------------------------------- evaluate

json evaluate_defaults() {
  return json{
      {"seed", 1},
      {"dataset", nullptr},
      {"simulate", nullptr},
      {"methods",
       json::array({json{{"method", "mir"},
                         {"grid", {0.01, 0.1, 1.0, 10.0, 100.0, 1000.0,
                                   10000.0, 100000.0}}}})},
      {"n_labeled", 2},
      {"trials", 1},
      {"weighting", "pooled"},
      {"oracle_mode", false},
      {"group_dro_iterations", 500},
      {"jitter", 0.0},
      {"out_csv", "report.csv"},
      {"out_json", "report.json"}};
}

int cmd_evaluate(const CommonFlags& flags) {
  const json config = load_config(flags, evaluate_defaults());
  const std::uint64_t seed = config.at("seed").get<std::uint64_t>();
  const MultiEnvDataset ds =
      dataset_from_config(config, Rng::derive(seed, {0}));

  // n_labeled may be a single count or a sweep over several counts
  std::vector<int> n_labeled_values;
  if (config.at("n_labeled").is_array())
    n_labeled_values = config.at("n_labeled").get<std::vector<int>>();
  else
    n_labeled_values = {config.at("n_labeled").get<int>()};

  std::vector<EvalReport> reports;
  json out_json;
  out_json["seed"] = seed;
  out_json["n_labeled"] = config.at("n_labeled");
  out_json["oracle_mode"] = config.at("oracle_mode").get<bool>();
  out_json["fold_seed_rule"] = "derive(seed, {test_env_index, trial})";
  out_json["methods"] = json::array();

  for (int n_labeled : n_labeled_values) {
    for (const auto& m : config.at("methods")) {
      ProtocolConfig protocol;
      protocol.method = method_from_name(m.at("method").get<std::string>());
      protocol.grid = m.at("grid").get<std::vector<double>>();
      protocol.weighting =
          weighting_from_name(config.at("weighting").get<std::string>());
      protocol.n_labeled = n_labeled;
      protocol.trials = config.at("trials").get<int>();
      protocol.seed = seed;
      protocol.oracle_mode = config.at("oracle_mode").get<bool>();
      protocol.group_dro_iterations =
          config.at("group_dro_iterations").get<int>();
      protocol.jitter = config.at("jitter").get<double>();
      EvalReport report = run_loeo_protocol(ds, protocol);
      out_json["methods"].push_back(report_to_json(report));
      reports.push_back(std::move(report));
    }
  }

  const std::string csv_path =
      resolve_out(flags, config.at("out_csv").get<std::string>());
  if (!csv_path.empty()) write_report_csv(csv_path, reports);
  const std::string json_path =
      resolve_out(flags, config.at("out_json").get<std::string>());
  if (!json_path.empty()) {
    std::ofstream out(json_path);
    if (!out)
      throw std::invalid_argument("cannot open for writing: " + json_path);
    out << out_json.dump(2) << "\n";
  }

  for (const auto& report : reports) {
    const MetricAggregate agg = report.rmse_aggregate();
    std::cout << method_name(report.method) << " (n_labeled="
              << report.n_labeled << "): rmse " << format_double(agg.mean)
              << " +- " << format_double(agg.standard_error) << " over "
              << report.records.size() << " records\n";
  }
  return 0;
}

// ------------------------------------------------------------------- oracle

json oracle_defaults() {
  return json{{"seed", 1},
              {"instances", 50},
              {"max_dim", 4},
              {"max_envs", 6},
              {"gammas", {0.1, 1.0, 10.0}},
              {"betas_per_case", 200},
              {"feasible_samples", 16},
              {"kinds", {"mir", "vir"}},
              {"tolerance", 1e-10},
              {"minimizer_tolerance", 1e-4},
              {"out", "oracle_report.txt"}};
}

int cmd_oracle(const CommonFlags& flags) {
  const json config = load_config(flags, oracle_defaults());
  OracleSuiteConfig suite;
  suite.instances = config.at("instances").get<int>();
  suite.max_dim = config.at("max_dim").get<int>();
  suite.max_envs = config.at("max_envs").get<int>();
  suite.gammas = config.at("gammas").get<std::vector<double>>();
  suite.betas_per_case = config.at("betas_per_case").get<int>();
  suite.feasible_samples = config.at("feasible_samples").get<int>();
  suite.seed = config.at("seed").get<std::uint64_t>();
  const double tolerance = config.at("tolerance").get<double>();
  const double minimizer_tolerance =
      config.at("minimizer_tolerance").get<double>();

  std::ostringstream report;
  double worst_gap = 0.0;
  double worst_minimizer = 0.0;
  bool ok = true;
  for (const auto& kind_name :
       config.at("kinds").get<std::vector<std::string>>()) {
    PerturbationClassKind kind;
    if (kind_name == "mir")
      kind = PerturbationClassKind::MirDiamond;
    else if (kind_name == "vir")
      kind = PerturbationClassKind::VirDagger;
    else
      throw std::invalid_argument("unknown oracle kind: " + kind_name);

    for (const auto& r : run_oracle_suite(suite, kind)) {
      report << kind_name << " instance=" << r.instance
             << " gamma=" << format_double(r.gamma)
             << " max_gap=" << format_double(r.max_gap)
             << " max_relative_gap=" << format_double(r.max_relative_gap)
             << " minimizer_distance=" << format_double(r.minimizer_distance)
             << "\n";
      worst_gap = std::max(worst_gap, r.max_relative_gap);
      worst_minimizer = std::max(worst_minimizer, r.minimizer_distance);
      if (r.max_relative_gap > tolerance ||
          r.minimizer_distance > minimizer_tolerance)
        ok = false;
    }
  }
  report << "max_relative_gap=" << format_double(worst_gap)
         << " tolerance=" << format_double(tolerance) << "\n";
  report << "max_minimizer_distance=" << format_double(worst_minimizer)
         << " tolerance=" << format_double(minimizer_tolerance) << "\n";
  report << (ok ? "PASS" : "FAIL") << "\n";

  const std::string out_path =
      resolve_out(flags, config.at("out").get<std::string>());
  if (!out_path.empty()) {
    std::ofstream out(out_path);
    if (!out)
      throw std::invalid_argument("cannot open for writing: " + out_path);
    out << report.str();
  }
  std::cout << report.str();
  if (!ok) throw NumericalError("oracle duality check failed");
  return 0;
}

// -------------------------------------------------------------------- sweep

json sweep_defaults() {
  return json{{"seed", 1},
              {"dataset", nullptr},
              {"simulate", nullptr},
              {"method", "mir"},
              {"gammas", json::array()},
              {"gamma_grid", {{"min", 1e-3}, {"max", 1e8}, {"count", 23}}},
              {"weighting", "pooled"},
              {"jitter", 0.0},
              {"test_env", ""},
              {"out", "sweep.csv"}};
}

int cmd_sweep(const CommonFlags& flags) {
  const json config = load_config(flags, sweep_defaults());
  const std::uint64_t seed = config.at("seed").get<std::uint64_t>();
  const MultiEnvDataset ds =
      dataset_from_config(config, Rng::derive(seed, {0}));

  const Method method =
      method_from_name(config.at("method").get<std::string>());
  if (method != Method::Mir && method != Method::Vir)
    throw std::invalid_argument("sweep supports the mir and vir methods");
  const Weighting weighting =
      weighting_from_name(config.at("weighting").get<std::string>());
  const double jitter = config.at("jitter").get<double>();

  std::vector<double> gammas;
  if (!config.at("gammas").empty()) {
    gammas = config.at("gammas").get<std::vector<double>>();
  } else {
    const json& grid = config.at("gamma_grid");
    const double lo = grid.at("min").get<double>();
    const double hi = grid.at("max").get<double>();
    const int count = grid.at("count").get<int>();
    if (count < 1 || lo <= 0.0 || hi < lo)
      throw std::invalid_argument("invalid gamma grid");
    for (int i = 0; i < count; ++i) {
      const double t = count == 1 ? 0.0 : double(i) / double(count - 1);
      gammas.push_back(
          std::exp(std::log(lo) + t * (std::log(hi) - std::log(lo))));
    }
  }

  // a held-out test environment is excluded from both views
  const std::string test_env = config.at("test_env").get<std::string>();
  std::vector<int> train_envs;
  int test_idx = -1;
  for (int e = 0; e < ds.env_count(); ++e) {
    if (!test_env.empty() && ds.environment(e) == test_env)
      test_idx = e;
    else
      train_envs.push_back(e);
  }
  if (!test_env.empty() && test_idx < 0)
    throw std::invalid_argument("unknown test environment: " + test_env);

  std::vector<int> labeled_envs;
  for (int e : train_envs)
    for (int r : ds.rows_by_env()[e])
      if (ds.is_labeled(r)) {
        labeled_envs.push_back(e);
        break;
      }
  const LabeledView labeled = make_labeled_view(ds, labeled_envs);
  const UnlabeledView unlabeled = make_unlabeled_view(ds, train_envs);

  const auto summaries = env_moment_summaries(unlabeled);
  const Eigen::MatrixXd h = method == Method::Mir
                                ? mir_regularizer(summaries).h
                                : vir_regularizer(summaries).h;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(h);
  const Eigen::VectorXd top = es.eigenvectors().col(ds.dim() - 1);

  const std::string out_path =
      resolve_out(flags, config.at("out").get<std::string>());
  std::ofstream out(out_path);
  if (!out)
    throw std::invalid_argument("cannot open for writing: " + out_path);
  out << "gamma,angle_deg,beta_norm,train_mse,test_mse";
  for (Eigen::Index j = 0; j < ds.dim(); ++j) out << ",beta" << (j + 1);
  out << "\n";

  const FitOptions options{weighting, jitter};
  for (double gamma : gammas) {
    const FittedModel model =
        method == Method::Mir ? fit_mir(labeled, unlabeled, gamma, options)
                              : fit_vir(labeled, unlabeled, gamma, options);
    const double norm = model.beta.norm();
    const double angle =
        norm > 0.0
            ? std::acos(std::min(1.0, std::abs(model.beta.dot(top)) / norm)) *
                  180.0 / 3.14159265358979323846
            : std::numeric_limits<double>::quiet_NaN();
    double test_mse = std::numeric_limits<double>::quiet_NaN();
    if (test_idx >= 0) {
      const LabeledView test_view = make_labeled_view(ds, {test_idx});
      test_mse = mean_squared_error(model, test_view);
    }
    out << format_double(gamma) << ',' << format_double(angle) << ','
        << format_double(norm) << ','
        << format_double(mean_squared_error(model, labeled)) << ','
        << format_double(test_mse);
    for (Eigen::Index j = 0; j < ds.dim(); ++j)
      out << ',' << format_double(model.beta[j]);
    out << "\n";
  }
  std::cout << "wrote " << out_path << " (" << gammas.size() << " rows)\n";
  return 0;
}

int dispatch(CLI::App& app, const std::string& name, const CommonFlags& flags,
             const json& defaults, int (*runner)(const CommonFlags&)) {
  if (!app.get_subcommand(name)->parsed()) return -1;
  if (flags.print_config) {
    std::cout << defaults.dump(2) << "\n";
    return 0;
  }
  return runner(flags);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "invariant regularization for anti-causal multi-environment regression"};
  app.require_subcommand(1);

  CommonFlags sim_flags, fit_flags, pred_flags, eval_flags, oracle_flags,
      sweep_flags;
  add_common_flags(
      app.add_subcommand("simulate", "sample a multi-environment CSV dataset"),
      sim_flags, false);
  CLI::App* fit_cmd = app.add_subcommand("fit", "fit one model on a dataset");
  add_common_flags(fit_cmd, fit_flags, false);
  fit_cmd->add_option("--eval-beta", fit_flags.eval_beta,
                      "coefficients at which to report the penalty values")
      ->delimiter(',');
  add_common_flags(app.add_subcommand("predict", "apply a saved model"),
                   pred_flags, false);
  add_common_flags(
      app.add_subcommand("evaluate", "leave-one-environment-out protocol"),
      eval_flags, true);
  add_common_flags(
      app.add_subcommand("oracle", "worst-case duality verification"),
      oracle_flags, false);
  add_common_flags(
      app.add_subcommand("sweep", "regularization path over a gamma grid"),
      sweep_flags, false);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    int rc;
    if ((rc = dispatch(app, "simulate", sim_flags, simulate_defaults(),
                       cmd_simulate)) >= 0)
      return rc;
    if ((rc = dispatch(app, "fit", fit_flags, fit_defaults(), cmd_fit)) >= 0)
      return rc;
    if ((rc = dispatch(app, "predict", pred_flags, predict_defaults(),
                       cmd_predict)) >= 0)
      return rc;
    if ((rc = dispatch(app, "evaluate", eval_flags, evaluate_defaults(),
                       cmd_evaluate)) >= 0)
      return rc;
    if ((rc = dispatch(app, "oracle", oracle_flags, oracle_defaults(),
                       cmd_oracle)) >= 0)
      return rc;
    if ((rc = dispatch(app, "sweep", sweep_flags, sweep_defaults(),
                       cmd_sweep)) >= 0)
      return rc;
    std::cerr << "no subcommand given\n";
    return 2;
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
