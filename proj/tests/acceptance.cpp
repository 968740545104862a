// Acceptance suite: one pass/fail line per criterion, nonzero exit when any
// criterion fails. Each criterion enforces its tolerance and runtime bound.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include "invreg/dataset.hpp"
#include "invreg/estimators.hpp"
#include "invreg/evaluation.hpp"
#include "invreg/linalg.hpp"
#include "invreg/moments.hpp"
#include "invreg/oracle.hpp"
#include "invreg/rng.hpp"
#include "invreg/scm.hpp"

using namespace invreg;

namespace {

struct CriterionResult {
  bool pass = false;
  std::string detail;
};

Eigen::VectorXd vec2(double a, double b) {
  Eigen::VectorXd v(2);
  v << a, b;
  return v;
}

// ---------------------------------------------------------------- fixtures

// the 2-d anti-causal core used by the mean-shift criteria
LinearScmSpec planar_spec() {
  LinearScmSpec spec;
  spec.w = Eigen::VectorXd::Constant(1, 0.5);
  spec.b = vec2(1.0, 0.8);
  spec.C = Eigen::MatrixXd(2, 1);
  spec.C << 0.3, 0.1;
  spec.var_eps_y = 0.5;
  spec.cov_eps_x = 0.3 * Eigen::MatrixXd::Identity(2, 2);
  return spec;
}

// fixed 3-d instance for the consistency criterion
struct ConsistencyInstance {
  LinearScmSpec spec;
  std::vector<PerturbationSpec> perturbations;
};

ConsistencyInstance consistency_instance() {
  ConsistencyInstance inst;
  inst.spec.w = Eigen::VectorXd::Constant(1, 0.6);
  inst.spec.b = Eigen::VectorXd(3);
  inst.spec.b << 1.0, -0.5, 0.7;
  inst.spec.C = Eigen::MatrixXd(3, 1);
  inst.spec.C << 0.2, 0.3, -0.1;
  inst.spec.var_eps_y = 0.8;
  inst.spec.cov_eps_x = 0.4 * Eigen::MatrixXd::Identity(3, 3);

  Rng rng(4242);
  Eigen::VectorXd scales(3);
  scales << 1.4, 0.7, 1.0;
  for (int e = 0; e < 5; ++e) {
    PerturbationSpec p;
    p.mean_shift = scales.asDiagonal() * normal_vector(rng, 3);
    Eigen::VectorXd diag(3);
    for (int j = 0; j < 3; ++j) diag[j] = rng.uniform(0.0, 0.6);
    p.cov_shift = diag.asDiagonal();
    inst.perturbations.push_back(std::move(p));
  }
  return inst;
}

// random labeled dataset with mean and covariance shifts for the
// estimator-equivalence criteria
MultiEnvDataset equivalence_dataset(std::uint64_t seed) {
  Rng rng(seed);
  LinearScmSpec spec;
  const Eigen::Index d = 2 + rng.uniform_index(2);
  const Eigen::Index q = 1;
  spec.w = 0.6 * normal_vector(rng, q);
  spec.b = normal_vector(rng, d);
  spec.C = 0.4 * normal_matrix(rng, d, q);
  spec.var_eps_y = rng.uniform(0.5, 1.2);
  spec.cov_eps_x = 0.4 * Eigen::MatrixXd::Identity(d, d);

  std::vector<PerturbationSpec> perts;
  const int p = 3 + rng.uniform_index(3);
  for (int e = 0; e < p; ++e) {
    PerturbationSpec pert;
    pert.mean_shift = 1.5 * normal_vector(rng, d);
    Eigen::VectorXd diag(d);
    for (Eigen::Index j = 0; j < d; ++j) diag[j] = rng.uniform(0.0, 0.8);
    pert.cov_shift = diag.asDiagonal();
    perts.push_back(std::move(pert));
  }
  return simulate_dataset(spec, perts, 60, Rng::derive(seed, {3}));
}

// --------------------------------------------------------------- criteria

// exact worked example: covariances diag(2,1), diag(1,2)
CriterionResult criterion_worked_example() {
  std::vector<MomentSummary> pair(2);
  pair[0].count = pair[1].count = 4;
  pair[0].mean = pair[1].mean = Eigen::VectorXd::Zero(2);
  pair[0].cov = vec2(2.0, 1.0).asDiagonal();
  pair[1].cov = vec2(1.0, 2.0).asDiagonal();

  const Eigen::VectorXd beta = vec2(1.0, 1.0);
  const double direct = vir_penalty(pair, beta);
  const double alternative = vir_alternative_penalty(pair, beta);

  const Eigen::MatrixXd avg = 0.5 * (pair[0].cov + pair[1].cov);
  const Eigen::MatrixXd a_test =
      Eigen::MatrixXd(vec2(3.0, 1.0).asDiagonal()) - avg;
  const double test_form = beta.dot(a_test * beta);

  const bool pass = std::abs(direct - 0.5) <= 1e-12 &&
                    std::abs(alternative) <= 1e-12 &&
                    std::abs(a_test(0, 0) - 1.5) <= 1e-12 &&
                    std::abs(a_test(1, 1) + 0.5) <= 1e-12 &&
                    std::abs(test_form - 1.0) <= 1e-12;
  std::ostringstream detail;
  detail << "penalty=" << direct << " alternative=" << alternative
         << " test_form=" << test_form;
  return {pass, detail.str()};
}

CriterionResult criterion_duality(PerturbationClassKind kind) {
  OracleSuiteConfig config;
  config.instances = 50;
  config.max_dim = 4;
  config.max_envs = 6;
  config.gammas = {0.1, 1.0, 10.0};
  config.betas_per_case = 200;
  config.feasible_samples = 8;
  config.seed = kind == PerturbationClassKind::MirDiamond ? 101 : 202;

  double worst_gap = 0.0;
  double worst_minimizer = 0.0;
  for (const auto& r : run_oracle_suite(config, kind)) {
    worst_gap = std::max(worst_gap, r.max_relative_gap);
    worst_minimizer = std::max(worst_minimizer, r.minimizer_distance);
  }
  const bool pass = worst_gap <= 1e-10 && worst_minimizer <= 1e-4;
  std::ostringstream detail;
  detail << "max relative gap=" << worst_gap
         << " max minimizer distance=" << worst_minimizer;
  return {pass, detail.str()};
}

CriterionResult criterion_shared_eigenbasis() {
  Rng rng(314);
  double worst = 0.0;
  for (int instance = 0; instance < 50; ++instance) {
    const Eigen::Index d = 2 + rng.uniform_index(4);  // <= 5
    const int p = 2 + static_cast<int>(rng.uniform_index(7));  // <= 8
    const Eigen::MatrixXd q = random_orthogonal(rng, d);
    Eigen::MatrixXd lambda(p, d);
    std::vector<MomentSummary> summaries(p);
    for (int i = 0; i < p; ++i) {
      for (Eigen::Index j = 0; j < d; ++j) lambda(i, j) = rng.uniform(0.0, 3.0);
      summaries[i].count = 2;
      summaries[i].mean = Eigen::VectorXd::Zero(d);
      summaries[i].cov =
          symmetrized(q * lambda.row(i).asDiagonal() * q.transpose());
    }
    for (int b = 0; b < 100; ++b) {
      const Eigen::VectorXd beta = normal_vector(rng, d);
      const double direct = vir_penalty(summaries, beta);
      const double basis = shared_eigenbasis_penalty(q, lambda, beta);
      worst = std::max(worst, std::abs(direct - basis));
    }
  }
  std::ostringstream detail;
  detail << "max |direct - eigenbasis| = " << worst;
  return {worst <= 1e-10, detail.str()};
}

CriterionResult criterion_consistency() {
  const ConsistencyInstance inst = consistency_instance();
  const double gamma = 1.0;

  // population target of the centered plug-in estimator
  Eigen::VectorXd mu_bar = Eigen::VectorXd::Zero(3);
  for (const auto& p : inst.perturbations) mu_bar += p.mean_shift;
  mu_bar /= 5.0;
  Eigen::MatrixXd a_pop = Eigen::MatrixXd::Zero(3, 3);
  Eigen::MatrixXd h_pop = Eigen::MatrixXd::Zero(3, 3);
  for (const auto& p : inst.perturbations) {
    const PopulationMoments m = population_moments(inst.spec, p);
    const Eigen::VectorXd dev = p.mean_shift - mu_bar;
    a_pop += m.cov_x + dev * dev.transpose();
    h_pop += dev * dev.transpose();
  }
  a_pop /= 5.0;
  h_pop /= 5.0;
  const PopulationMoments pm =
      population_moments(inst.spec, inst.perturbations.front());
  const Eigen::VectorXd beta_pop =
      (a_pop + gamma * h_pop).ldlt().solve(pm.r0.linear);

  int monotone = 0;
  int final_ok = 0;
  double worst_final = 0.0;
  for (int seed = 0; seed < 20; ++seed) {
    double prev = std::numeric_limits<double>::infinity();
    bool mono = true;
    double last_rel = 0.0;
    for (long n : {1000L, 10000L, 100000L}) {
      const MultiEnvDataset ds = simulate_dataset(
          inst.spec, inst.perturbations, n / 5,
          Rng::derive(2300 + seed, {static_cast<std::uint64_t>(n)}));
      const auto [labeled, unlabeled] = split_views(ds);
      const FittedModel model = fit_mir(labeled, unlabeled, gamma);
      const double err = (model.beta - beta_pop).norm();
      if (err >= prev) mono = false;
      prev = err;
      last_rel = err / beta_pop.norm();
    }
    if (mono) ++monotone;
    if (last_rel < 0.05) ++final_ok;
    worst_final = std::max(worst_final, last_rel);
  }
  const bool pass = monotone >= 18 && final_ok == 20;
  std::ostringstream detail;
  detail << "monotone " << monotone << "/20, worst final relative error "
         << worst_final;
  return {pass, detail.str()};
}

CriterionResult criterion_equivalences() {
  double worst_descent = 0.0;
  for (int i = 0; i < 20; ++i) {
    const MultiEnvDataset ds = equivalence_dataset(900 + i);
    const auto [labeled, unlabeled] = split_views(ds);
    const double gamma = (i % 3) * 0.7;
    const FittedModel closed = fit_mir(labeled, unlabeled, gamma);
    const Eigen::MatrixXd h =
        mir_regularizer(env_moment_summaries(unlabeled, closed.x_offset)).h;
    const FittedModel descent = fit_general_loss(labeled, h, gamma);
    if (!descent.converged) return {false, "gradient descent did not converge"};
    worst_descent =
        std::max(worst_descent, (descent.beta - closed.beta).norm() /
                                    (1.0 + closed.beta.norm()));
  }
  if (worst_descent > 1e-6) {
    return {false,
            "descent vs closed form relative error " + format_double(worst_descent)};
  }

  double worst_zero = 0.0;
  double worst_anchor = 0.0;
  double worst_ridge = 0.0;
  for (int i = 0; i < 10; ++i) {
    const MultiEnvDataset ds = equivalence_dataset(1700 + i);
    const auto [labeled, unlabeled] = split_views(ds);
    const FittedModel ols = fit_ols(labeled);
    worst_zero = std::max(
        worst_zero,
        (fit_mir(labeled, unlabeled, 0.0).beta - ols.beta).cwiseAbs().maxCoeff());
    worst_zero = std::max(
        worst_zero,
        (fit_vir(labeled, unlabeled, 0.0).beta - ols.beta).cwiseAbs().maxCoeff());
    worst_anchor = std::max(
        worst_anchor,
        (fit_anchor(labeled, 1.0).beta - ols.beta).cwiseAbs().maxCoeff());

    // identity-penalty route vs the ridge fitter
    Eigen::VectorXd x_offset = Eigen::VectorXd::Zero(ds.dim());
    double y_offset = 0.0;
    Eigen::Index k = 0;
    for (const auto& rows : labeled.rows_by_env)
      for (int r : rows) {
        x_offset += ds.features().row(r).transpose();
        y_offset += ds.outcomes()[r];
        ++k;
      }
    x_offset /= static_cast<double>(k);
    y_offset /= static_cast<double>(k);
    const SecondMomentSystem system =
        build_system(labeled, Weighting::Pooled, x_offset, y_offset);
    const double alpha = 0.5 + 0.3 * i;
    const Eigen::VectorXd direct = solve_regularized(
        system, Eigen::MatrixXd::Identity(ds.dim(), ds.dim()), alpha);
    worst_ridge = std::max(
        worst_ridge,
        (fit_pooled_ridge(labeled, alpha).beta - direct).cwiseAbs().maxCoeff());
  }

  const bool pass =
      worst_zero <= 1e-10 && worst_anchor <= 1e-10 && worst_ridge <= 1e-12;
  std::ostringstream detail;
  detail << "descent=" << worst_descent << " gamma0=" << worst_zero
         << " anchor=" << worst_anchor << " ridge=" << worst_ridge;
  return {pass, detail.str()};
}

CriterionResult criterion_mean_shift_robustness() {
  const LinearScmSpec spec = planar_spec();
  Eigen::MatrixXd mean_cov = Eigen::MatrixXd::Zero(2, 2);
  mean_cov(0, 0) = 4.0;
  mean_cov(1, 1) = 0.04;
  const std::vector<double> grid = {1e-2, 1e-1, 1.0, 10.0, 100.0,
                                    1e3,  1e4,  1e5};

  PerturbationSpec test_pert;
  test_pert.mean_shift = vec2(5.0, 0.0);  // along the high-variance axis
  test_pert.cov_shift = Eigen::MatrixXd::Zero(2, 2);

  int wins = 0;
  for (int seed = 0; seed < 20; ++seed) {
    const auto perts =
        make_mean_shift_suite(9, mean_cov, Rng::derive(1000 + seed, {5}));
    const MultiEnvDataset train =
        simulate_dataset(spec, perts, 80, Rng::derive(1000 + seed, {6}));
    const auto [labeled, unlabeled] = split_views(train);
    const EnvironmentSample test_block =
        sample_environment(spec, test_pert, 500, Rng::derive(1000 + seed, {7}));

    const SelectionResult sel = loeo_hyperparam_select(
        labeled, unlabeled, Method::Mir, grid, Weighting::Pooled);
    const FittedModel mir = fit_mir(labeled, unlabeled, sel.selected);
    const FittedModel ols = fit_ols(labeled);
    const double rmse_mir = std::sqrt(
        (test_block.outcomes - predict(mir, test_block.features)).squaredNorm() /
        500.0);
    const double rmse_ols = std::sqrt(
        (test_block.outcomes - predict(ols, test_block.features)).squaredNorm() /
        500.0);
    if (rmse_mir < rmse_ols) ++wins;
  }

  // path geometry on the fixed first-seed instance
  const auto perts = make_mean_shift_suite(9, mean_cov, Rng::derive(1000, {5}));
  const MultiEnvDataset train =
      simulate_dataset(spec, perts, 80, Rng::derive(1000, {6}));
  const auto [labeled, unlabeled] = split_views(train);
  const Eigen::MatrixXd h =
      mir_regularizer(env_moment_summaries(unlabeled)).h;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(h);
  const Eigen::VectorXd top = es.eigenvectors().col(1);

  bool monotone = true;
  double prev_angle = -1.0;
  for (int i = 0; i < 25; ++i) {
    const double gamma = std::pow(10.0, -3.0 + 11.0 * i / 24.0);
    const FittedModel model = fit_mir(labeled, unlabeled, gamma);
    const double angle =
        std::acos(std::min(1.0, std::abs(model.beta.dot(top)) /
                                    model.beta.norm()));
    if (angle < prev_angle - 1e-9) monotone = false;
    prev_angle = angle;
  }
  const FittedModel ols = fit_ols(labeled);
  const FittedModel extreme = fit_mir(labeled, unlabeled, 1e8);
  const double norm_ratio = extreme.beta.norm() / ols.beta.norm();

  const bool pass = wins >= 18 && monotone && norm_ratio <= 1e-3;
  std::ostringstream detail;
  detail << "wins " << wins << "/20, angle monotone " << (monotone ? 1 : 0)
         << ", |beta(1e8)|/|beta_ols| = " << norm_ratio;
  return {pass, detail.str()};
}

CriterionResult criterion_gradient_checks() {
  Rng rng(2718);
  double worst = 0.0;
  for (LossKind loss :
       {LossKind::Squared, LossKind::Logistic, LossKind::Huber}) {
    GeneralLossObjective objective;
    const int d = 4, k = 60;
    objective.x = normal_matrix(rng, k, d);
    objective.y.resize(k);
    for (int i = 0; i < k; ++i)
      objective.y[i] = loss == LossKind::Logistic
                           ? static_cast<double>(rng.uniform_index(2))
                           : rng.normal();
    const Eigen::MatrixXd g = normal_matrix(rng, d, d);
    objective.h = symmetrized(g * g.transpose());
    objective.gamma = 0.4;
    objective.loss = loss;
    objective.huber_delta = 0.9;

    for (int trial = 0; trial < 50; ++trial) {
      const Eigen::VectorXd beta = normal_vector(rng, d);
      const Eigen::VectorXd analytic = objective.gradient(beta);
      Eigen::VectorXd numeric(d);
      for (int j = 0; j < d; ++j) {
        const double step = 1e-6 * std::max(1.0, std::abs(beta[j]));
        Eigen::VectorXd hi = beta, lo = beta;
        hi[j] += step;
        lo[j] -= step;
        numeric[j] = (objective.value(hi) - objective.value(lo)) / (2.0 * step);
      }
      worst = std::max(worst,
                       (analytic - numeric).norm() / (1.0 + analytic.norm()));
    }
  }
  std::ostringstream detail;
  detail << "max relative gradient error = " << worst;
  return {worst <= 1e-5, detail.str()};
}

CriterionResult criterion_protocol_trend() {
  const LinearScmSpec spec = planar_spec();
  Eigen::MatrixXd mean_cov = Eigen::MatrixXd::Zero(2, 2);
  mean_cov(0, 0) = 4.0;
  mean_cov(1, 1) = 0.04;
  const auto perts = make_mean_shift_suite(6, mean_cov, 808);
  const MultiEnvDataset ds =
      simulate_dataset(spec, perts, 150, Rng::derive(808, {1}));
  const std::vector<double> grid = {1e-2, 1e-1, 1.0, 10.0, 100.0,
                                    1e3,  1e4,  1e5};

  std::ostringstream detail;
  bool shape_ok = true;
  double mir_rmse_at_3 = 0.0;
  double ridge_rmse_at_3 = 0.0;
  for (int n_labeled : {3, 4, 5}) {
    for (Method method : {Method::Mir, Method::Ridge}) {
      ProtocolConfig config;
      config.method = method;
      config.grid = grid;
      config.n_labeled = n_labeled;
      config.trials = 20;
      config.seed = 99;
      const EvalReport report = run_loeo_protocol(ds, config);
      const int expected = n_labeled == 5 ? 6 : 120;  // p x trials
      if (static_cast<int>(report.records.size()) != expected) shape_ok = false;
      const MetricAggregate agg = report.rmse_aggregate();
      if (!std::isfinite(agg.mean) || !std::isfinite(agg.standard_error))
        shape_ok = false;
      if (n_labeled == 3) {
        if (method == Method::Mir)
          mir_rmse_at_3 = agg.mean;
        else
          ridge_rmse_at_3 = agg.mean;
      }
      detail << method_name(method) << "@" << n_labeled << "="
             << format_double(agg.mean) << " ";
    }
  }
  const bool pass = shape_ok && mir_rmse_at_3 <= ridge_rmse_at_3;
  return {pass, detail.str()};
}

CriterionResult criterion_metric_units() {
  const Eigen::VectorXd truth = (Eigen::VectorXd(4) << 1.0, 2.0, 3.0, 6.0).finished();
  const Eigen::VectorXd constant = Eigen::VectorXd::Constant(4, truth.mean());
  const bool nmse_ok = nmse(constant, truth) == 1.0;

  const Eigen::VectorXd up = (Eigen::VectorXd(4) << 1.0, 2.0, 5.0, 9.0).finished();
  const bool spear_ok =
      spearman(up, truth) == 1.0 && spearman(-up, truth) == -1.0;

  const bool cvar_ok = cvar({1.0, 2.0, 3.0, 4.0}, 0.0) == 2.5;

  const Eigen::VectorXd series = (Eigen::VectorXd(3) << 0.0, 3.0, 0.0).finished();
  const bool ma_ok = moving_average(series, 1) == series;

  std::ostringstream detail;
  detail << "nmse=" << nmse_ok << " spearman=" << spear_ok
         << " cvar=" << cvar_ok << " moving_average=" << ma_ok;
  return {nmse_ok && spear_ok && cvar_ok && ma_ok, detail.str()};
}

}  // namespace

int main() {
  struct Criterion {
    int number;
    const char* label;
    double time_limit_s;
    std::function<CriterionResult()> run;
  };

  const std::vector<Criterion> criteria = {
      {1, "worked covariance-pair example", 1.0, criterion_worked_example},
      {2, "mean-shift worst-case duality", 60.0,
       [] { return criterion_duality(PerturbationClassKind::MirDiamond); }},
      {3, "covariance-shift worst-case duality", 60.0,
       [] { return criterion_duality(PerturbationClassKind::VirDagger); }},
      {4, "shared-eigenbasis identity", 10.0, criterion_shared_eigenbasis},
      {5, "plug-in estimator consistency", 120.0, criterion_consistency},
      {6, "estimator equivalences", 60.0, criterion_equivalences},
      {7, "mean-shift robustness and path geometry", 60.0,
       criterion_mean_shift_robustness},
      {8, "analytic gradients", 30.0, criterion_gradient_checks},
      {9, "semi-supervised protocol trend", 300.0, criterion_protocol_trend},
      {10, "metric unit identities", 1.0, criterion_metric_units},
  };

  int failures = 0;
  for (const auto& criterion : criteria) {
    const auto start = std::chrono::steady_clock::now();
    CriterionResult result;
    try {
      result = criterion.run();
    } catch (const std::exception& e) {
      result.pass = false;
      result.detail = std::string("exception: ") + e.what();
    }
    const double elapsed =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start)
            .count();
    const bool in_time = elapsed < criterion.time_limit_s;
    const bool pass = result.pass && in_time;
    if (!pass) ++failures;
    std::printf("%s criterion %2d: %s (%s) [%.2f s%s]\n",
                pass ? "PASS" : "FAIL", criterion.number, criterion.label,
                result.detail.c_str(), elapsed,
                in_time ? "" : ", over budget");
  }
  if (failures) std::printf("%d criterion(s) failed\n", failures);
  return failures;
}
