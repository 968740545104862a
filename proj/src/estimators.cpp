#include "invreg/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <stdexcept>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <nlohmann/json.hpp>

#include "invreg/linalg.hpp"

namespace invreg {

namespace {

struct CenteredStats {
  Eigen::VectorXd x_offset;
  double y_offset = 0.0;
};

CenteredStats pooled_offsets(const LabeledView& view) {
  const Eigen::MatrixXd& x = view.data->features();
  const Eigen::VectorXd& y = view.data->outcomes();
  CenteredStats stats;
  stats.x_offset = Eigen::VectorXd::Zero(view.dim());
  double y_sum = 0.0;
  Eigen::Index k = 0;
  for (const auto& rows : view.rows_by_env) {
    for (int r : rows) {
      stats.x_offset += x.row(r).transpose();
      y_sum += y[r];
      ++k;
    }
  }
  if (k == 0) throw std::invalid_argument("labeled view is empty");
  stats.x_offset /= static_cast<double>(k);
  stats.y_offset = y_sum / static_cast<double>(k);
  return stats;
}

std::vector<EnvironmentId> view_env_ids(const LabeledView& view) {
  std::vector<EnvironmentId> ids;
  ids.reserve(view.env_indices.size());
  for (int e : view.env_indices) ids.push_back(view.data->environment(e));
  return ids;
}

double sigmoid(double u) {
  if (u >= 0.0) return 1.0 / (1.0 + std::exp(-u));
  const double e = std::exp(u);
  return e / (1.0 + e);
}

double softplus(double u) {
  return u > 0.0 ? u + std::log1p(std::exp(-u)) : std::log1p(std::exp(u));
}

}  // namespace

std::string method_name(Method m) {
  switch (m) {
    case Method::Mir: return "mir";
    case Method::Vir: return "vir";
    case Method::MirVir: return "mir_vir";
    case Method::Ols: return "ols";
    case Method::Ridge: return "ridge";
    case Method::Anchor: return "anchor";
    case Method::GroupDro: return "group_dro";
    case Method::GeneralLoss: return "general_loss";
  }
  throw std::invalid_argument("unknown method");
}

Method method_from_name(const std::string& name) {
  if (name == "mir") return Method::Mir;
  if (name == "vir") return Method::Vir;
  if (name == "mir_vir") return Method::MirVir;
  if (name == "ols") return Method::Ols;
  if (name == "ridge") return Method::Ridge;
  if (name == "anchor") return Method::Anchor;
  if (name == "group_dro") return Method::GroupDro;
  if (name == "general_loss") return Method::GeneralLoss;
  throw std::invalid_argument("unknown method: " + name);
}

std::string weighting_name(Weighting w) {
  return w == Weighting::Pooled ? "pooled" : "balanced";
}

Weighting weighting_from_name(const std::string& name) {
  if (name == "pooled") return Weighting::Pooled;
  if (name == "balanced") return Weighting::EnvBalanced;
  throw std::invalid_argument("unknown weighting: " + name);
}

SecondMomentSystem build_system(const LabeledView& view, Weighting weighting) {
  return build_system(view, weighting,
                      Eigen::VectorXd::Zero(view.dim()), 0.0);
}

SecondMomentSystem build_system(const LabeledView& view, Weighting weighting,
                                const Eigen::VectorXd& x_offset,
                                double y_offset) {
  if (view.data == nullptr || view.env_indices.empty())
    throw std::invalid_argument("labeled view is empty");
  if (x_offset.size() != view.dim())
    throw std::invalid_argument("x_offset dimension mismatch");

  const Eigen::MatrixXd& x = view.data->features();
  const Eigen::VectorXd& y = view.data->outcomes();
  const Eigen::Index d = view.dim();

  SecondMomentSystem system;
  system.weighting = weighting;
  system.second_moment = Eigen::MatrixXd::Zero(d, d);
  system.cross_moment = Eigen::VectorXd::Zero(d);

  Eigen::Index k_total = 0;
  for (const auto& rows : view.rows_by_env) k_total += rows.size();
  if (k_total == 0) throw std::invalid_argument("labeled view is empty");
  system.sample_count = k_total;

  const double env_count = static_cast<double>(view.env_indices.size());
  for (const auto& rows : view.rows_by_env) {
    Eigen::MatrixXd sum_xx = Eigen::MatrixXd::Zero(d, d);
    Eigen::VectorXd sum_xy = Eigen::VectorXd::Zero(d);
    for (int r : rows) {
      const Eigen::VectorXd xc = x.row(r).transpose() - x_offset;
      const double yc = y[r] - y_offset;
      sum_xx.selfadjointView<Eigen::Lower>().rankUpdate(xc, 1.0);
      sum_xy += xc * yc;
    }
    sum_xx.triangularView<Eigen::StrictlyUpper>() =
        sum_xx.transpose().triangularView<Eigen::StrictlyUpper>();
    const double weight =
        weighting == Weighting::Pooled
            ? 1.0 / static_cast<double>(k_total)
            : 1.0 / (env_count * static_cast<double>(rows.size()));
    system.second_moment += weight * sum_xx;
    system.cross_moment += weight * sum_xy;
  }
  system.second_moment = symmetrized(system.second_moment);
  return system;
}

Eigen::VectorXd solve_regularized(const SecondMomentSystem& system,
                                  const Eigen::MatrixXd& h, double gamma,
                                  double jitter) {
  const Eigen::Index d = system.second_moment.rows();
  if (h.rows() != d || h.cols() != d)
    throw std::invalid_argument("regularizer dimension mismatch");
  if (!(gamma >= 0.0) || !std::isfinite(gamma))
    throw std::invalid_argument("gamma must be finite and >= 0");

  Eigen::MatrixXd m = symmetrized(system.second_moment + gamma * h);
  if (jitter > 0.0) {
    const double scale = system.second_moment.trace() / static_cast<double>(d);
    m += jitter * scale * Eigen::MatrixXd::Identity(d, d);
  }

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m, Eigen::EigenvaluesOnly);
  const double largest = es.eigenvalues().cwiseAbs().maxCoeff();
  const double smallest = es.eigenvalues().cwiseAbs().minCoeff();
  if (largest <= 0.0 || smallest <= 1e-10 * largest) {
    throw NumericalError(
        "regularized system is singular (condition estimate " +
        format_double(largest / std::max(smallest,
                                         std::numeric_limits<double>::min())) +
        "); consider --jitter");
  }

  const Eigen::VectorXd& b = system.cross_moment;
  Eigen::LDLT<Eigen::MatrixXd> ldlt(m);
  Eigen::VectorXd beta = ldlt.solve(b);
  // one refinement step before enforcing the residual contract
  beta += ldlt.solve(b - m * beta);
  const double residual = (m * beta - b).norm();
  const double tol = std::max(1e-8 * b.norm(), 1e-12);
  if (!(residual <= tol))
    throw NumericalError("solver residual " + format_double(residual) +
                         " exceeds tolerance " + format_double(tol));
  return beta;
}

namespace {

FittedModel fit_regularized_impl(const LabeledView& labeled,
                                 const UnlabeledView& unlabeled,
                                 Method method, double gamma_mean,
                                 double gamma_cov,
                                 const FitOptions& options) {
  const CenteredStats stats = pooled_offsets(labeled);
  const SecondMomentSystem system =
      build_system(labeled, options.weighting, stats.x_offset, stats.y_offset);
  const std::vector<MomentSummary> summaries =
      env_moment_summaries(unlabeled, stats.x_offset);

  RegularizerMatrix reg;
  double gamma = 1.0;
  switch (method) {
    case Method::Mir:
      reg = mir_regularizer(summaries);
      gamma = gamma_mean;
      break;
    case Method::Vir:
      reg = vir_regularizer(summaries);
      gamma = gamma_cov;
      break;
    case Method::MirVir:
      reg = combined_regularizer(summaries, gamma_mean, gamma_cov);
      gamma = 1.0;
      break;
    default:
      throw std::invalid_argument("unsupported method for regularized fit");
  }

  FittedModel model;
  model.beta = solve_regularized(system, reg.h, gamma, options.jitter);
  model.x_offset = stats.x_offset;
  model.y_offset = stats.y_offset;
  model.method = method;
  model.gammas = method == Method::MirVir
                     ? std::vector<double>{gamma_mean, gamma_cov}
                     : std::vector<double>{gamma};
  model.labeled_envs = view_env_ids(labeled);
  return model;
}

}  // namespace

FittedModel fit_mir(const LabeledView& labeled, const UnlabeledView& unlabeled,
                    double gamma, const FitOptions& options) {
  if (!(gamma >= 0.0)) throw std::invalid_argument("gamma must be >= 0");
  return fit_regularized_impl(labeled, unlabeled, Method::Mir, gamma, 0.0,
                              options);
}

FittedModel fit_vir(const LabeledView& labeled, const UnlabeledView& unlabeled,
                    double gamma, const FitOptions& options) {
  if (!(gamma >= 0.0)) throw std::invalid_argument("gamma must be >= 0");
  return fit_regularized_impl(labeled, unlabeled, Method::Vir, 0.0, gamma,
                              options);
}

FittedModel fit_mir_vir(const LabeledView& labeled,
                        const UnlabeledView& unlabeled, double gamma_mean,
                        double gamma_cov, const FitOptions& options) {
  if (!(gamma_mean >= 0.0) || !(gamma_cov >= 0.0))
    throw std::invalid_argument("gammas must be >= 0");
  return fit_regularized_impl(labeled, unlabeled, Method::MirVir, gamma_mean,
                              gamma_cov, options);
}

FittedModel fit_ols(const LabeledView& labeled, const FitOptions& options) {
  const CenteredStats stats = pooled_offsets(labeled);
  const SecondMomentSystem system =
      build_system(labeled, options.weighting, stats.x_offset, stats.y_offset);
  const Eigen::MatrixXd zero =
      Eigen::MatrixXd::Zero(labeled.dim(), labeled.dim());

  FittedModel model;
  model.beta = solve_regularized(system, zero, 0.0, options.jitter);
  model.x_offset = stats.x_offset;
  model.y_offset = stats.y_offset;
  model.method = Method::Ols;
  model.labeled_envs = view_env_ids(labeled);
  return model;
}

FittedModel fit_pooled_ridge(const LabeledView& labeled, double alpha,
                             double jitter) {
  if (!(alpha >= 0.0)) throw std::invalid_argument("alpha must be >= 0");
  const CenteredStats stats = pooled_offsets(labeled);
  const SecondMomentSystem system =
      build_system(labeled, Weighting::Pooled, stats.x_offset, stats.y_offset);
  const Eigen::MatrixXd identity =
      Eigen::MatrixXd::Identity(labeled.dim(), labeled.dim());

  FittedModel model;
  model.beta = solve_regularized(system, identity, alpha, jitter);
  model.x_offset = stats.x_offset;
  model.y_offset = stats.y_offset;
  model.method = Method::Ridge;
  model.gammas = {alpha};
  model.labeled_envs = view_env_ids(labeled);
  return model;
}

FittedModel fit_anchor(const LabeledView& labeled, double gamma,
                       const FitOptions& options) {
  if (!(gamma >= 0.0)) throw std::invalid_argument("gamma must be >= 0");
  const CenteredStats stats = pooled_offsets(labeled);
  const Eigen::MatrixXd& x = labeled.data->features();
  const Eigen::VectorXd& y = labeled.data->outcomes();
  const Eigen::Index d = labeled.dim();
  const double scale = std::sqrt(gamma);

  Eigen::Index k_total = 0;
  for (const auto& rows : labeled.rows_by_env) k_total += rows.size();

  // P projects onto the span of environment indicators (the intercept lies
  // inside that span), i.e. it replaces each row by its environment mean.
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(d, d);
  Eigen::VectorXd b = Eigen::VectorXd::Zero(d);
  const bool degenerate = labeled.env_indices.size() < 2;
  for (const auto& rows : labeled.rows_by_env) {
    Eigen::VectorXd mean_x = Eigen::VectorXd::Zero(d);
    double mean_y = 0.0;
    for (int r : rows) {
      mean_x += x.row(r).transpose() - stats.x_offset;
      mean_y += y[r] - stats.y_offset;
    }
    mean_x /= static_cast<double>(rows.size());
    mean_y /= static_cast<double>(rows.size());

    for (int r : rows) {
      Eigen::VectorXd xc = x.row(r).transpose() - stats.x_offset;
      double yc = y[r] - stats.y_offset;
      if (!degenerate) {
        xc += (scale - 1.0) * mean_x;
        yc += (scale - 1.0) * mean_y;
      }
      a.selfadjointView<Eigen::Lower>().rankUpdate(xc, 1.0);
      b += xc * yc;
    }
  }
  a.triangularView<Eigen::StrictlyUpper>() =
      a.transpose().triangularView<Eigen::StrictlyUpper>();

  SecondMomentSystem system;
  system.second_moment = symmetrized(a / static_cast<double>(k_total));
  system.cross_moment = b / static_cast<double>(k_total);
  system.weighting = Weighting::Pooled;
  system.sample_count = k_total;

  FittedModel model;
  model.beta = solve_regularized(
      system, Eigen::MatrixXd::Zero(d, d), 0.0, options.jitter);
  model.x_offset = stats.x_offset;
  model.y_offset = stats.y_offset;
  model.method = Method::Anchor;
  model.gammas = {gamma};
  model.labeled_envs = view_env_ids(labeled);
  return model;
}

FittedModel fit_group_dro(const LabeledView& labeled, double step_size,
                          const GroupDroOptions& options) {
  if (!(step_size > 0.0)) throw std::invalid_argument("step size must be > 0");
  if (options.iterations < 1)
    throw std::invalid_argument("iteration count must be >= 1");

  const CenteredStats stats = pooled_offsets(labeled);
  const Eigen::MatrixXd& x = labeled.data->features();
  const Eigen::VectorXd& y = labeled.data->outcomes();
  const Eigen::Index d = labeled.dim();
  const std::size_t groups = labeled.rows_by_env.size();

  // per-environment normal-equation blocks of the centered data
  std::vector<Eigen::MatrixXd> a_env(groups);
  std::vector<Eigen::VectorXd> b_env(groups);
  std::vector<double> y2_env(groups);
  Eigen::Index k_total = 0;
  for (std::size_t g = 0; g < groups; ++g) {
    const auto& rows = labeled.rows_by_env[g];
    const double inv = 1.0 / static_cast<double>(rows.size());
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(d, d);
    Eigen::VectorXd b = Eigen::VectorXd::Zero(d);
    double y2 = 0.0;
    for (int r : rows) {
      const Eigen::VectorXd xc = x.row(r).transpose() - stats.x_offset;
      const double yc = y[r] - stats.y_offset;
      a.selfadjointView<Eigen::Lower>().rankUpdate(xc, inv);
      b += inv * xc * yc;
      y2 += inv * yc * yc;
    }
    a.triangularView<Eigen::StrictlyUpper>() =
        a.transpose().triangularView<Eigen::StrictlyUpper>();
    a_env[g] = symmetrized(a);
    b_env[g] = b;
    y2_env[g] = y2;
    k_total += static_cast<Eigen::Index>(rows.size());
  }

  Eigen::VectorXd weights(groups);
  if (options.weighting == Weighting::Pooled) {
    for (std::size_t g = 0; g < groups; ++g)
      weights[g] = static_cast<double>(labeled.rows_by_env[g].size()) /
                   static_cast<double>(k_total);
  } else {
    weights.setConstant(1.0 / static_cast<double>(groups));
  }
  if (options.weight_trace) options.weight_trace->push_back(weights);

  Eigen::VectorXd beta_sum = Eigen::VectorXd::Zero(d);
  for (int t = 0; t < options.iterations; ++t) {
    SecondMomentSystem system;
    system.second_moment = Eigen::MatrixXd::Zero(d, d);
    system.cross_moment = Eigen::VectorXd::Zero(d);
    for (std::size_t g = 0; g < groups; ++g) {
      system.second_moment += weights[g] * a_env[g];
      system.cross_moment += weights[g] * b_env[g];
    }
    system.second_moment = symmetrized(system.second_moment);
    system.weighting = options.weighting;
    system.sample_count = k_total;

    const Eigen::VectorXd beta = solve_regularized(
        system, Eigen::MatrixXd::Zero(d, d), 0.0, options.jitter);
    beta_sum += beta;

    Eigen::VectorXd mse(groups);
    for (std::size_t g = 0; g < groups; ++g) {
      mse[g] = y2_env[g] - 2.0 * beta.dot(b_env[g]) + beta.dot(a_env[g] * beta);
      if (!std::isfinite(mse[g]))
        throw NumericalError("non-finite group loss in GroupDRO");
    }

    // exponentiated-gradient step, stabilized by the max loss
    const double max_mse = mse.maxCoeff();
    double norm = 0.0;
    for (std::size_t g = 0; g < groups; ++g) {
      weights[g] *= std::exp(step_size * (mse[g] - max_mse));
      norm += weights[g];
    }
    weights /= norm;
    if (options.weight_trace) options.weight_trace->push_back(weights);
  }

  FittedModel model;
  model.beta = beta_sum / static_cast<double>(options.iterations);
  model.x_offset = stats.x_offset;
  model.y_offset = stats.y_offset;
  model.method = Method::GroupDro;
  model.gammas = {step_size};
  model.labeled_envs = view_env_ids(labeled);
  return model;
}

double GeneralLossObjective::value(const Eigen::VectorXd& beta) const {
  const Eigen::Index k = x.rows();
  const Eigen::VectorXd u = x * beta;
  double acc = 0.0;
  for (Eigen::Index i = 0; i < k; ++i) {
    switch (loss) {
      case LossKind::Squared: {
        const double r = u[i] - y[i];
        acc += r * r;
        break;
      }
      case LossKind::Logistic:
        acc += softplus(u[i]) - y[i] * u[i];
        break;
      case LossKind::Huber: {
        const double r = u[i] - y[i];
        const double a = std::abs(r);
        acc += a <= huber_delta ? 0.5 * r * r
                                : huber_delta * (a - 0.5 * huber_delta);
        break;
      }
    }
  }
  acc /= static_cast<double>(k);
  return acc + gamma * beta.dot(h * beta);
}

Eigen::VectorXd GeneralLossObjective::gradient(const Eigen::VectorXd& beta) const {
  const Eigen::Index k = x.rows();
  const Eigen::VectorXd u = x * beta;
  Eigen::VectorXd dl(k);
  for (Eigen::Index i = 0; i < k; ++i) {
    switch (loss) {
      case LossKind::Squared:
        dl[i] = 2.0 * (u[i] - y[i]);
        break;
      case LossKind::Logistic:
        dl[i] = sigmoid(u[i]) - y[i];
        break;
      case LossKind::Huber:
        dl[i] = std::clamp(u[i] - y[i], -huber_delta, huber_delta);
        break;
    }
  }
  return x.transpose() * dl / static_cast<double>(k) +
         2.0 * gamma * (h * beta);
}

FittedModel fit_general_loss(const LabeledView& labeled,
                             const Eigen::MatrixXd& h, double gamma,
                             const GeneralLossOptions& options) {
  if (!(gamma >= 0.0)) throw std::invalid_argument("gamma must be >= 0");
  if (h.rows() != labeled.dim() || h.cols() != labeled.dim())
    throw std::invalid_argument("regularizer dimension mismatch");

  CenteredStats stats = pooled_offsets(labeled);
  const bool center_outcomes = options.loss != LossKind::Logistic;
  if (!center_outcomes) stats.y_offset = 0.0;

  const Eigen::MatrixXd& x = labeled.data->features();
  const Eigen::VectorXd& y = labeled.data->outcomes();

  GeneralLossObjective objective;
  objective.h = symmetrized(h);
  objective.gamma = gamma;
  objective.loss = options.loss;
  objective.huber_delta = options.huber_delta;

  Eigen::Index k = 0;
  for (const auto& rows : labeled.rows_by_env) k += rows.size();
  objective.x.resize(k, labeled.dim());
  objective.y.resize(k);
  Eigen::Index i = 0;
  for (const auto& rows : labeled.rows_by_env) {
    for (int r : rows) {
      objective.x.row(i) = x.row(r) - stats.x_offset.transpose();
      objective.y[i] = y[r] - stats.y_offset;
      if (options.loss == LossKind::Logistic && objective.y[i] != 0.0 &&
          objective.y[i] != 1.0)
        throw std::invalid_argument("logistic loss requires outcomes in {0, 1}");
      ++i;
    }
  }

  // Steps are capped by the inverse Lipschitz constant of the gradient so
  // descent is monotone; near the optimum the Armijo decrease underflows in
  // double precision, so an epsilon-level non-increase also counts as
  // accepted instead of halving the step into oblivion.
  const double curvature_per_point =
      options.loss == LossKind::Squared
          ? 2.0
          : (options.loss == LossKind::Logistic ? 0.25 : 1.0);
  const double lipschitz =
      curvature_per_point *
          max_eigenvalue(symmetrized(objective.x.transpose() * objective.x /
                                     static_cast<double>(k))) +
      2.0 * gamma * std::max(max_eigenvalue(objective.h), 0.0);
  const double step_cap =
      lipschitz > 0.0 ? 1.0 / lipschitz : options.step_size;

  Eigen::VectorXd beta = Eigen::VectorXd::Zero(labeled.dim());
  double f = objective.value(beta);
  double step = std::min(options.step_size, step_cap);
  bool converged = false;
  for (int iter = 0; iter < options.max_iterations; ++iter) {
    const Eigen::VectorXd g = objective.gradient(beta);
    const double gnorm = g.norm();
    if (gnorm <= options.tolerance * (1.0 + std::abs(f))) {
      converged = true;
      break;
    }
    step = std::min(2.0 * step, step_cap);
    const double slack = 4.0 * std::numeric_limits<double>::epsilon() *
                         (1.0 + std::abs(f));
    bool accepted = false;
    for (int bt = 0; bt < 60; ++bt) {
      const Eigen::VectorXd candidate = beta - step * g;
      const double f_new = objective.value(candidate);
      if (f_new <= f - 1e-4 * step * gnorm * gnorm || f_new <= f + slack) {
        beta = candidate;
        f = f_new;
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) break;  // no representable progress left
  }

  FittedModel model;
  model.beta = beta;
  model.x_offset = stats.x_offset;
  model.y_offset = stats.y_offset;
  model.method = Method::GeneralLoss;
  model.gammas = {gamma};
  model.labeled_envs = view_env_ids(labeled);
  model.converged = converged;
  return model;
}

Eigen::VectorXd predict(const FittedModel& model, const Eigen::MatrixXd& x) {
  if (x.cols() != model.beta.size())
    throw std::invalid_argument("feature dimension does not match model");
  return ((x.rowwise() - model.x_offset.transpose()) * model.beta).array() +
         model.y_offset;
}

double mean_squared_error(const FittedModel& model, const LabeledView& view) {
  const Eigen::MatrixXd& x = view.data->features();
  const Eigen::VectorXd& y = view.data->outcomes();
  double acc = 0.0;
  Eigen::Index k = 0;
  for (const auto& rows : view.rows_by_env) {
    for (int r : rows) {
      const double pred =
          model.beta.dot(x.row(r).transpose() - model.x_offset) +
          model.y_offset;
      const double err = y[r] - pred;
      acc += err * err;
      ++k;
    }
  }
  if (k == 0) throw std::invalid_argument("view has no labeled rows");
  return acc / static_cast<double>(k);
}

void save_model(const std::string& path, const FittedModel& model) {
  nlohmann::json j;
  j["method"] = method_name(model.method);
  j["gammas"] = model.gammas;
  j["beta"] = std::vector<double>(model.beta.data(),
                                  model.beta.data() + model.beta.size());
  j["x_offset"] = std::vector<double>(
      model.x_offset.data(), model.x_offset.data() + model.x_offset.size());
  j["y_offset"] = model.y_offset;
  j["labeled_envs"] = model.labeled_envs;
  j["converged"] = model.converged;
  std::ofstream out(path);
  if (!out) throw std::invalid_argument("cannot open for writing: " + path);
  out << j.dump(2) << "\n";
}

FittedModel load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open model file: " + path);
  nlohmann::json j;
  in >> j;

  FittedModel model;
  model.method = method_from_name(j.at("method").get<std::string>());
  model.gammas = j.at("gammas").get<std::vector<double>>();
  const auto beta = j.at("beta").get<std::vector<double>>();
  model.beta = Eigen::Map<const Eigen::VectorXd>(beta.data(), beta.size());
  const auto xoff = j.at("x_offset").get<std::vector<double>>();
  model.x_offset = Eigen::Map<const Eigen::VectorXd>(xoff.data(), xoff.size());
  model.y_offset = j.at("y_offset").get<double>();
  model.labeled_envs = j.at("labeled_envs").get<std::vector<std::string>>();
  model.converged = j.value("converged", true);
  return model;
}

}  // namespace invreg
