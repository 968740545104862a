#include "invreg/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include <Eigen/Cholesky>

#include "invreg/linalg.hpp"
#include "invreg/rng.hpp"

namespace invreg {

PerturbationClass build_class(const LinearScmSpec& spec,
                              const std::vector<PerturbationSpec>& training,
                              const std::vector<int>& labeled_idx, double gamma,
                              PerturbationClassKind kind) {
  if (training.empty()) throw std::invalid_argument("no training perturbations");
  if (labeled_idx.empty())
    throw std::invalid_argument("labeled index set is empty");
  if (!(gamma >= 0.0)) throw std::invalid_argument("gamma must be >= 0");
  const Eigen::Index d = spec.dim();
  const int p = static_cast<int>(training.size());
  for (const auto& pert : training)
    if (pert.dim() != d)
      throw std::invalid_argument("perturbation dimension does not match SCM");
  for (int idx : labeled_idx)
    if (idx < 0 || idx >= p)
      throw std::invalid_argument("labeled index out of range");

  PerturbationClass cls;
  cls.kind = kind;
  cls.gamma = gamma;

  Eigen::MatrixXd base = Eigen::MatrixXd::Zero(d, d);
  for (int idx : labeled_idx) base += training[idx].second_moment();
  cls.base_second_moment =
      symmetrized(base / static_cast<double>(labeled_idx.size()));

  // bound uses all p training perturbations, not just the labeled subset
  Eigen::MatrixXd h = Eigen::MatrixXd::Zero(d, d);
  if (kind == PerturbationClassKind::MirDiamond) {
    Eigen::VectorXd grand = Eigen::VectorXd::Zero(d);
    for (const auto& pert : training) grand += pert.mean_shift;
    grand /= static_cast<double>(p);
    for (const auto& pert : training) {
      const Eigen::VectorXd dev = pert.mean_shift - grand;
      h += dev * dev.transpose();
    }
    h /= static_cast<double>(p);
  } else {
    Eigen::MatrixXd avg = Eigen::MatrixXd::Zero(d, d);
    for (const auto& pert : training) avg += pert.cov_shift;
    avg /= static_cast<double>(p);
    for (const auto& pert : training) {
      const Eigen::MatrixXd dev = pert.cov_shift - avg;
      h += dev * dev;
    }
    h /= static_cast<double>(p);
  }
  cls.bound = gamma * psd_clipped(h);
  return cls;
}

std::vector<Eigen::MatrixXd> sample_feasible_shifts(const PerturbationClass& cls,
                                                    int count,
                                                    std::uint64_t seed) {
  if (count < 1) throw std::invalid_argument("count must be >= 1");
  const Eigen::Index d = cls.bound.rows();
  const Eigen::MatrixXd sqrt_bound = matrix_sqrt_psd(cls.bound);

  std::vector<Eigen::MatrixXd> out;
  out.reserve(count);
  out.push_back(cls.bound);  // extreme point, exactly once
  Rng rng(seed);
  for (int i = 1; i < count; ++i) {
    const Eigen::MatrixXd q = random_orthogonal(rng, d);
    Eigen::VectorXd evals(d);
    for (Eigen::Index j = 0; j < d; ++j) evals[j] = rng.uniform01();
    const Eigen::MatrixXd w = q * evals.asDiagonal() * q.transpose();
    out.push_back(symmetrized(sqrt_bound * w * sqrt_bound));
  }
  return out;
}

double risk_at(const R0Form& r0, const Eigen::MatrixXd& second_moment,
               const Eigen::VectorXd& beta) {
  return r0.value(beta) + beta.dot(second_moment * beta);
}

WorstCaseRisk worst_case_risk(const PerturbationClass& cls, const R0Form& r0,
                              const Eigen::VectorXd& beta, int mc_count,
                              std::uint64_t seed) {
  const std::vector<Eigen::MatrixXd> shifts =
      sample_feasible_shifts(cls, std::max(mc_count, 1), seed);
  WorstCaseRisk worst;
  worst.value = -std::numeric_limits<double>::infinity();
  for (const auto& shift : shifts) {
    const double risk = risk_at(r0, cls.base_second_moment + shift, beta);
    if (risk > worst.value) {
      worst.value = risk;
      worst.attaining_shift = shift;
    }
  }
  return worst;
}

double duality_gap(const PerturbationClass& cls, const R0Form& r0,
                   const Eigen::VectorXd& beta, int mc_count,
                   std::uint64_t seed) {
  const double worst = worst_case_risk(cls, r0, beta, mc_count, seed).value;
  const double training = risk_at(r0, cls.base_second_moment, beta);
  const double penalty = beta.dot(cls.bound * beta);
  return std::abs(worst - (training + penalty));
}

Eigen::VectorXd regularized_population_solution(const PerturbationClass& cls,
                                                const R0Form& r0) {
  const Eigen::MatrixXd q =
      symmetrized(r0.quadratic + cls.base_second_moment + cls.bound);
  Eigen::LDLT<Eigen::MatrixXd> ldlt(q);
  if (ldlt.info() != Eigen::Success)
    throw NumericalError("population objective is singular");
  Eigen::VectorXd beta = ldlt.solve(r0.linear);
  beta += ldlt.solve(r0.linear - q * beta);
  return beta;
}

Eigen::VectorXd minimize_worst_case(const PerturbationClass& cls,
                                    const R0Form& r0, double tolerance,
                                    int max_iterations) {
  const Eigen::MatrixXd q =
      symmetrized(r0.quadratic + cls.base_second_moment + cls.bound);
  Eigen::VectorXd beta = Eigen::VectorXd::Zero(q.rows());
  for (int iter = 0; iter < max_iterations; ++iter) {
    const Eigen::VectorXd g = 2.0 * (q * beta - r0.linear);
    const double objective = r0.value(beta) +
                             beta.dot(cls.base_second_moment * beta) +
                             beta.dot(cls.bound * beta);
    if (g.norm() <= tolerance * (1.0 + std::abs(objective))) break;
    const double curvature = 2.0 * g.dot(q * g);
    if (!(curvature > 0.0))
      throw NumericalError("worst-case objective is not strictly convex");
    beta -= (g.squaredNorm() / curvature) * g;
  }
  return beta;
}

OracleInstance random_oracle_instance(int max_dim, int max_envs,
                                      std::uint64_t seed) {
  if (max_dim < 1 || max_envs < 2)
    throw std::invalid_argument("need max_dim >= 1 and max_envs >= 2");
  Rng rng(seed);
  const Eigen::Index d = 1 + static_cast<Eigen::Index>(rng.uniform_index(max_dim));
  const Eigen::Index q = static_cast<Eigen::Index>(rng.uniform_index(3));
  const int p = 2 + static_cast<int>(rng.uniform_index(max_envs - 1));

  OracleInstance inst;
  inst.spec.w = 0.8 * normal_vector(rng, q);
  inst.spec.b = 0.8 * normal_vector(rng, d);
  inst.spec.C = 0.5 * normal_matrix(rng, d, q);
  inst.spec.var_eps_y = rng.uniform(0.5, 1.5);
  {
    const Eigen::MatrixXd basis = random_orthogonal(rng, d);
    Eigen::VectorXd evals(d);
    for (Eigen::Index j = 0; j < d; ++j) evals[j] = rng.uniform(0.3, 1.5);
    inst.spec.cov_eps_x =
        symmetrized(basis * evals.asDiagonal() * basis.transpose());
  }

  for (int e = 0; e < p; ++e) {
    PerturbationSpec pert;
    pert.mean_shift = normal_vector(rng, d);
    const Eigen::MatrixXd basis = random_orthogonal(rng, d);
    Eigen::VectorXd evals(d);
    for (Eigen::Index j = 0; j < d; ++j) evals[j] = rng.uniform(0.0, 1.5);
    pert.cov_shift = symmetrized(basis * evals.asDiagonal() * basis.transpose());
    inst.perturbations.push_back(std::move(pert));
  }

  // non-empty labeled subset
  const int labeled = 1 + static_cast<int>(rng.uniform_index(p));
  inst.labeled_idx = sample_without_replacement(rng, p, labeled);
  std::sort(inst.labeled_idx.begin(), inst.labeled_idx.end());
  return inst;
}

std::vector<OracleCaseReport> run_oracle_suite(const OracleSuiteConfig& config,
                                               PerturbationClassKind kind) {
  std::vector<OracleCaseReport> out;
  for (int i = 0; i < config.instances; ++i) {
    const std::uint64_t inst_seed = Rng::derive(config.seed, {7u, static_cast<std::uint64_t>(i)});
    const OracleInstance inst =
        random_oracle_instance(config.max_dim, config.max_envs, inst_seed);
    const PopulationMoments moments =
        population_moments(inst.spec, inst.perturbations.front());

    for (double gamma : config.gammas) {
      const PerturbationClass cls =
          build_class(inst.spec, inst.perturbations, inst.labeled_idx, gamma, kind);

      OracleCaseReport report;
      report.instance = i;
      report.kind = kind;
      report.gamma = gamma;

      Rng beta_rng(Rng::derive(inst_seed, {11u, static_cast<std::uint64_t>(gamma * 1024)}));
      for (int b = 0; b < config.betas_per_case; ++b) {
        const Eigen::VectorXd beta = normal_vector(beta_rng, inst.spec.dim());
        const std::uint64_t shift_seed =
            Rng::derive(inst_seed, {13u, static_cast<std::uint64_t>(b)});
        const double gap = duality_gap(cls, moments.r0, beta,
                                       config.feasible_samples, shift_seed);
        const double sup =
            worst_case_risk(cls, moments.r0, beta, 1, shift_seed).value;
        report.max_gap = std::max(report.max_gap, gap);
        report.max_relative_gap =
            std::max(report.max_relative_gap, gap / (1.0 + std::abs(sup)));
      }

      const Eigen::VectorXd closed = regularized_population_solution(cls, moments.r0);
      const Eigen::VectorXd numeric = minimize_worst_case(cls, moments.r0);
      report.minimizer_distance = (closed - numeric).norm();
      out.push_back(report);
    }
  }
  return out;
}

}  // namespace invreg
