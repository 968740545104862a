#pragma once

#include <cstdint>
#include <vector>

#include <Eigen/Core>

#include "invreg/scm.hpp"

namespace invreg {

enum class PerturbationClassKind { MirDiamond, VirDagger };

// Family of test-environment second moments base + A with 0 <= A <= bound
// (Loewner order). The bound is gamma times the population mean-shift or
// covariance-shift regularizer over all training perturbations; the base is
// the average perturbation second moment over the labeled ones.
struct PerturbationClass {
  PerturbationClassKind kind = PerturbationClassKind::MirDiamond;
  Eigen::MatrixXd base_second_moment;
  Eigen::MatrixXd bound;
  double gamma = 0.0;
};

PerturbationClass build_class(const LinearScmSpec& spec,
                              const std::vector<PerturbationSpec>& training,
                              const std::vector<int>& labeled_idx, double gamma,
                              PerturbationClassKind kind);

// count PSD matrices inside [0, bound]; the first is the extreme point
// bound itself (the supremum attainer), the rest are random interior points
// sqrt(bound) W sqrt(bound) with 0 <= W <= I.
std::vector<Eigen::MatrixXd> sample_feasible_shifts(const PerturbationClass& cls,
                                                    int count,
                                                    std::uint64_t seed);

// population risk R0(beta) + beta' M beta for a second moment M
double risk_at(const R0Form& r0, const Eigen::MatrixXd& second_moment,
               const Eigen::VectorXd& beta);

struct WorstCaseRisk {
  double value = 0.0;
  Eigen::MatrixXd attaining_shift;
};

// max of risk_at(base + A) over the sampled shifts; the analytic supremum is
// attained at A = bound, which the sample always contains.
WorstCaseRisk worst_case_risk(const PerturbationClass& cls, const R0Form& r0,
                              const Eigen::VectorXd& beta, int mc_count,
                              std::uint64_t seed);

// |worst-case risk - (training risk + penalty)| where the training risk is
// R0(beta) + beta' base beta and the penalty beta' bound beta; zero up to
// rounding for every beta.
double duality_gap(const PerturbationClass& cls, const R0Form& r0,
                   const Eigen::VectorXd& beta, int mc_count,
                   std::uint64_t seed);

// closed-form minimizer of the regularized population objective
// R0(beta) + beta'(base + bound)beta
Eigen::VectorXd regularized_population_solution(const PerturbationClass& cls,
                                                const R0Form& r0);

// Numeric argmin of the worst-case objective by gradient descent with exact
// line search (the objective is a convex quadratic); independent route to
// the same point as the closed form.
Eigen::VectorXd minimize_worst_case(const PerturbationClass& cls,
                                    const R0Form& r0, double tolerance = 1e-10,
                                    int max_iterations = 1000000);

struct OracleInstance {
  LinearScmSpec spec;
  std::vector<PerturbationSpec> perturbations;
  std::vector<int> labeled_idx;
};

// Random small instance for the duality checks; deterministic given seed.
OracleInstance random_oracle_instance(int max_dim, int max_envs,
                                      std::uint64_t seed);

struct OracleCaseReport {
  int instance = 0;
  PerturbationClassKind kind = PerturbationClassKind::MirDiamond;
  double gamma = 0.0;
  double max_gap = 0.0;           // max over beta draws of duality_gap
  double max_relative_gap = 0.0;  // max of gap / (1 + sup value)
  double minimizer_distance = 0.0;
};

struct OracleSuiteConfig {
  int instances = 50;
  int max_dim = 4;
  int max_envs = 6;
  std::vector<double> gammas = {0.1, 1.0, 10.0};
  int betas_per_case = 200;
  int feasible_samples = 16;
  std::uint64_t seed = 1;
};

std::vector<OracleCaseReport> run_oracle_suite(const OracleSuiteConfig& config,
                                               PerturbationClassKind kind);

}  // namespace invreg
