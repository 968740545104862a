#pragma once

#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include <Eigen/Core>
#include <nlohmann/json_fwd.hpp>

#include "invreg/dataset.hpp"

namespace invreg {

// Linear-Gaussian instantiation of the anti-causal data-generating process:
//   U ~ N(0, I_q),  Y = w'U + eps_Y,  X = b*Y + C*U + eps_X + eps_env,
// with eps_Y ~ N(0, var_eps_y), eps_X ~ N(0, cov_eps_x) and the environment
// perturbation eps_env drawn independently per PerturbationSpec. All
// structural terms have zero mean by construction.
struct LinearScmSpec {
  Eigen::VectorXd w;          // confounder -> outcome, length q
  Eigen::VectorXd b;          // outcome -> covariates, length d
  Eigen::MatrixXd C;          // confounder -> covariates, d x q
  double var_eps_y = 1.0;
  Eigen::MatrixXd cov_eps_x;  // d x d symmetric PSD

  Eigen::Index confounder_dim() const { return w.size(); }
  Eigen::Index dim() const { return b.size(); }
  void validate() const;
};

// Environment perturbation eps_env ~ N(mean_shift, cov_shift). A Gaussian
// with free mean and covariance spans every (mean, covariance) pair, which
// is all the perturbation classes below distinguish.
struct PerturbationSpec {
  Eigen::VectorXd mean_shift;
  Eigen::MatrixXd cov_shift;

  Eigen::Index dim() const { return mean_shift.size(); }
  // second moment E[eps eps'] = cov_shift + mean_shift mean_shift'
  Eigen::MatrixXd second_moment() const;
  void validate() const;
};

struct EnvironmentSample {
  Eigen::MatrixXd features;  // n x d
  Eigen::VectorXd outcomes;  // n
};

// n i.i.d. rows from the SCM under the given perturbation; bit-deterministic
// given the seed.
EnvironmentSample sample_environment(const LinearScmSpec& spec,
                                     const PerturbationSpec& pert,
                                     Eigen::Index n, std::uint64_t seed);

// Environment-invariant part of the risk, E[(Y - beta'Z)^2] with
// Z = b*Y + C*U + eps_X, stored as the quadratic form
//   const_term - 2 beta'linear + beta'quadratic beta.
struct R0Form {
  double const_term = 0.0;       // Var(Y)
  Eigen::VectorXd linear;        // Cov(Z, Y)
  Eigen::MatrixXd quadratic;     // Var(Z)
  double value(const Eigen::VectorXd& beta) const;
  Eigen::VectorXd gradient(const Eigen::VectorXd& beta) const;
};

struct PopulationMoments {
  Eigen::VectorXd mean_x;         // = mean_shift
  Eigen::MatrixXd cov_x;          // Var(Z) + cov_shift
  Eigen::MatrixXd second_moment;  // cov_shift + mean mean'
  R0Form r0;                      // does not depend on the perturbation
};

PopulationMoments population_moments(const LinearScmSpec& spec,
                                     const PerturbationSpec& pert);

// p perturbations with zero covariance and means drawn i.i.d. N(0, mean_cov).
std::vector<PerturbationSpec> make_mean_shift_suite(int p,
                                                    const Eigen::MatrixXd& mean_cov,
                                                    std::uint64_t seed);

// p perturbations with zero mean and covariance Q diag(lambda) Q' where
// lambda_j is uniform in eigenvalue_ranges[j]; all share the eigenbasis Q.
std::vector<PerturbationSpec> make_cov_shift_suite(
    int p, const Eigen::MatrixXd& Q,
    const std::vector<std::pair<double, double>>& eigenvalue_ranges,
    std::uint64_t seed);

// Stacks one sampled block per perturbation into a dataset with environment
// ids env_ids (auto "e1".."ep" when empty). Outcomes outside labeled_envs
// are marked missing; an empty optional labels every row.
MultiEnvDataset simulate_dataset(
    const LinearScmSpec& spec, const std::vector<PerturbationSpec>& perts,
    Eigen::Index n_per_env, std::uint64_t seed,
    const std::vector<EnvironmentId>& env_ids = {},
    const std::optional<std::vector<EnvironmentId>>& labeled_envs = {});

nlohmann::json scm_to_json(const LinearScmSpec& spec);
LinearScmSpec scm_from_json(const nlohmann::json& j);
nlohmann::json perturbation_to_json(const PerturbationSpec& pert);
PerturbationSpec perturbation_from_json(const nlohmann::json& j);

}  // namespace invreg
