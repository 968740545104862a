#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "invreg/dataset.hpp"

namespace invreg {

// Per-environment sample moments of the covariates, computed from unlabeled
// data. The covariance uses divisor n_i (not n_i - 1); a single-row
// environment contributes a zero covariance.
struct MomentSummary {
  int env_index = -1;
  EnvironmentId env;
  Eigen::Index count = 0;
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov;
};

enum class RegularizerKind { Mir, Vir, Combined };

// Symmetric PSD d x d penalty matrix H; the fitted objective adds
// gamma * beta' H beta.
struct RegularizerMatrix {
  Eigen::MatrixXd h;
  RegularizerKind kind = RegularizerKind::Mir;
};

// One summary per environment of the view, in registry order. An optional
// shift is subtracted from every row before the moments are taken (a global
// shift moves the means but leaves both regularizers unchanged).
std::vector<MomentSummary> env_moment_summaries(
    const UnlabeledView& view,
    const std::optional<Eigen::VectorXd>& shift = {});

// Covariance of the per-environment means (divisor p): the mean-shift
// penalty matrix. Symmetrized and eigenvalue-clipped before return.
RegularizerMatrix mir_regularizer(std::span<const MomentSummary> summaries);

// Average squared deviation of the per-environment covariances from their
// unweighted mean (divisor p): the covariance-shift penalty matrix.
RegularizerMatrix vir_regularizer(std::span<const MomentSummary> summaries);

// weight_mean * H_mean + weight_cov * H_cov; the solver is then called with
// gamma = 1.
RegularizerMatrix combined_regularizer(std::span<const MomentSummary> summaries,
                                       double weight_mean, double weight_cov);

// beta' H_vir beta = (1/p) sum_i |A_i beta|^2 with A_i the covariance
// deviations.
double vir_penalty(std::span<const MomentSummary> summaries,
                   const Eigen::VectorXd& beta);

// (1/p) sum_i (beta' A_i beta)^2. Diagnostic only: indefinite A_i allow
// directions where the quadratic form cancels to zero while A_i beta != 0,
// so this variant can leave shift-sensitive directions unpenalized.
double vir_alternative_penalty(std::span<const MomentSummary> summaries,
                               const Eigen::VectorXd& beta);

// Covariance-shift penalty evaluated in a shared eigenbasis Q:
// sum_j sigma2_j (Q'beta)_j^2 where sigma2_j is the variance (divisor p) of
// the j-th eigenvalue across environments. eigenvalue_rows is p x d.
double shared_eigenbasis_penalty(const Eigen::MatrixXd& Q,
                                 const Eigen::MatrixXd& eigenvalue_rows,
                                 const Eigen::VectorXd& beta);

}  // namespace invreg
