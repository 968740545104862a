#pragma once

#include <string>
#include <vector>

#include <Eigen/Core>

#include "invreg/dataset.hpp"
#include "invreg/moments.hpp"

namespace invreg {

enum class Weighting { Pooled, EnvBalanced };

enum class Method { Mir, Vir, MirVir, Ols, Ridge, Anchor, GroupDro, GeneralLoss };

std::string method_name(Method m);
Method method_from_name(const std::string& name);

std::string weighting_name(Weighting w);
Weighting weighting_from_name(const std::string& name);

// Linear model plus the centering used at fit time. Predictions are
// beta'(x - x_offset) + y_offset.
struct FittedModel {
  Eigen::VectorXd beta;
  Eigen::VectorXd x_offset;
  double y_offset = 0.0;
  Method method = Method::Ols;
  std::vector<double> gammas;  // effective strengths; meaning is method-specific
  std::vector<EnvironmentId> labeled_envs;
  bool converged = true;
};

// Averaged normal-equation blocks built from labeled data: second_moment is
// the averaged x x' term and cross_moment the averaged x y term. Pooled
// weighting averages over observations, env-balanced over environments.
struct SecondMomentSystem {
  Eigen::MatrixXd second_moment;
  Eigen::VectorXd cross_moment;
  Weighting weighting = Weighting::Pooled;
  Eigen::Index sample_count = 0;
};

SecondMomentSystem build_system(const LabeledView& view, Weighting weighting);
// Same, with the rows shifted by (x_offset, y_offset) on the fly.
SecondMomentSystem build_system(const LabeledView& view, Weighting weighting,
                                const Eigen::VectorXd& x_offset,
                                double y_offset);

// Unique minimizer of beta'(A + gamma H)beta - 2 b'beta, solved by an LDLT
// factorization of the symmetrized system. Throws NumericalError when the
// smallest singular value is <= 1e-10 times the largest (pass jitter > 0 to
// add jitter * trace(A)/d to the diagonal first). The solution must satisfy
// |(A + gamma H) beta - b| <= max(1e-8 |b|, 1e-12).
Eigen::VectorXd solve_regularized(const SecondMomentSystem& system,
                                  const Eigen::MatrixXd& h, double gamma,
                                  double jitter = 0.0);

struct FitOptions {
  Weighting weighting = Weighting::Pooled;
  double jitter = 0.0;
};

// All fitters center features and outcomes by their pooled labeled means
// before solving and store the offsets in the model. The regularizer is
// estimated from the unlabeled view with the same feature offset applied
// (a global shift leaves both regularizers unchanged, so this keeps a
// single data path without altering the penalty).
FittedModel fit_mir(const LabeledView& labeled, const UnlabeledView& unlabeled,
                    double gamma, const FitOptions& options = {});
FittedModel fit_vir(const LabeledView& labeled, const UnlabeledView& unlabeled,
                    double gamma, const FitOptions& options = {});
FittedModel fit_mir_vir(const LabeledView& labeled,
                        const UnlabeledView& unlabeled, double gamma_mean,
                        double gamma_cov, const FitOptions& options = {});

FittedModel fit_ols(const LabeledView& labeled, const FitOptions& options = {});
FittedModel fit_pooled_ridge(const LabeledView& labeled, double alpha,
                             double jitter = 0.0);

// Anchor regression: residual components explained by environment indicators
// are inflated by sqrt(gamma) before an OLS solve. gamma = 1 is plain OLS;
// gamma = 0 regresses on per-environment-demeaned data. With a single
// labeled environment the projection is degenerate after centering and the
// fit equals OLS.
FittedModel fit_anchor(const LabeledView& labeled, double gamma,
                       const FitOptions& options = {});

struct GroupDroOptions {
  int iterations = 500;
  Weighting weighting = Weighting::Pooled;
  double jitter = 0.0;
  // when set, receives the group-weight vector after every update
  std::vector<Eigen::VectorXd>* weight_trace = nullptr;
};

// Exponentiated-gradient GroupDRO: alternates a closed-form weighted
// least-squares solve with multiplicative weight updates
// q_e <- q_e exp(step_size * mse_e), and returns the uniform average of the
// per-iteration coefficients.
FittedModel fit_group_dro(const LabeledView& labeled, double step_size,
                          const GroupDroOptions& options = {});

enum class LossKind { Squared, Logistic, Huber };

struct GeneralLossOptions {
  LossKind loss = LossKind::Squared;
  double huber_delta = 1.0;
  double step_size = 1.0;
  int max_iterations = 50000;
  double tolerance = 1e-10;
  Weighting weighting = Weighting::Pooled;
};

// (1/k) sum_i loss(beta'x_i, y_i) + gamma beta'H beta over fixed data; used
// by the gradient-descent path and by the finite-difference checks.
struct GeneralLossObjective {
  Eigen::MatrixXd x;  // k x d
  Eigen::VectorXd y;  // k
  Eigen::MatrixXd h;  // d x d symmetric PSD
  double gamma = 0.0;
  LossKind loss = LossKind::Squared;
  double huber_delta = 1.0;

  double value(const Eigen::VectorXd& beta) const;
  Eigen::VectorXd gradient(const Eigen::VectorXd& beta) const;
};

// Gradient descent with backtracking line search on the objective above.
// Squared-loss fits agree with solve_regularized on the same data.
// Logistic loss requires outcomes in {0, 1}; outcomes are then left
// uncentered and the model's y_offset is zero. Non-convergence returns the
// best iterate with converged = false.
FittedModel fit_general_loss(const LabeledView& labeled,
                             const Eigen::MatrixXd& h, double gamma,
                             const GeneralLossOptions& options = {});

Eigen::VectorXd predict(const FittedModel& model, const Eigen::MatrixXd& x);

// mean squared prediction error over the labeled rows of a view
double mean_squared_error(const FittedModel& model, const LabeledView& view);

void save_model(const std::string& path, const FittedModel& model);
FittedModel load_model(const std::string& path);

}  // namespace invreg
