#include "invreg/moments.hpp"

#include <cmath>
#include <stdexcept>

#include "invreg/linalg.hpp"

namespace invreg {

namespace {

Eigen::Index common_dim(std::span<const MomentSummary> summaries) {
  if (summaries.empty())
    throw std::invalid_argument("no moment summaries given");
  const Eigen::Index d = summaries.front().mean.size();
  for (const auto& s : summaries) {
    if (s.mean.size() != d || s.cov.rows() != d || s.cov.cols() != d)
      throw std::invalid_argument("moment summaries have mismatched dimensions");
  }
  return d;
}

// deviations A_i = cov_i - mean of covs, divisor p
std::vector<Eigen::MatrixXd> cov_deviations(
    std::span<const MomentSummary> summaries) {
  const Eigen::Index d = common_dim(summaries);
  Eigen::MatrixXd avg = Eigen::MatrixXd::Zero(d, d);
  for (const auto& s : summaries) avg += s.cov;
  avg /= static_cast<double>(summaries.size());
  std::vector<Eigen::MatrixXd> out;
  out.reserve(summaries.size());
  for (const auto& s : summaries) out.push_back(s.cov - avg);
  return out;
}

}  // namespace

std::vector<MomentSummary> env_moment_summaries(
    const UnlabeledView& view, const std::optional<Eigen::VectorXd>& shift) {
  if (view.data == nullptr || view.env_indices.empty())
    throw std::invalid_argument("empty unlabeled view");
  const Eigen::MatrixXd& x = view.data->features();
  const Eigen::Index d = x.cols();
  if (shift && shift->size() != d)
    throw std::invalid_argument("shift dimension does not match features");

  std::vector<MomentSummary> out;
  out.reserve(view.env_indices.size());
  for (std::size_t i = 0; i < view.env_indices.size(); ++i) {
    const auto& rows = view.rows_by_env[i];
    if (rows.empty()) throw std::invalid_argument("environment has no rows");
    const double inv_n = 1.0 / static_cast<double>(rows.size());

    MomentSummary s;
    s.env_index = view.env_indices[i];
    s.env = view.data->environment(s.env_index);
    s.count = static_cast<Eigen::Index>(rows.size());

    Eigen::VectorXd mean = Eigen::VectorXd::Zero(d);
    for (int r : rows) mean += x.row(r).transpose();
    mean *= inv_n;

    Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(d, d);
    for (int r : rows) {
      const Eigen::VectorXd dev = x.row(r).transpose() - mean;
      cov.selfadjointView<Eigen::Lower>().rankUpdate(dev, inv_n);
    }
    cov.triangularView<Eigen::StrictlyUpper>() =
        cov.transpose().triangularView<Eigen::StrictlyUpper>();

    s.mean = shift ? Eigen::VectorXd(mean - *shift) : mean;
    s.cov = symmetrized(cov);
    out.push_back(std::move(s));
  }
  return out;
}

RegularizerMatrix mir_regularizer(std::span<const MomentSummary> summaries) {
  const Eigen::Index d = common_dim(summaries);
  const double p = static_cast<double>(summaries.size());

  Eigen::VectorXd grand = Eigen::VectorXd::Zero(d);
  for (const auto& s : summaries) grand += s.mean;
  grand /= p;

  Eigen::MatrixXd h = Eigen::MatrixXd::Zero(d, d);
  for (const auto& s : summaries) {
    const Eigen::VectorXd dev = s.mean - grand;
    h += dev * dev.transpose();
  }
  h /= p;
  return {psd_clipped(h), RegularizerKind::Mir};
}

RegularizerMatrix vir_regularizer(std::span<const MomentSummary> summaries) {
  const Eigen::Index d = common_dim(summaries);
  const double p = static_cast<double>(summaries.size());

  Eigen::MatrixXd h = Eigen::MatrixXd::Zero(d, d);
  for (const auto& dev : cov_deviations(summaries)) h += dev * dev;
  h /= p;
  return {psd_clipped(h), RegularizerKind::Vir};
}

RegularizerMatrix combined_regularizer(std::span<const MomentSummary> summaries,
                                       double weight_mean, double weight_cov) {
  if (!(weight_mean >= 0.0) || !(weight_cov >= 0.0) ||
      !std::isfinite(weight_mean) || !std::isfinite(weight_cov))
    throw std::invalid_argument("combined regularizer weights must be finite and >= 0");
  const Eigen::MatrixXd h = weight_mean * mir_regularizer(summaries).h +
                            weight_cov * vir_regularizer(summaries).h;
  return {psd_clipped(h), RegularizerKind::Combined};
}

double vir_penalty(std::span<const MomentSummary> summaries,
                   const Eigen::VectorXd& beta) {
  const Eigen::Index d = common_dim(summaries);
  if (beta.size() != d)
    throw std::invalid_argument("beta dimension does not match summaries");
  double acc = 0.0;
  for (const auto& dev : cov_deviations(summaries))
    acc += (dev * beta).squaredNorm();
  return acc / static_cast<double>(summaries.size());
}

double vir_alternative_penalty(std::span<const MomentSummary> summaries,
                               const Eigen::VectorXd& beta) {
  const Eigen::Index d = common_dim(summaries);
  if (beta.size() != d)
    throw std::invalid_argument("beta dimension does not match summaries");
  double acc = 0.0;
  for (const auto& dev : cov_deviations(summaries)) {
    const double q = beta.dot(dev * beta);
    acc += q * q;
  }
  return acc / static_cast<double>(summaries.size());
}

double shared_eigenbasis_penalty(const Eigen::MatrixXd& Q,
                                 const Eigen::MatrixXd& eigenvalue_rows,
                                 const Eigen::VectorXd& beta) {
  const Eigen::Index d = Q.rows();
  if (Q.cols() != d) throw std::invalid_argument("Q must be square");
  if ((Q.transpose() * Q - Eigen::MatrixXd::Identity(d, d))
          .cwiseAbs()
          .maxCoeff() > 1e-10)
    throw std::invalid_argument("Q is not orthogonal within 1e-10");
  if (eigenvalue_rows.cols() != d)
    throw std::invalid_argument("eigenvalue table must have d columns");
  if (eigenvalue_rows.rows() < 1)
    throw std::invalid_argument("eigenvalue table must have >= 1 row");
  if (eigenvalue_rows.minCoeff() < 0.0)
    throw std::invalid_argument("eigenvalues must be >= 0");
  if (beta.size() != d)
    throw std::invalid_argument("beta dimension does not match Q");

  const double p = static_cast<double>(eigenvalue_rows.rows());
  const Eigen::VectorXd rotated = Q.transpose() * beta;
  double acc = 0.0;
  for (Eigen::Index j = 0; j < d; ++j) {
    const double mean = eigenvalue_rows.col(j).mean();
    const double var =
        (eigenvalue_rows.col(j).array() - mean).square().sum() / p;
    acc += var * rotated[j] * rotated[j];
  }
  return acc;
}

}  // namespace invreg
