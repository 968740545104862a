#include "invreg/scm.hpp"

#include <limits>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "invreg/linalg.hpp"
#include "invreg/rng.hpp"

namespace invreg {

namespace {

Eigen::MatrixXd json_to_matrix(const nlohmann::json& j) {
  if (!j.is_array()) throw std::invalid_argument("expected a matrix (array of arrays)");
  const Eigen::Index rows = static_cast<Eigen::Index>(j.size());
  if (rows == 0) return Eigen::MatrixXd(0, 0);
  const Eigen::Index cols = static_cast<Eigen::Index>(j.at(0).size());
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    const auto& row = j.at(i);
    if (static_cast<Eigen::Index>(row.size()) != cols)
      throw std::invalid_argument("ragged matrix rows in config");
    for (Eigen::Index k = 0; k < cols; ++k) m(i, k) = row.at(k).get<double>();
  }
  return m;
}

nlohmann::json matrix_to_json(const Eigen::MatrixXd& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(std::move(row));
  }
  return rows;
}

Eigen::VectorXd json_to_vector(const nlohmann::json& j) {
  Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
  for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = j.at(i).get<double>();
  return v;
}

nlohmann::json vector_to_json(const Eigen::VectorXd& v) {
  nlohmann::json out = nlohmann::json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v[i]);
  return out;
}

}  // namespace

void LinearScmSpec::validate() const {
  const Eigen::Index q = confounder_dim();
  const Eigen::Index d = dim();
  if (d < 1) throw std::invalid_argument("SCM covariate dimension must be >= 1");
  if (C.rows() != d || C.cols() != q)
    throw std::invalid_argument("SCM confounder loading C must be d x q");
  if (!(var_eps_y > 0.0))
    throw std::invalid_argument("var_eps_y must be positive");
  if (cov_eps_x.rows() != d || cov_eps_x.cols() != d)
    throw std::invalid_argument("cov_eps_x must be d x d");
  if (asymmetry(cov_eps_x) > 1e-10 * std::max(1.0, cov_eps_x.cwiseAbs().maxCoeff()))
    throw std::invalid_argument("cov_eps_x must be symmetric");
  if (!is_psd(symmetrized(cov_eps_x)))
    throw std::invalid_argument("cov_eps_x must be positive semi-definite");
}

Eigen::MatrixXd PerturbationSpec::second_moment() const {
  return cov_shift + mean_shift * mean_shift.transpose();
}

void PerturbationSpec::validate() const {
  const Eigen::Index d = dim();
  if (d < 1) throw std::invalid_argument("perturbation dimension must be >= 1");
  if (cov_shift.rows() != d || cov_shift.cols() != d)
    throw std::invalid_argument("cov_shift must match mean_shift dimension");
  if (asymmetry(cov_shift) > 1e-10 * std::max(1.0, cov_shift.cwiseAbs().maxCoeff()))
    throw std::invalid_argument("cov_shift must be symmetric");
  if (!is_psd(symmetrized(cov_shift)))
    throw std::invalid_argument("cov_shift must be positive semi-definite");
}

EnvironmentSample sample_environment(const LinearScmSpec& spec,
                                     const PerturbationSpec& pert,
                                     Eigen::Index n, std::uint64_t seed) {
  spec.validate();
  pert.validate();
  if (pert.dim() != spec.dim())
    throw std::invalid_argument("perturbation dimension does not match SCM");
  if (n < 1) throw std::invalid_argument("sample size must be >= 1");

  const Eigen::Index d = spec.dim();
  const Eigen::Index q = spec.confounder_dim();
  const Eigen::MatrixXd sqrt_eps_x = matrix_sqrt_psd(spec.cov_eps_x);
  const Eigen::MatrixXd sqrt_shift = matrix_sqrt_psd(pert.cov_shift);
  const double sd_eps_y = std::sqrt(spec.var_eps_y);

  Rng rng(seed);
  EnvironmentSample sample;
  sample.features.resize(n, d);
  sample.outcomes.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const Eigen::VectorXd u = normal_vector(rng, q);
    const double y = spec.w.dot(u) + sd_eps_y * rng.normal();
    const Eigen::VectorXd eps_x = sqrt_eps_x * normal_vector(rng, d);
    const Eigen::VectorXd eps_env =
        pert.mean_shift + sqrt_shift * normal_vector(rng, d);
    sample.features.row(i) =
        (spec.b * y + spec.C * u + eps_x + eps_env).transpose();
    sample.outcomes[i] = y;
  }
  return sample;
}

double R0Form::value(const Eigen::VectorXd& beta) const {
  return const_term - 2.0 * beta.dot(linear) + beta.dot(quadratic * beta);
}

Eigen::VectorXd R0Form::gradient(const Eigen::VectorXd& beta) const {
  return 2.0 * (quadratic * beta - linear);
}

PopulationMoments population_moments(const LinearScmSpec& spec,
                                     const PerturbationSpec& pert) {
  spec.validate();
  pert.validate();
  if (pert.dim() != spec.dim())
    throw std::invalid_argument("perturbation dimension does not match SCM");

  const double var_y = spec.w.squaredNorm() + spec.var_eps_y;
  const Eigen::VectorXd cw = spec.C * spec.w;
  // Z = b*Y + C*U + eps_X
  const Eigen::VectorXd cov_zy = spec.b * var_y + cw;
  const Eigen::MatrixXd var_z =
      var_y * spec.b * spec.b.transpose() + spec.b * cw.transpose() +
      cw * spec.b.transpose() + spec.C * spec.C.transpose() + spec.cov_eps_x;

  PopulationMoments out;
  out.mean_x = pert.mean_shift;
  out.cov_x = symmetrized(var_z + pert.cov_shift);
  out.second_moment = symmetrized(pert.second_moment());
  out.r0.const_term = var_y;
  out.r0.linear = cov_zy;
  out.r0.quadratic = symmetrized(var_z);
  return out;
}

std::vector<PerturbationSpec> make_mean_shift_suite(
    int p, const Eigen::MatrixXd& mean_cov, std::uint64_t seed) {
  if (p < 2) throw std::invalid_argument("mean-shift suite needs p >= 2");
  if (mean_cov.rows() != mean_cov.cols())
    throw std::invalid_argument("mean_cov must be square");
  if (!is_psd(symmetrized(mean_cov)))
    throw std::invalid_argument("mean_cov must be positive semi-definite");
  const Eigen::Index d = mean_cov.rows();
  const Eigen::MatrixXd sqrt_cov = matrix_sqrt_psd(mean_cov);

  Rng rng(seed);
  std::vector<PerturbationSpec> out;
  out.reserve(p);
  for (int i = 0; i < p; ++i) {
    PerturbationSpec pert;
    pert.mean_shift = sqrt_cov * normal_vector(rng, d);
    pert.cov_shift = Eigen::MatrixXd::Zero(d, d);
    out.push_back(std::move(pert));
  }
  return out;
}

std::vector<PerturbationSpec> make_cov_shift_suite(
    int p, const Eigen::MatrixXd& Q,
    const std::vector<std::pair<double, double>>& eigenvalue_ranges,
    std::uint64_t seed) {
  if (p < 2) throw std::invalid_argument("cov-shift suite needs p >= 2");
  const Eigen::Index d = Q.rows();
  if (Q.cols() != d) throw std::invalid_argument("Q must be square");
  const Eigen::MatrixXd qtq = Q.transpose() * Q;
  if ((qtq - Eigen::MatrixXd::Identity(d, d)).cwiseAbs().maxCoeff() > 1e-10)
    throw std::invalid_argument("Q is not orthogonal within 1e-10");
  if (static_cast<Eigen::Index>(eigenvalue_ranges.size()) != d)
    throw std::invalid_argument("need one eigenvalue range per dimension");
  for (const auto& [lo, hi] : eigenvalue_ranges) {
    if (lo < 0.0) throw std::invalid_argument("eigenvalue ranges must be >= 0");
    if (hi < lo) throw std::invalid_argument("eigenvalue range upper < lower");
  }

  Rng rng(seed);
  std::vector<PerturbationSpec> out;
  out.reserve(p);
  for (int i = 0; i < p; ++i) {
    Eigen::VectorXd lambda(d);
    for (Eigen::Index j = 0; j < d; ++j)
      lambda[j] = rng.uniform(eigenvalue_ranges[j].first,
                              eigenvalue_ranges[j].second);
    PerturbationSpec pert;
    pert.mean_shift = Eigen::VectorXd::Zero(d);
    pert.cov_shift = symmetrized(Q * lambda.asDiagonal() * Q.transpose());
    out.push_back(std::move(pert));
  }
  return out;
}

MultiEnvDataset simulate_dataset(
    const LinearScmSpec& spec, const std::vector<PerturbationSpec>& perts,
    Eigen::Index n_per_env, std::uint64_t seed,
    const std::vector<EnvironmentId>& env_ids,
    const std::optional<std::vector<EnvironmentId>>& labeled_envs) {
  if (perts.empty()) throw std::invalid_argument("no perturbations given");
  std::vector<EnvironmentId> ids = env_ids;
  if (ids.empty()) {
    for (std::size_t i = 0; i < perts.size(); ++i)
      ids.push_back("e" + std::to_string(i + 1));
  }
  if (ids.size() != perts.size())
    throw std::invalid_argument("environment id count must match perturbation count");

  const Eigen::Index p = static_cast<Eigen::Index>(perts.size());
  const Eigen::Index n = p * n_per_env;
  Eigen::MatrixXd features(n, spec.dim());
  Eigen::VectorXd outcomes(n);
  std::vector<EnvironmentId> env_of_row;
  env_of_row.reserve(n);

  for (Eigen::Index e = 0; e < p; ++e) {
    const std::uint64_t env_seed = Rng::derive(seed, {static_cast<std::uint64_t>(e)});
    const EnvironmentSample block =
        sample_environment(spec, perts[e], n_per_env, env_seed);
    features.middleRows(e * n_per_env, n_per_env) = block.features;
    outcomes.segment(e * n_per_env, n_per_env) = block.outcomes;
    for (Eigen::Index i = 0; i < n_per_env; ++i) env_of_row.push_back(ids[e]);
  }

  if (labeled_envs) {
    std::vector<bool> keep(p, false);
    for (const auto& id : *labeled_envs) {
      bool found = false;
      for (Eigen::Index e = 0; e < p; ++e)
        if (ids[e] == id) {
          keep[e] = true;
          found = true;
        }
      if (!found) throw std::invalid_argument("unknown labeled environment: " + id);
    }
    for (Eigen::Index e = 0; e < p; ++e) {
      if (keep[e]) continue;
      outcomes.segment(e * n_per_env, n_per_env)
          .setConstant(std::numeric_limits<double>::quiet_NaN());
    }
  }

  return MultiEnvDataset::from_rows(std::move(features), std::move(outcomes),
                                    env_of_row);
}

nlohmann::json scm_to_json(const LinearScmSpec& spec) {
  nlohmann::json j;
  j["w"] = vector_to_json(spec.w);
  j["b"] = vector_to_json(spec.b);
  j["C"] = matrix_to_json(spec.C);
  j["var_eps_y"] = spec.var_eps_y;
  j["cov_eps_x"] = matrix_to_json(spec.cov_eps_x);
  return j;
}

LinearScmSpec scm_from_json(const nlohmann::json& j) {
  LinearScmSpec spec;
  spec.w = json_to_vector(j.at("w"));
  spec.b = json_to_vector(j.at("b"));
  const Eigen::Index d = spec.b.size();
  const Eigen::Index q = spec.w.size();
  if (j.contains("C") && !j.at("C").empty())
    spec.C = json_to_matrix(j.at("C"));
  else
    spec.C = Eigen::MatrixXd::Zero(d, q);
  if (spec.C.rows() == 0 && spec.C.cols() == 0) spec.C.resize(d, 0);
  spec.var_eps_y = j.at("var_eps_y").get<double>();
  if (j.contains("cov_eps_x"))
    spec.cov_eps_x = json_to_matrix(j.at("cov_eps_x"));
  else
    spec.cov_eps_x = Eigen::MatrixXd::Identity(d, d);
  spec.validate();
  return spec;
}

nlohmann::json perturbation_to_json(const PerturbationSpec& pert) {
  nlohmann::json j;
  j["mean_shift"] = vector_to_json(pert.mean_shift);
  j["cov_shift"] = matrix_to_json(pert.cov_shift);
  return j;
}

PerturbationSpec perturbation_from_json(const nlohmann::json& j) {
  PerturbationSpec pert;
  pert.mean_shift = json_to_vector(j.at("mean_shift"));
  const Eigen::Index d = pert.mean_shift.size();
  if (j.contains("cov_shift"))
    pert.cov_shift = json_to_matrix(j.at("cov_shift"));
  else
    pert.cov_shift = Eigen::MatrixXd::Zero(d, d);
  pert.validate();
  return pert;
}

}  // namespace invreg
