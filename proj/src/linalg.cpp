#include "invreg/linalg.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <Eigen/Eigenvalues>

namespace invreg {

Eigen::MatrixXd symmetrized(const Eigen::MatrixXd& m) {
  return 0.5 * (m + m.transpose());
}

double asymmetry(const Eigen::MatrixXd& m) {
  return (m - m.transpose()).cwiseAbs().maxCoeff();
}

double min_eigenvalue(const Eigen::MatrixXd& sym) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sym, Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

double max_eigenvalue(const Eigen::MatrixXd& sym) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sym, Eigen::EigenvaluesOnly);
  return es.eigenvalues().maxCoeff();
}

bool is_psd(const Eigen::MatrixXd& sym, double tol_scale, double floor) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sym, Eigen::EigenvaluesOnly);
  const double largest = es.eigenvalues().maxCoeff();
  const double tol = tol_scale * std::max(largest, floor);
  return es.eigenvalues().minCoeff() >= -tol;
}

Eigen::MatrixXd psd_clipped(const Eigen::MatrixXd& m, double tol_scale,
                            double floor) {
  const Eigen::MatrixXd sym = symmetrized(m);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(sym);
  Eigen::VectorXd evals = es.eigenvalues();
  const double largest = evals.maxCoeff();
  const double tol = tol_scale * std::max(largest, floor);
  for (Eigen::Index i = 0; i < evals.size(); ++i) {
    if (evals[i] < -tol) {
      throw std::invalid_argument(
          "matrix is not positive semi-definite (eigenvalue " +
          std::to_string(evals[i]) + " below tolerance " + std::to_string(-tol) +
          ")");
    }
    if (evals[i] < 0.0) evals[i] = 0.0;
  }
  return es.eigenvectors() * evals.asDiagonal() * es.eigenvectors().transpose();
}

Eigen::MatrixXd matrix_sqrt_psd(const Eigen::MatrixXd& m) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(symmetrized(m));
  Eigen::VectorXd evals = es.eigenvalues();
  for (Eigen::Index i = 0; i < evals.size(); ++i)
    evals[i] = evals[i] > 0.0 ? std::sqrt(evals[i]) : 0.0;
  return es.eigenvectors() * evals.asDiagonal() * es.eigenvectors().transpose();
}

std::string format_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

void write_matrix_file(const std::string& path, const Eigen::MatrixXd& m) {
  if (m.rows() != m.cols())
    throw std::invalid_argument("write_matrix_file: matrix must be square");
  std::ofstream out(path);
  if (!out) throw std::invalid_argument("cannot open for writing: " + path);
  out << m.rows() << "\n";
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      if (j) out << ' ';
      out << format_double(m(i, j));
    }
    out << "\n";
  }
  if (!out) throw std::invalid_argument("write failed: " + path);
}

Eigen::MatrixXd read_matrix_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open matrix file: " + path);
  Eigen::Index d = 0;
  if (!(in >> d) || d <= 0)
    throw std::invalid_argument("matrix file has invalid dimension: " + path);
  Eigen::MatrixXd m(d, d);
  for (Eigen::Index i = 0; i < d; ++i)
    for (Eigen::Index j = 0; j < d; ++j)
      if (!(in >> m(i, j)))
        throw std::invalid_argument("matrix file truncated: " + path);
  return m;
}

}  // namespace invreg
