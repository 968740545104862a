#pragma once

#include <stdexcept>
#include <string>

#include <Eigen/Core>

namespace invreg {

// Numerical failure (singular system, non-convergence). The CLI maps this to
// exit code 1; validation errors (std::invalid_argument) map to exit code 2.
class NumericalError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

Eigen::MatrixXd symmetrized(const Eigen::MatrixXd& m);

// max |m - m^T| entry
double asymmetry(const Eigen::MatrixXd& m);

double min_eigenvalue(const Eigen::MatrixXd& sym);
double max_eigenvalue(const Eigen::MatrixXd& sym);

// Eigenvalues of a PSD matrix may come out slightly negative in floating
// point. Tolerated magnitude is tol_scale * max(largest eigenvalue, floor).
bool is_psd(const Eigen::MatrixXd& sym, double tol_scale = 1e-10,
            double floor = 1.0);

// Symmetrizes, checks PSD within tolerance and clips small negative
// eigenvalues to zero. Throws std::invalid_argument when a negative
// eigenvalue exceeds the tolerance.
Eigen::MatrixXd psd_clipped(const Eigen::MatrixXd& m, double tol_scale = 1e-10,
                            double floor = 1.0);

// Symmetric PSD square root via eigendecomposition; negative eigenvalues
// within tolerance are clipped to zero first.
Eigen::MatrixXd matrix_sqrt_psd(const Eigen::MatrixXd& m);

// Shortest round-trip decimal representation ("%.17g").
std::string format_double(double x);

// Plain-text matrix file: first line the dimension d, then d rows of d
// whitespace-separated reals.
void write_matrix_file(const std::string& path, const Eigen::MatrixXd& m);
Eigen::MatrixXd read_matrix_file(const std::string& path);

}  // namespace invreg
