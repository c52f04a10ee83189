#pragma once

#include <Eigen/Dense>
#include <string>

namespace lipobs {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// Small dense helpers shared by the solver, the synthesis checks and the simulator.
namespace linalg {

Matrix symmetrize(const Matrix& m);

double min_eig(const Matrix& sym);
double max_eig(const Matrix& sym);

// Largest real part over the spectrum of a general square matrix.
double spectral_abscissa(const Matrix& m);

// Largest singular value; 0 for empty matrices.
double max_singular_value(const Matrix& m);

// Condition number of a symmetric positive definite matrix (inf if not PD).
double condition_number_spd(const Matrix& sym);

// Largest eigenvalue modulus of a general square matrix.
double spectral_radius(const Matrix& m);

// Rank of the observability matrix [C; CA; ...; CA^{n-1}].
int observability_rank(const Matrix& a, const Matrix& c, double tol = 1e-9);

// Shortest decimal form that parses back to the same double (std::to_chars).
std::string format_double(double v);

}  // namespace linalg
}  // namespace lipobs
