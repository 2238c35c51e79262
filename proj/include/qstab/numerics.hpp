#pragma once

#include <complex>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace qstab::numerics {

using Complex = std::complex<double>;
using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;

// Single knob record for every tolerance the kernel applies. Ops take these
// as defaulted arguments; nothing reads hidden global state.
struct Tolerances {
  double hermitian_rel = 1e-12;  // Hermitian check, relative to 1 + max|entry|
  double cond_limit = 1e12;      // solve_linear rejects above this estimate
};

const Tolerances& default_tolerances();

double max_abs(const CMatrix& a);

// Relative Hermitian test: max|A - A†| <= tol * (1 + max|A|).
bool is_hermitian(const CMatrix& a,
                  double rel_tol = default_tolerances().hermitian_rel);

CMatrix hermitian_part(const CMatrix& a);

// Eigenvalues of a general square complex matrix, unordered, with
// multiplicity. `label` names the matrix in error messages.
std::vector<Complex> eig_general(const CMatrix& a, std::string_view label = "A");

// Real spectrum of a Hermitian matrix, ascending. Rejects non-Hermitian
// input (relative tolerance above).
std::vector<double> eig_hermitian(
    const CMatrix& a, double rel_tol = default_tolerances().hermitian_rel);

// Solves A X = B by partial-pivot LU. Throws SingularityError with the
// condition estimate when 1/rcond exceeds cond_limit.
CMatrix solve_linear(const CMatrix& a, const CMatrix& b,
                     double cond_limit = default_tolerances().cond_limit);

struct DefinitenessResult {
  bool negative_definite;
  double max_eigenvalue;
};

// True iff the largest eigenvalue of the Hermitian input is < -tol.
DefinitenessResult is_negative_definite(const CMatrix& a, double tol = 0.0);

}  // namespace qstab::numerics
