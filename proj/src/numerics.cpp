#include "qstab/numerics.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>
#include <sstream>

#include "qstab/errors.hpp"

namespace qstab::numerics {

const Tolerances& default_tolerances() {
  static const Tolerances tols{};
  return tols;
}

double max_abs(const CMatrix& a) {
  if (a.size() == 0) return 0.0;
  return a.cwiseAbs().maxCoeff();
}

bool is_hermitian(const CMatrix& a, double rel_tol) {
  if (a.rows() != a.cols()) return false;
  const double dev = max_abs(a - a.adjoint());
  return dev <= rel_tol * (1.0 + max_abs(a));
}

CMatrix hermitian_part(const CMatrix& a) { return 0.5 * (a + a.adjoint()); }

static void require_square(const CMatrix& a, std::string_view label) {
  if (a.rows() != a.cols()) {
    std::ostringstream msg;
    msg << label << " must be square, got " << a.rows() << "x" << a.cols();
    throw DimensionError(msg.str());
  }
}

std::vector<Complex> eig_general(const CMatrix& a, std::string_view label) {
  require_square(a, label);
  if (a.rows() == 0) return {};
  Eigen::ComplexEigenSolver<CMatrix> solver(a, /*computeEigenvectors=*/false);
  if (solver.info() != Eigen::Success) {
    std::ostringstream msg;
    msg << "eigenvalue iteration did not converge for " << label << " ("
        << a.rows() << "x" << a.cols() << ")";
    throw NumericalError(msg.str());
  }
  const auto& ev = solver.eigenvalues();
  return {ev.data(), ev.data() + ev.size()};
}

std::vector<double> eig_hermitian(const CMatrix& a, double rel_tol) {
  require_square(a, "A");
  if (!is_hermitian(a, rel_tol)) {
    throw ShapeError("eig_hermitian: input is not Hermitian within tolerance");
  }
  if (a.rows() == 0) return {};
  Eigen::SelfAdjointEigenSolver<CMatrix> solver(hermitian_part(a),
                                                Eigen::EigenvaluesOnly);
  if (solver.info() != Eigen::Success) {
    throw NumericalError("eig_hermitian: iteration did not converge");
  }
  const auto& ev = solver.eigenvalues();  // ascending
  return {ev.data(), ev.data() + ev.size()};
}

CMatrix solve_linear(const CMatrix& a, const CMatrix& b, double cond_limit) {
  require_square(a, "A");
  if (a.rows() != b.rows()) {
    std::ostringstream msg;
    msg << "solve_linear: A is " << a.rows() << "x" << a.cols() << " but B has "
        << b.rows() << " rows";
    throw DimensionError(msg.str());
  }
  Eigen::PartialPivLU<CMatrix> lu(a);
  const double rcond = lu.rcond();
  const double cond = rcond > 0.0 ? 1.0 / rcond
                                  : std::numeric_limits<double>::infinity();
  if (!(cond < cond_limit)) {
    std::ostringstream msg;
    msg << "solve_linear: matrix is singular to working precision "
        << "(condition estimate " << cond << " >= " << cond_limit << ")";
    throw SingularityError(msg.str());
  }
  return lu.solve(b);
}

DefinitenessResult is_negative_definite(const CMatrix& a, double tol) {
  const auto spectrum = eig_hermitian(a);
  if (spectrum.empty()) return {true, 0.0};
  const double max_eig = spectrum.back();
  return {max_eig < -tol, max_eig};
}

}  // namespace qstab::numerics
