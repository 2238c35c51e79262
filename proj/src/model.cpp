#include "qstab/model.hpp"

#include <cmath>
#include <sstream>

#include "qstab/errors.hpp"

namespace qstab::model {

CMatrix DoubledMatrix::assemble() const {
  const int nn = n();
  CMatrix out(2 * nn, 2 * nn);
  out.topLeftCorner(nn, nn) = b1;
  out.topRightCorner(nn, nn) = b2;
  out.bottomLeftCorner(nn, nn) = b2.conjugate();
  out.bottomRightCorner(nn, nn) = b1.conjugate();
  return out;
}

bool DoubledMatrix::hermitian_form(double rel_tol) const {
  if (b1.rows() != b1.cols() || b2.rows() != b2.cols() ||
      b1.rows() != b2.rows()) {
    return false;
  }
  const double scale1 = 1.0 + numerics::max_abs(b1);
  const double scale2 = 1.0 + numerics::max_abs(b2);
  return numerics::max_abs(b1 - b1.adjoint()) <= rel_tol * scale1 &&
         numerics::max_abs(b2 - b2.transpose()) <= rel_tol * scale2;
}

DoubledMatrix DoubledMatrix::zero(int n) {
  return {CMatrix::Zero(n, n), CMatrix::Zero(n, n)};
}

DoubledMatrix DoubledMatrix::scaled_identity(int n, double p) {
  return {p * CMatrix::Identity(n, n), CMatrix::Zero(n, n)};
}

void PerturbationBounds::validate() const {
  std::ostringstream msg;
  if (!(gamma > 0.0)) {
    msg << "bounds.gamma must be positive, got " << gamma;
    throw ValidationError(msg.str());
  }
  if (!(beta > 0.0)) {
    msg << "bounds.beta must be positive, got " << beta;
    throw ValidationError(msg.str());
  }
  if (delta1 < 0.0 || delta2 < 0.0 || delta3 < 0.0) {
    msg << "bounds.delta1..3 must be nonnegative, got (" << delta1 << ", "
        << delta2 << ", " << delta3 << ")";
    throw ValidationError(msg.str());
  }
}

CMatrix PlantModel::N_doubled() const {
  CMatrix out(2 * m, 2 * n);
  out.topLeftCorner(m, n) = N1;
  out.topRightCorner(m, n) = N2;
  out.bottomLeftCorner(m, n) = N2.conjugate();
  out.bottomRightCorner(m, n) = N1.conjugate();
  return out;
}

CMatrix PlantModel::E_tilde() const {
  CMatrix out(1, 2 * n);
  out.leftCols(n) = E1;
  out.rightCols(n) = E2;
  return out;
}

CMatrix J_matrix(int n) {
  CMatrix j = CMatrix::Zero(2 * n, 2 * n);
  j.topLeftCorner(n, n) = CMatrix::Identity(n, n);
  j.bottomRightCorner(n, n) = -CMatrix::Identity(n, n);
  return j;
}

CMatrix Sigma_matrix(int n) {
  CMatrix s = CMatrix::Zero(2 * n, 2 * n);
  s.topRightCorner(n, n) = CMatrix::Identity(n, n);
  s.bottomLeftCorner(n, n) = CMatrix::Identity(n, n);
  return s;
}

std::pair<CMatrix, CMatrix> constants_J_Sigma(int n) {
  return {J_matrix(n), Sigma_matrix(n)};
}

PlantModel build_plant(const CMatrix& M1, const CMatrix& M2, const CMatrix& N1,
                       const CMatrix& N2, const CMatrix& E1, const CMatrix& E2,
                       double rel_tol) {
  const int n = static_cast<int>(M1.rows());
  if (n == 0 || M1.cols() != n) {
    throw DimensionError("build_plant: M1 must be square and nonempty");
  }
  if (M2.rows() != n || M2.cols() != n) {
    throw DimensionError("build_plant: M2 must match M1's size");
  }
  const int m = static_cast<int>(N1.rows());
  if (m == 0 || N1.cols() != n || N2.rows() != m || N2.cols() != n) {
    throw DimensionError("build_plant: N1, N2 must be m x n with m >= 1");
  }
  if (E1.rows() != 1 || E1.cols() != n || E2.rows() != 1 || E2.cols() != n) {
    throw DimensionError("build_plant: E1, E2 must be 1 x n rows");
  }
  if (numerics::max_abs(M1 - M1.adjoint()) >
      rel_tol * (1.0 + numerics::max_abs(M1))) {
    throw ShapeError("build_plant: block M1 is not Hermitian");
  }
  if (numerics::max_abs(M2 - M2.transpose()) >
      rel_tol * (1.0 + numerics::max_abs(M2))) {
    throw ShapeError("build_plant: block M2 is not symmetric");
  }
  PlantModel plant;
  plant.n = n;
  plant.m = m;
  plant.M = DoubledMatrix{M1, M2};
  plant.N1 = N1;
  plant.N2 = N2;
  plant.E1 = E1;
  plant.E2 = E2;
  return plant;
}

CMatrix build_F(const PlantModel& plant) {
  const CMatrix j_mode = J_matrix(plant.n);
  const CMatrix j_chan = J_matrix(plant.m);
  const CMatrix m_full = plant.M.assemble();
  const CMatrix n_full = plant.N_doubled();
  const Complex i_unit(0.0, 1.0);
  return -i_unit * j_mode * m_full -
         0.5 * j_mode * n_full.adjoint() * j_chan * n_full;
}

SisoRealization build_realization(const PlantModel& plant) {
  const auto [j, sigma] = constants_J_Sigma(plant.n);
  const CMatrix e = plant.E_tilde();
  SisoRealization ss;
  ss.F = build_F(plant);
  ss.B = sigma * j * e.transpose();
  ss.C = Complex(0.0, 2.0) * e.conjugate() * sigma;
  return ss;
}

Complex eval_G(const SisoRealization& ss, Complex s) {
  const int dim = static_cast<int>(ss.F.rows());
  const CMatrix lhs = s * CMatrix::Identity(dim, dim) - ss.F;
  const CMatrix x = numerics::solve_linear(lhs, ss.B);
  return (ss.C * x)(0, 0);
}

PlantModel kerr_plant(double kappa) {
  if (!(kappa > 0.0)) {
    std::ostringstream msg;
    msg << "kerr_plant: kappa must be positive, got " << kappa;
    throw ValidationError(msg.str());
  }
  CMatrix zero = CMatrix::Zero(1, 1);
  CMatrix n1(1, 1), e2(1, 1);
  n1(0, 0) = std::sqrt(kappa);
  e2(0, 0) = 1.0;
  return build_plant(zero, zero, n1, zero, zero, e2);
}

}  // namespace qstab::model
