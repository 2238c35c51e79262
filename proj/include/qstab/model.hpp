#pragma once

#include <utility>

#include "qstab/numerics.hpp"

namespace qstab::model {

using numerics::CMatrix;
using numerics::Complex;
using numerics::CVector;

// Doubled-up block pair (B1, B2), assembling to the 2n x 2n matrix
// [[B1, B2], [B2#, B1#]] where # is the entrywise conjugate. The assembled
// matrix is Hermitian exactly when B1 is Hermitian and B2 is symmetric.
struct DoubledMatrix {
  CMatrix b1;
  CMatrix b2;

  int n() const { return static_cast<int>(b1.rows()); }
  CMatrix assemble() const;
  bool hermitian_form(double rel_tol = 1e-12) const;

  static DoubledMatrix zero(int n);
  static DoubledMatrix scaled_identity(int n, double p);
};

// Sector/smoothness/bound constants for the uncertain nonlinearity. gamma
// and beta must be positive, the deltas nonnegative.
struct PerturbationBounds {
  double gamma = 1.0;
  double beta = 1.0;
  double delta1 = 0.0;
  double delta2 = 0.0;
  double delta3 = 0.0;

  void validate() const;
};

// n oscillator modes, m coupling channels, quadratic Hamiltonian block M,
// coupling rows (N1, N2), and the scalar nonlinearity variable row (E1, E2).
struct PlantModel {
  int n = 0;
  int m = 0;
  DoubledMatrix M;   // Hermitian doubled form, n x n blocks
  CMatrix N1, N2;    // m x n
  CMatrix E1, E2;    // 1 x n

  CMatrix N_doubled() const;  // 2m x 2n, [[N1, N2],[N2#, N1#]]
  CMatrix E_tilde() const;    // 1 x 2n, [E1 E2]
};

// State-space data for the scalar transfer function
// G(s) = C (sI - F)^{-1} B with D = 0 (strictly proper).
struct SisoRealization {
  CMatrix F;  // 2n x 2n
  CVector B;  // 2n x 1
  CMatrix C;  // 1 x 2n
};

CMatrix J_matrix(int n);      // diag(I_n, -I_n)
CMatrix Sigma_matrix(int n);  // [[0, I_n],[I_n, 0]]
std::pair<CMatrix, CMatrix> constants_J_Sigma(int n);

// Validates shapes and symmetry (M1 Hermitian, M2 symmetric, both within
// rel_tol relative to 1 + max|entry|; errors name the offending block).
PlantModel build_plant(const CMatrix& M1, const CMatrix& M2, const CMatrix& N1,
                       const CMatrix& N2, const CMatrix& E1, const CMatrix& E2,
                       double rel_tol = 1e-12);

// Drift matrix F = -i J M - (1/2) J N† J_ch N.
CMatrix build_F(const PlantModel& plant);

SisoRealization build_realization(const PlantModel& plant);

// Evaluates G at a complex frequency point by one linear solve.
Complex eval_G(const SisoRealization& ss, Complex s);

// Single lossy mode with decay rate kappa whose nonlinearity variable is the
// creation operator: M = 0, N1 = sqrt(kappa), N2 = 0, E1 = 0, E2 = 1.
PlantModel kerr_plant(double kappa);

}  // namespace qstab::model
