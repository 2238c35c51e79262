#pragma once

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "qstab/model.hpp"

namespace qstab::focklab {

using numerics::CMatrix;
using numerics::Complex;
using numerics::CVector;

// Operator on a dim-level truncated oscillator space.
struct FockOperator {
  int dim = 0;
  CMatrix matrix;
};

FockOperator fock_annihilation(int dim);
FockOperator fock_creation(int dim);
FockOperator fock_number(int dim);

// z = e1*a + e2*a^dag
FockOperator build_z(Complex e1, Complex e2, int dim);

// l = n1*a + n2*a^dag
FockOperator coupling_op(Complex n1, Complex n2, int dim);

// [a^dag a^T] q [a; a^dag] for a 2x2 coefficient matrix q.
FockOperator quad_form_op(const CMatrix& q, int dim);

// (1/2) [a^dag a^T] M [a; a^dag]
FockOperator quad_hamiltonian(const model::DoubledMatrix& m, int dim);

// Coefficient table for sums of S_{kl} z^k (z^dag)^l. Keys are (k, l).
class CoeffTable {
 public:
  void set(int k, int l, Complex value);
  void add(int k, int l, Complex value);
  Complex get(int k, int l) const;
  const std::map<std::pair<int, int>, Complex>& entries() const { return entries_; }

  bool empty() const { return entries_.empty(); }
  // Largest k + l present.
  int degree() const;
  // S_{kl} == conj(S_{lk}) for every pair, which makes the operator
  // self-adjoint up to truncation.
  bool hermitian_pattern(double tol = 1e-12) const;

 private:
  std::map<std::pair<int, int>, Complex> entries_;
};

// {(2,2): 1}
CoeffTable pure_kerr();

// Diagonal table S_{kk} = (-1/s)^(k-2) for 2 <= k <= order, modelling a Kerr
// nonlinearity that saturates at scale s.
CoeffTable saturated_kerr(double s, int order);

// Sum of S_{kl} z^k (z^dag)^l in exactly that factor order.
FockOperator build_poly_op(const CoeffTable& table, const FockOperator& z);

struct DerivativeTables {
  CoeffTable dz;         // first derivative in z
  CoeffTable dzz;        // second derivative in z
  CoeffTable dz_dzstar;  // mixed second derivative
};

DerivativeTables derivative_tables(const CoeffTable& table);

// One operator inequality, tested on the interior projection where the
// truncated matrices agree with the untruncated operators.
struct ConditionCheck {
  bool holds = false;
  double min_eigenvalue = 0.0;
  int interior_dim = 0;
};

struct MembershipReport {
  int dim = 0;
  int degree = 0;
  ConditionCheck sector1;        // w1'w1 <= zz*/gamma^2 + delta1
  ConditionCheck sector2;        // (w1 - z*/gamma)'(w1 - z*/gamma) <= zz*/gamma^2 + delta1
  ConditionCheck smooth1;        // w2'w2 <= delta2
  ConditionCheck smooth2;        // w3'w3 <= delta3
  ConditionCheck bounded_below;  // f >= 0
  ConditionCheck bounded_above;  // f <= beta zz*
  bool in_class_w1 = false;      // sector1 and smooth1
  bool in_class_w2 = false;      // sector2, smooth1, smooth2 and both bounds
};

MembershipReport check_membership(const CoeffTable& table, const FockOperator& z,
                                  const model::PerturbationBounds& bounds);

// Residuals of the constant-commutator identities behind the stability
// analysis, evaluated on truncated matrices and measured on the interior.
struct LemmaResiduals {
  int dim = 0;
  double double_comm = 0.0;      // [z,[z,V2]] and its conjugate twin
  double z_with_l = 0.0;         // [z, L_i]
  double zstar_with_l = 0.0;     // [z*, L_i]
  double rho_with_z = 0.0;       // [[L^dag,z]L, z]
  double zstar_with_rho = 0.0;   // [z*, [L^dag,z]L]
  double drift_row = 0.0;        // -i[z,H2] + (L^dag[z,L] + [L^dag,z]L)/2
  double gradient_row = 0.0;     // i[z,V2]
  double row_flip = 0.0;         // T v versus v^dag Sigma T^T
  double max_residual() const;
};

LemmaResiduals verify_lemma_constants(const model::PlantModel& plant,
                                      const model::DoubledMatrix& p, int dim);

// Residuals of the expansion identities that reduce Lyapunov dissipation
// terms to the derivative tables.
struct ExpansionResiduals {
  int dim = 0;
  double commutator_expansion = 0.0;   // [Vtil, f] through w1, w2
  double dissipation_expansion = 0.0;  // L^dag[f,L]/2 + [L^dag,f]L/2 through w1, w2, w3
  double quad_commutator = 0.0;        // [V2, H2] as a quadratic form
  double quad_dissipation = 0.0;       // L^dag[V2,L]/2 + [L^dag,V2]L/2
  double max_residual() const;
};

ExpansionResiduals verify_expansion_identities(const CoeffTable& table,
                                               const model::PlantModel& plant,
                                               const model::DoubledMatrix& p,
                                               double theta, int dim);

CMatrix fock_state(int level, int dim);
CMatrix coherent_state(Complex alpha, int dim);
CMatrix thermal_state(double mean_occupation, int dim);

struct SimulationOptions {
  double t_end = 10.0;
  double dt = 0.005;
  int record_stride = 1;     // samples kept every this many steps
  int positivity_stride = 50;
};

struct Trajectory {
  std::vector<double> times;
  std::vector<double> n_expect;
  std::vector<double> vquad_expect;  // <a^dag a + a a^dag>
  std::vector<double> trace_values;
  std::vector<double> purity;
};

Trajectory lindblad_simulate(const FockOperator& hamiltonian,
                             const std::vector<FockOperator>& collapse_ops,
                             const CMatrix& rho0, const SimulationOptions& opts);

// Least-squares envelope v(t) <= c1 * v(0) * exp(-c2 t) + c3 over a simulated
// trajectory. witnessed means a strictly decaying envelope was found.
struct EnvelopeFit {
  double c1 = 0.0;
  double c2 = 0.0;
  double c3 = 0.0;
  double residual = 0.0;
  bool witnessed = false;
  std::string reason;
};

EnvelopeFit fit_envelope(const Trajectory& traj);

}  // namespace qstab::focklab
