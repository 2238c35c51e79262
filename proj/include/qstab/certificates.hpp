#pragma once

#include <optional>

#include "qstab/model.hpp"

namespace qstab::certificates {

using model::DoubledMatrix;
using model::PerturbationBounds;
using model::PlantModel;
using numerics::CMatrix;

// Search box for find_P: p1 on a log grid, the off-diagonal scalar p2 on a
// square complex grid (both axes include zero for odd step counts).
struct PGridSpec {
  double p1_min = 1e-3;
  double p1_max = 10.0;
  int p1_steps = 40;
  double p2_max = 1.0;
  int p2_steps = 9;
};

struct LyapunovCertificate {
  DoubledMatrix P;
  double theta = 0.0;
  double gamma = 0.0;
  double lmi_max_eig = 0.0;
  double lambda = 0.0;
  double c = 0.0;
  double c1 = 0.0;
  double c2 = 0.0;
  double c3 = 0.0;
};

struct CertificateCheck {
  bool feasible = false;  // P positive definite and LMI negative definite
  double p_min_eig = 0.0;
  double lmi_max_eig = 0.0;
  double schur_max_eig = 0.0;
  bool schur_agrees = false;
  double lmi_asymmetry = 0.0;
  double corner_coupling = 0.0;  // theta * (CB + B'C'), vanishes in theory
};

struct MsqConstants {
  double c1 = 0.0;
  double c2 = 0.0;
  double c3 = 0.0;
};

// Assembles the (2n+1) x (2n+1) strict-positive-real feasibility block
// [[PF + F'P, PB + C' + theta F'C'], [B'P + C + theta CF, -gamma + theta(CB + B'C')]]
// for the realization of the shifted transfer function.
CMatrix build_spr_lmi(const PlantModel& plant, const DoubledMatrix& P,
                      double theta, double gamma);

// Schur complement of the LMI's scalar corner:
// PF + F'P + (PB + C' + theta F'C')(...)'/gamma' with
// gamma' = gamma - theta(CB + B'C'). Defined only for gamma' > 0.
CMatrix schur_drift_matrix(const PlantModel& plant, const DoubledMatrix& P,
                           double theta, double gamma);

// Hermitian quadratic representation of the symmetrized modulus of the
// nonlinearity variable: (E'E + Sigma E^T E# Sigma) / 2.
CMatrix symmetrized_z_form(const PlantModel& plant);

// Evaluates both the full LMI and its Schur complement and cross-checks the
// two definiteness verdicts.
CertificateCheck check_certificate(const PlantModel& plant,
                                   const DoubledMatrix& P, double theta,
                                   double gamma);

// Constant offset of the dissipation bound. Nonnegative by construction;
// anything below -1e-10 signals an internal inconsistency.
double compute_lambda(const PlantModel& plant, const DoubledMatrix& P,
                      double theta, const PerturbationBounds& bounds);

// Overshoot c1, decay rate c2, asymptotic offset c3 for the mean-square
// bound. Precondition: (P, theta) feasible at bounds.gamma.
MsqConstants compute_msq_constants(const PlantModel& plant,
                                   const DoubledMatrix& P, double theta,
                                   const PerturbationBounds& bounds);

// Grid search over single-mode P (n = 1 only), maximizing -lmi_max_eig over
// feasible points with deterministic smallest-first tie-breaks, then local
// coordinate descent. Returns a fully populated certificate, or nothing if
// no grid point is feasible.
std::optional<LyapunovCertificate> find_P(const PlantModel& plant,
                                          double theta,
                                          const PerturbationBounds& bounds,
                                          const PGridSpec& grid = {});

}  // namespace qstab::certificates
