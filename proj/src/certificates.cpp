#include "qstab/certificates.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <vector>

#include "qstab/errors.hpp"

namespace qstab::certificates {

namespace {

using model::SisoRealization;
using numerics::Complex;

void require_p_form(const PlantModel& plant, const DoubledMatrix& P) {
  if (P.n() != plant.n) {
    throw DimensionError("certificate P must have the plant's mode count");
  }
  if (!P.hermitian_form()) {
    throw ShapeError(
        "certificate P must have a Hermitian P1 block and symmetric P2 block");
  }
}

Complex corner_cb(const SisoRealization& ss) {
  return (ss.C * ss.B)(0, 0);
}

CMatrix lmi_column(const SisoRealization& ss, const CMatrix& pm, double theta) {
  return pm * ss.B + ss.C.adjoint() + theta * ss.F.adjoint() * ss.C.adjoint();
}

}  // namespace

CMatrix build_spr_lmi(const PlantModel& plant, const DoubledMatrix& P,
                      double theta, double gamma) {
  require_p_form(plant, P);
  const SisoRealization ss = model::build_realization(plant);
  const CMatrix pm = P.assemble();
  const int dim = 2 * plant.n;
  const Complex cb = corner_cb(ss);
  const double coupling = theta * 2.0 * cb.real();
  if (std::abs(coupling) > 1e-10 * (1.0 + std::abs(cb))) {
    std::cerr << "warning: nonzero feedthrough coupling theta*(CB + B'C') = "
              << coupling << " in feasibility block\n";
  }
  CMatrix lmi(dim + 1, dim + 1);
  lmi.topLeftCorner(dim, dim) = pm * ss.F + ss.F.adjoint() * pm;
  lmi.topRightCorner(dim, 1) = lmi_column(ss, pm, theta);
  lmi.bottomLeftCorner(1, dim) =
      ss.B.adjoint() * pm + ss.C + theta * ss.C * ss.F;
  lmi(dim, dim) = Complex(-gamma + coupling, 0.0);
  return lmi;
}

CMatrix schur_drift_matrix(const PlantModel& plant, const DoubledMatrix& P,
                           double theta, double gamma) {
  require_p_form(plant, P);
  const SisoRealization ss = model::build_realization(plant);
  const CMatrix pm = P.assemble();
  const double gamma_eff = gamma - theta * 2.0 * corner_cb(ss).real();
  if (!(gamma_eff > 0.0)) {
    throw PreconditionError(
        "schur_drift_matrix: corner gamma - theta(CB + B'C') must be positive");
  }
  const CMatrix col = lmi_column(ss, pm, theta);
  return pm * ss.F + ss.F.adjoint() * pm + (col * col.adjoint()) / gamma_eff;
}

CMatrix symmetrized_z_form(const PlantModel& plant) {
  const CMatrix e = plant.E_tilde();
  const CMatrix sigma = model::Sigma_matrix(plant.n);
  return 0.5 * (e.adjoint() * e +
                sigma * e.transpose() * e.conjugate() * sigma);
}

CertificateCheck check_certificate(const PlantModel& plant,
                                   const DoubledMatrix& P, double theta,
                                   double gamma) {
  CertificateCheck out;
  const CMatrix pm = P.assemble();
  const auto p_spec = numerics::eig_hermitian(pm);
  out.p_min_eig = p_spec.front();
  const bool p_pd = out.p_min_eig > 0.0;

  const CMatrix lmi = build_spr_lmi(plant, P, theta, gamma);
  out.lmi_asymmetry = numerics::max_abs(lmi - lmi.adjoint());
  const auto lmi_res = numerics::is_negative_definite(numerics::hermitian_part(lmi));
  out.lmi_max_eig = lmi_res.max_eigenvalue;

  const SisoRealization ss = model::build_realization(plant);
  const Complex cb = corner_cb(ss);
  out.corner_coupling = theta * 2.0 * cb.real();
  const double gamma_eff = gamma - out.corner_coupling;
  bool schur_nd = false;
  if (gamma_eff > 0.0) {
    const CMatrix schur = schur_drift_matrix(plant, P, theta, gamma);
    const auto schur_res =
        numerics::is_negative_definite(numerics::hermitian_part(schur));
    out.schur_max_eig = schur_res.max_eigenvalue;
    schur_nd = schur_res.negative_definite;
  } else {
    out.schur_max_eig = std::numeric_limits<double>::quiet_NaN();
  }
  out.schur_agrees = schur_nd == lmi_res.negative_definite;
  out.feasible = p_pd && lmi_res.negative_definite;
  return out;
}

double compute_lambda(const PlantModel& plant, const DoubledMatrix& P,
                      double theta, const PerturbationBounds& bounds) {
  bounds.validate();
  require_p_form(plant, P);
  const CMatrix pm = P.assemble();
  const CMatrix mm = plant.M.assemble();
  const CMatrix j = model::J_matrix(plant.n);
  const CMatrix sigma = model::Sigma_matrix(plant.n);
  const CMatrix e = plant.E_tilde();
  const CMatrix nfull = plant.N_doubled();
  CMatrix ntil(plant.m, 2 * plant.n);
  ntil.leftCols(plant.n) = plant.N1;
  ntil.rightCols(plant.n) = plant.N2;

  CMatrix proj = CMatrix::Zero(2 * plant.m, 2 * plant.m);
  proj.topLeftCorner(plant.m, plant.m) =
      CMatrix::Identity(plant.m, plant.m);

  const double trace_term =
      (pm * j * nfull.adjoint() * proj * nfull * j).trace().real();

  const Complex scalar2 = (e.conjugate() * j * sigma * ntil.adjoint() *
                           ntil.conjugate() * sigma * j * e.adjoint())(0, 0);
  const double quad_term = 0.5 * theta * theta * std::norm(scalar2);

  const Complex mix1 =
      (e * j * ntil.adjoint() * ntil * sigma * j * e.transpose())(0, 0);
  const Complex mix2 = (e * sigma * j * (pm - 0.5 * theta * mm) * j *
                        e.transpose())(0, 0);
  const Complex scalar3 = -theta * mix1 + Complex(0.0, 1.0) * mix2;
  const double mix_term = 0.5 * std::norm(scalar3);

  const double lambda = trace_term + quad_term + mix_term +
                        bounds.delta1 * bounds.gamma + 0.5 * bounds.delta2 +
                        0.5 * bounds.delta3;
  if (lambda < -1e-10) {
    throw InternalConsistencyError(
        "compute_lambda: offset came out negative beyond tolerance");
  }
  return lambda;
}

MsqConstants compute_msq_constants(const PlantModel& plant,
                                   const DoubledMatrix& P, double theta,
                                   const PerturbationBounds& bounds) {
  bounds.validate();
  const CertificateCheck check =
      check_certificate(plant, P, theta, bounds.gamma);
  if (!check.feasible) {
    throw PreconditionError(
        "compute_msq_constants: (P, theta) is not feasible at this gamma");
  }
  const CMatrix pm = P.assemble();
  const auto p_spec = numerics::eig_hermitian(pm);
  const double p_min = p_spec.front();

  const CMatrix e = plant.E_tilde();
  const CMatrix j = model::J_matrix(plant.n);
  const double beta = bounds.beta;

  const CMatrix drift = numerics::hermitian_part(
      schur_drift_matrix(plant, P, theta, bounds.gamma));
  const double drift_max = numerics::eig_hermitian(drift).back();
  const CMatrix qz = symmetrized_z_form(plant);
  const double denom =
      numerics::eig_hermitian(pm + theta * beta * qz).back();
  const double c = -drift_max / denom;

  MsqConstants out;
  out.c1 = numerics::eig_hermitian(pm + beta * e.adjoint() * e).back() / p_min;
  out.c2 = c;
  const double lambda = compute_lambda(plant, P, theta, bounds);
  // Rewriting the upper bound through the symmetrized z-form leaves the
  // scalar c*theta*beta*[z, z*]/2 = c*theta*beta*(E J E')/2 behind; only a
  // positive leftover has to be carried into the offset.
  const double zz_comm = (e * j * e.adjoint())(0, 0).real();
  const double ordering = std::max(0.0, c * theta * beta * 0.5 * zz_comm);
  out.c3 = (lambda + ordering) / (c * p_min);
  return out;
}

std::optional<LyapunovCertificate> find_P(const PlantModel& plant,
                                          double theta,
                                          const PerturbationBounds& bounds,
                                          const PGridSpec& grid) {
  bounds.validate();
  if (plant.n != 1) {
    throw DimensionError(
        "find_P supports single-mode plants only (n = 1); got n = " +
        std::to_string(plant.n));
  }
  if (theta < 0.0) throw ValidationError("find_P: theta must be >= 0");
  if (grid.p1_steps < 2 || grid.p2_steps < 1 || !(grid.p1_min > 0.0) ||
      !(grid.p1_max > grid.p1_min)) {
    throw ValidationError("find_P: malformed search grid");
  }

  const auto lmi_max = [&](double p1, Complex p2) {
    CMatrix b1(1, 1), b2(1, 1);
    b1(0, 0) = p1;
    b2(0, 0) = p2;
    const CMatrix lmi =
        build_spr_lmi(plant, DoubledMatrix{b1, b2}, theta, bounds.gamma);
    return numerics::eig_hermitian(numerics::hermitian_part(lmi)).back();
  };
  // Feasible means P > 0 (p1 > |p2| for one mode) and the block strictly
  // negative definite.
  const auto feasible = [&](double p1, Complex p2, double max_eig) {
    return p1 > std::abs(p2) && max_eig < 0.0;
  };

  std::vector<double> p1_values;
  for (int k = 0; k < grid.p1_steps; ++k) {
    const double f = static_cast<double>(k) / (grid.p1_steps - 1);
    p1_values.push_back(grid.p1_min *
                        std::pow(grid.p1_max / grid.p1_min, f));
  }
  std::vector<double> axis;
  if (grid.p2_steps == 1) {
    axis.push_back(0.0);
  } else {
    for (int k = 0; k < grid.p2_steps; ++k) {
      axis.push_back(-grid.p2_max +
                     2.0 * grid.p2_max * k / (grid.p2_steps - 1));
    }
  }
  std::vector<Complex> p2_values;
  for (double re : axis)
    for (double im : axis) p2_values.emplace_back(re, im);
  std::stable_sort(p2_values.begin(), p2_values.end(),
                   [](const Complex& a, const Complex& b) {
                     return std::abs(a) < std::abs(b);
                   });

  bool found = false;
  double best_p1 = 0.0, best_obj = -std::numeric_limits<double>::infinity();
  Complex best_p2;
  for (double p1 : p1_values) {
    for (const Complex& p2 : p2_values) {
      if (p1 <= std::abs(p2)) continue;
      const double max_eig = lmi_max(p1, p2);
      if (!feasible(p1, p2, max_eig)) continue;
      if (-max_eig > best_obj) {
        best_obj = -max_eig;
        best_p1 = p1;
        best_p2 = p2;
        found = true;
      }
    }
  }
  if (!found) return std::nullopt;

  // Coordinate descent, strict improvement only.
  for (int round = 0; round < 4; ++round) {
    const double step = best_p1 * 0.25 * std::pow(0.5, round);
    for (int coord = 0; coord < 3; ++coord) {
      for (int guard = 0; guard < 16; ++guard) {
        bool moved = false;
        for (double dir : {+1.0, -1.0}) {
          double p1 = best_p1;
          Complex p2 = best_p2;
          if (coord == 0) p1 += dir * step;
          if (coord == 1) p2 += dir * step;
          if (coord == 2) p2 += Complex(0.0, dir * step);
          if (!(p1 > std::abs(p2))) continue;
          const double max_eig = lmi_max(p1, p2);
          if (feasible(p1, p2, max_eig) && -max_eig > best_obj) {
            best_obj = -max_eig;
            best_p1 = p1;
            best_p2 = p2;
            moved = true;
          }
        }
        if (!moved) break;
      }
    }
  }

  CMatrix b1(1, 1), b2(1, 1);
  b1(0, 0) = best_p1;
  b2(0, 0) = best_p2;
  LyapunovCertificate cert;
  cert.P = DoubledMatrix{b1, b2};
  cert.theta = theta;
  cert.gamma = bounds.gamma;
  cert.lmi_max_eig = -best_obj;
  cert.lambda = compute_lambda(plant, cert.P, theta, bounds);
  const MsqConstants msq = compute_msq_constants(plant, cert.P, theta, bounds);
  cert.c1 = msq.c1;
  cert.c2 = msq.c2;
  cert.c3 = msq.c3;
  cert.c = msq.c2;
  return cert;
}

}  // namespace qstab::certificates
