#include "qstab/smallgain.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "qstab/errors.hpp"

namespace qstab::smallgain {

namespace {

constexpr double kHurwitzTol = 1e-12;
constexpr double kAxisTol = 1e-8;

// Eigenvalue within kAxisTol*(1+|lambda|) of the imaginary axis.
bool has_imaginary_axis_eigenvalue(const numerics::CMatrix& h) {
  for (const auto& ev : numerics::eig_general(h, "Hamiltonian")) {
    if (std::abs(ev.real()) < kAxisTol * (1.0 + std::abs(ev))) return true;
  }
  return false;
}

CMatrix bounded_real_hamiltonian(const SisoRealization& ss, double gamma_hat) {
  const int dim = static_cast<int>(ss.F.rows());
  CMatrix h(2 * dim, 2 * dim);
  h.topLeftCorner(dim, dim) = ss.F;
  h.topRightCorner(dim, dim) =
      (ss.B * ss.B.adjoint()) / (gamma_hat * gamma_hat);
  h.bottomLeftCorner(dim, dim) = -(ss.C.adjoint() * ss.C);
  h.bottomRightCorner(dim, dim) = -ss.F.adjoint();
  return h;
}

}  // namespace

std::pair<bool, double> is_hurwitz(const CMatrix& F) {
  if (F.rows() == 0) throw DimensionError("is_hurwitz: empty matrix");
  double abscissa = -std::numeric_limits<double>::infinity();
  for (const auto& ev : numerics::eig_general(F, "F")) {
    abscissa = std::max(abscissa, ev.real());
  }
  return {abscissa < -kHurwitzTol, abscissa};
}

double hinf_norm(const SisoRealization& ss, double tol) {
  const auto [hurwitz, abscissa] = is_hurwitz(ss.F);
  if (!hurwitz) {
    throw PreconditionError("hinf_norm: F is not Hurwitz");
  }
  // Coarse scan fixes the bracket; the scan scale follows the slowest pole.
  const double scale = std::abs(abscissa);
  double gmax = std::abs(model::eval_G(ss, {0.0, 0.0}));
  const int scan_points = 1000;
  for (int k = 0; k < scan_points; ++k) {
    const double expo = -4.0 + 10.0 * k / (scan_points - 1.0);
    const double omega = scale * std::pow(10.0, expo);
    gmax = std::max(gmax, std::abs(model::eval_G(ss, {0.0, omega})));
  }
  double lo = 0.0;
  double hi = 2.0 * gmax + 1.0;
  for (int iter = 0; iter < 200 && (hi - lo) > tol; ++iter) {
    const double mid = 0.5 * (lo + hi);
    if (has_imaginary_axis_eigenvalue(bounded_real_hamiltonian(ss, mid))) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

SmallGainReport check_small_gain(const PlantModel& plant,
                                 const PerturbationBounds& bounds) {
  bounds.validate();
  SmallGainReport report;
  report.gamma = bounds.gamma;
  const SisoRealization ss = model::build_realization(plant);
  const auto [hurwitz, abscissa] = is_hurwitz(ss.F);
  report.hurwitz = hurwitz;
  report.spectral_abscissa = abscissa;
  if (!hurwitz) {
    report.hinf = std::numeric_limits<double>::quiet_NaN();
    report.verdict = Verdict::NotConcluded;
    return report;
  }
  report.hinf = hinf_norm(ss);
  report.verdict = report.hinf < bounds.gamma
                       ? Verdict::RobustlyMeanSquareStable
                       : Verdict::NotConcluded;
  return report;
}

const char* verdict_name(Verdict v) {
  return v == Verdict::RobustlyMeanSquareStable ? "RobustlyMeanSquareStable"
                                                : "NotConcluded";
}

}  // namespace qstab::smallgain
