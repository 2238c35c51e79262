#pragma once

#include "qstab/model.hpp"

namespace qstab::smallgain {

using model::PerturbationBounds;
using model::PlantModel;
using model::SisoRealization;
using numerics::CMatrix;

// Both criteria are sufficient only, so a failed premise never yields an
// "unstable" verdict.
enum class Verdict { RobustlyMeanSquareStable, NotConcluded };

struct SmallGainReport {
  bool hurwitz = false;
  double spectral_abscissa = 0.0;
  double hinf = 0.0;  // NaN when F is not Hurwitz
  double gamma = 0.0;
  Verdict verdict = Verdict::NotConcluded;
};

// (abscissa < -1e-12, abscissa). Empty matrices are rejected.
std::pair<bool, double> is_hurwitz(const CMatrix& F);

// H-infinity norm by bisection on imaginary-axis eigenvalues of the
// bounded-real Hamiltonian, bracketed by a coarse frequency scan.
// Precondition: F Hurwitz.
double hinf_norm(const SisoRealization& ss, double tol = 1e-6);

SmallGainReport check_small_gain(const PlantModel& plant,
                                 const PerturbationBounds& bounds);

const char* verdict_name(Verdict v);

}  // namespace qstab::smallgain
