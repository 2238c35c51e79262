#pragma once

#include <vector>

#include "qstab/smallgain.hpp"

namespace qstab::popov {

using model::PerturbationBounds;
using model::PlantModel;
using model::SisoRealization;
using smallgain::Verdict;

// Symmetric log-spaced frequency grid scaled by the spectral abscissa, with
// zero, the natural frequency +-|abscissa|, and far sentinels included.
struct FrequencyGrid {
  double min_factor = 1e-4;
  double max_factor = 1e6;
  int points_per_sign = 4000;
  double sentinel = 1e9;
};

struct PopovOptions {
  double theta_max = 100.0;
  int theta_steps = 60;
  FrequencyGrid grid;
};

struct PopovReport {
  bool hurwitz = false;
  double spectral_abscissa = 0.0;
  double theta = 0.0;
  double gamma = 0.0;
  double margin = 0.0;
  double omega_at_min = 0.0;
  Verdict verdict = Verdict::NotConcluded;
};

struct PopovPlotPoint {
  double omega;
  double re_G;
  double omega_im_G;
};

// Plot locus (Re G(iw), w Im G(iw)) plus the separating line; the criterion
// holds when every locus point lies strictly below the line of slope 1/theta
// through (-gamma/2, 0) (vertical line at -gamma/2 when theta = 0).
struct PopovPlotData {
  std::vector<PopovPlotPoint> points;
  double theta = 0.0;
  double gamma = 0.0;
  bool line_vertical = false;
  double line_slope = 0.0;
  double line_x_intercept = 0.0;
};

// Minimum over frequency of gamma/2 + Re G(iw) - theta*w*Im G(iw), with
// local golden-section refinement around the grid minimizer.
// Returns (margin, omega at the minimum). Precondition: F Hurwitz.
std::pair<double, double> popov_margin(const SisoRealization& ss, double theta,
                                       double gamma,
                                       const FrequencyGrid& grid = {});

// Maximizes the margin over theta >= 0 (log grid including zero, then local
// refinement). Ties resolve toward smaller theta. Returns (theta, margin).
std::pair<double, double> search_theta(const SisoRealization& ss, double gamma,
                                       double theta_max = 100.0,
                                       int steps = 60,
                                       const FrequencyGrid& grid = {});

PopovReport check_popov(const PlantModel& plant,
                        const PerturbationBounds& bounds,
                        const PopovOptions& opts = {});

PopovPlotData popov_plot(const SisoRealization& ss, double theta, double gamma,
                         const FrequencyGrid& grid = {});

}  // namespace qstab::popov
