#include "qstab/popov.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "qstab/errors.hpp"
#include "qstab/parallel.hpp"

namespace qstab::popov {

namespace {

constexpr double kStrictness = 1e-12;

std::vector<double> build_omegas(double scale, const FrequencyGrid& grid) {
  if (grid.points_per_sign < 2 || grid.min_factor <= 0.0 ||
      grid.max_factor <= grid.min_factor) {
    throw ValidationError("popov: malformed frequency grid");
  }
  std::vector<double> omegas;
  omegas.reserve(2 * grid.points_per_sign + 6);
  omegas.push_back(0.0);
  const double emin = std::log10(grid.min_factor * scale);
  const double emax = std::log10(grid.max_factor * scale);
  for (int k = 0; k < grid.points_per_sign; ++k) {
    const double e = emin + (emax - emin) * k / (grid.points_per_sign - 1.0);
    const double w = std::pow(10.0, e);
    omegas.push_back(w);
    omegas.push_back(-w);
  }
  // The natural frequency of the slowest pole is a landmark worth hitting
  // exactly; the sentinels stand in for the omega -> +-inf endpoints.
  omegas.push_back(scale);
  omegas.push_back(-scale);
  omegas.push_back(grid.sentinel);
  omegas.push_back(-grid.sentinel);
  std::sort(omegas.begin(), omegas.end());
  omegas.erase(std::unique(omegas.begin(), omegas.end()), omegas.end());
  return omegas;
}

// Frequency response sampled once; margins for any (theta, gamma) are then
// linear passes over the cached arrays.
struct MarginEvaluator {
  SisoRealization ss;
  std::vector<double> omega, re, wim;

  MarginEvaluator(const SisoRealization& ss_in, const FrequencyGrid& grid)
      : ss(ss_in) {
    const auto [hurwitz, abscissa] = smallgain::is_hurwitz(ss.F);
    if (!hurwitz) {
      throw PreconditionError("popov: F is not Hurwitz");
    }
    omega = build_omegas(std::abs(abscissa), grid);
    const int count = static_cast<int>(omega.size());
    re.resize(count);
    wim.resize(count);
    par::parallel_for(count, [&](int j) {
      const auto g = model::eval_G(ss, {0.0, omega[j]});
      re[j] = g.real();
      wim[j] = omega[j] * g.imag();
    });
  }

  double pointwise(double w, double theta, double gamma) const {
    const auto g = model::eval_G(ss, {0.0, w});
    return 0.5 * gamma + g.real() - theta * w * g.imag();
  }

  std::pair<double, double> margin(double theta, double gamma) const {
    int best = 0;
    double vbest = std::numeric_limits<double>::infinity();
    for (int j = 0; j < static_cast<int>(omega.size()); ++j) {
      const double v = 0.5 * gamma + re[j] - theta * wim[j];
      if (v < vbest) {
        vbest = v;
        best = j;
      }
    }
    // Local refinement between the neighbors of the grid minimizer.
    const int last = static_cast<int>(omega.size()) - 1;
    double a = omega[std::max(0, best - 1)];
    double b = omega[std::min(last, best + 1)];
    double wbest = omega[best];
    constexpr double phi = 0.6180339887498949;
    double c = b - phi * (b - a);
    double d = a + phi * (b - a);
    double fc = pointwise(c, theta, gamma);
    double fd = pointwise(d, theta, gamma);
    for (int iter = 0; iter < 120; ++iter) {
      if ((b - a) <= 1e-13 * std::max({1.0, std::abs(a), std::abs(b)})) break;
      if (fc < fd) {
        b = d;
        d = c;
        fd = fc;
        c = b - phi * (b - a);
        fc = pointwise(c, theta, gamma);
      } else {
        a = c;
        c = d;
        fc = fd;
        d = a + phi * (b - a);
        fd = pointwise(d, theta, gamma);
      }
    }
    const double wmid = 0.5 * (a + b);
    const double vmid = pointwise(wmid, theta, gamma);
    if (vmid < vbest) {
      vbest = vmid;
      wbest = wmid;
    }
    return {vbest, wbest};
  }
};

std::vector<double> build_thetas(double theta_max, int steps) {
  if (!(theta_max > 0.0) || steps < 2) {
    throw ValidationError("search_theta: need theta_max > 0 and steps >= 2");
  }
  std::vector<double> thetas{0.0};
  const double tmin = theta_max * 1e-6;
  const int count = steps - 1;
  for (int k = 0; k < count; ++k) {
    const double f = count == 1 ? 1.0 : static_cast<double>(k) / (count - 1);
    thetas.push_back(tmin * std::pow(theta_max / tmin, f));
  }
  return thetas;
}

}  // namespace

std::pair<double, double> popov_margin(const SisoRealization& ss, double theta,
                                       double gamma,
                                       const FrequencyGrid& grid) {
  if (theta < 0.0) throw ValidationError("popov_margin: theta must be >= 0");
  return MarginEvaluator(ss, grid).margin(theta, gamma);
}

std::pair<double, double> search_theta(const SisoRealization& ss, double gamma,
                                       double theta_max, int steps,
                                       const FrequencyGrid& grid) {
  const MarginEvaluator ev(ss, grid);
  const auto thetas = build_thetas(theta_max, steps);
  int best = 0;
  double mbest = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < static_cast<int>(thetas.size()); ++i) {
    const double m = ev.margin(thetas[i], gamma).first;
    if (m > mbest) {
      mbest = m;
      best = i;
    }
  }
  const int last = static_cast<int>(thetas.size()) - 1;
  double a = thetas[std::max(0, best - 1)];
  double b = thetas[std::min(last, best + 1)];
  double tbest = thetas[best];
  constexpr double phi = 0.6180339887498949;
  double c = b - phi * (b - a);
  double d = a + phi * (b - a);
  double fc = ev.margin(c, gamma).first;
  double fd = ev.margin(d, gamma).first;
  for (int iter = 0; iter < 110; ++iter) {
    if ((b - a) <= 1e-12 * std::max(1.0, std::abs(b))) break;
    if (fc > fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - phi * (b - a);
      fc = ev.margin(c, gamma).first;
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + phi * (b - a);
      fd = ev.margin(d, gamma).first;
    }
  }
  const double tmid = 0.5 * (a + b);
  const double mmid = ev.margin(tmid, gamma).first;
  if (mmid > mbest) {
    mbest = mmid;
    tbest = tmid;
  }
  // Flat margins resolve toward the simplest multiplier.
  const double m0 = ev.margin(0.0, gamma).first;
  if (m0 >= mbest - kStrictness) return {0.0, m0};
  return {tbest, mbest};
}

PopovReport check_popov(const PlantModel& plant,
                        const PerturbationBounds& bounds,
                        const PopovOptions& opts) {
  bounds.validate();
  PopovReport report;
  report.gamma = bounds.gamma;
  const SisoRealization ss = model::build_realization(plant);
  const auto [hurwitz, abscissa] = smallgain::is_hurwitz(ss.F);
  report.hurwitz = hurwitz;
  report.spectral_abscissa = abscissa;
  if (!hurwitz) {
    report.verdict = Verdict::NotConcluded;
    return report;
  }
  const auto [theta, margin] =
      search_theta(ss, bounds.gamma, opts.theta_max, opts.theta_steps,
                   opts.grid);
  report.theta = theta;
  report.margin = margin;
  report.omega_at_min = popov_margin(ss, theta, bounds.gamma, opts.grid).second;
  report.verdict = margin > kStrictness ? Verdict::RobustlyMeanSquareStable
                                        : Verdict::NotConcluded;
  return report;
}

PopovPlotData popov_plot(const SisoRealization& ss, double theta, double gamma,
                         const FrequencyGrid& grid) {
  if (theta < 0.0) throw ValidationError("popov_plot: theta must be >= 0");
  PopovPlotData data;
  data.theta = theta;
  data.gamma = gamma;
  data.line_vertical = theta == 0.0;
  data.line_slope = theta == 0.0 ? 0.0 : 1.0 / theta;
  data.line_x_intercept = -0.5 * gamma;
  const auto [hurwitz, abscissa] = smallgain::is_hurwitz(ss.F);
  if (!hurwitz) {
    throw PreconditionError("popov_plot: F is not Hurwitz");
  }
  const auto omegas = build_omegas(std::abs(abscissa), grid);
  data.points.resize(omegas.size());
  par::parallel_for(static_cast<int>(omegas.size()), [&](int j) {
    const auto g = model::eval_G(ss, {0.0, omegas[j]});
    data.points[j] = {omegas[j], g.real(), omegas[j] * g.imag()};
  });
  return data;
}

}  // namespace qstab::popov
