#pragma once

#include <functional>
#include <vector>

#include "ionfb/moments.hpp"
#include "ionfb/params.hpp"

namespace ionfb {

struct ScalarMinimum {
  double x;
  double value;
  bool multimodal = false;  // the pre-scan saw more than one local minimum
  int evaluations = 0;
};

/// Golden-section search on [lo, hi] after a `scan_points` pre-scan. Non-finite
/// objective values count as +infinity; ties resolve toward smaller x.
/// Throws Error{kNoStableGain} when every scanned value is infinite.
ScalarMinimum golden_section_minimize(const std::function<double(double)>& f, double lo, double hi,
                                      double tol = 1e-6, int scan_points = 64);

/// Steady-state <n> at the given gain, +infinity when unstable.
double steady_occupation(const ModelRates& r, FeedbackConfig fb, double gain);

struct GainOptimum {
  double gain;
  double n_min;
  bool multimodal = false;
};

/// Minimizes <n>_ss over G in [g_lo, g_hi] for the phase and detuning in `fb`.
GainOptimum minimize_over_gain(const ModelRates& r, const FeedbackConfig& fb, double g_lo, double g_hi,
                               double tol = 1e-6);

struct PhaseOptimum {
  double delta_tilde;
  double phase;
  double gain;
  double n_min;
  double r_sigma;
};

struct PhaseSearchOptions {
  double phase_tol = 1e-6;
  double gain_tol = 1e-7;
  int phase_scan_points = 48;
};

/// Optimal (phi, G) on phi in (-pi, 0) for one detuning. The gain interval
/// grows until the optimum is interior.
PhaseOptimum optimal_phase(const ModelRates& r, double delta_tilde, const PhaseSearchOptions& opt = {});

std::vector<PhaseOptimum> optimal_phase_vs_detuning(const ModelRates& r, const std::vector<double>& delta_grid,
                                                    const PhaseSearchOptions& opt = {});

}  // namespace ionfb
