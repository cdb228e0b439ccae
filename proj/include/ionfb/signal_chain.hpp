#pragma once

#include <vector>

#include "ionfb/error.hpp"

namespace ionfb {

struct DemodulationSettings {
  double sample_interval = 1e-3;  // dt between samples
  double omega0 = 1.0;            // local-oscillator angular frequency
  double phase = 0.0;             // phi
  double bandwidth = 0.1;         // B, angular
  double gain = 1.0;              // G
  double t0 = 0.0;                // time of the first sample
};

struct DemodulationResult {
  std::vector<double> output;    // G cos(omega0 t) y(t)
  std::vector<double> baseband;  // low-passed y(t)
  Warnings warnings;
};

/// I(t) cos(omega0 t + phi) -> first-order low-pass y_k = a y_{k-1} + (1 - a) x_k with
/// a = exp(-B dt) -> G cos(omega0 t) y. Throws Error{kSampleRateTooLow} when
/// 1/dt < 20 omega0; warns when B > omega0/10.
DemodulationResult bandpass_demodulate(const std::vector<double>& signal, const DemodulationSettings& s);

/// |H(omega)| of the discrete low-pass stage.
double lowpass_gain(double omega, double bandwidth, double sample_interval);

}  // namespace ionfb
