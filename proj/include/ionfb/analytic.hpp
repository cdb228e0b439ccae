#pragma once

#include "ionfb/params.hpp"

// Closed-form steady-state occupations of the feedback-cooled oscillator.
// All functions take the dimensionless model (Gamma_eff = 1).
namespace ionfb::analytic {

/// phi = -pi/2, delta = 0.
double nss_cold_damping(const ModelRates& r, double gain);

struct OptimalGain {
  double gain;
  double n_min;
};

/// Closed-form optimum of nss_cold_damping.
OptimalGain optimal_gain_cold_damping(const ModelRates& r);
/// Closed-form minimal occupation written directly in N, eta^2 gamma~.
double n_min_cold_damping(const ModelRates& r);

/// delta = 0, arbitrary phase. Throws Error{kUnstable} when
/// G eta gamma~ sin(phi) >= 1/2.
double nss_variable_phase(const ModelRates& r, double gain, double phase);

/// Large local-oscillator detuning limit (gamma << delta << B), phi = -pi/2.
double nss_large_detuning(const ModelRates& r, double gain);
/// Exact minimizer of nss_large_detuning over G >= 0.
OptimalGain optimal_gain_large_detuning(const ModelRates& r);
/// N >> 1 asymptote sqrt((1+alpha)/(2 eps)) - 1/2 - 2(1+alpha)/(8 eps N).
double n_min_large_detuning(double epsilon, double alpha, double n_bar);

struct DopplerAsymptote {
  double exact;           // closed-form minimum at the same parameters
  double derived;         // large-N expansion of `exact`
  double printed;         // N/2 + 4 sqrt((1+alpha)/eps) - (1+alpha)/(N eps), as published
  bool regime_ok;         // N sqrt(eps) > 3
};

/// Large-N cold-damping minimum. The published expansion differs from the
/// expansion of the exact minimum in its O(1) terms; both are reported.
DopplerAsymptote n_min_doppler_asymptote(double epsilon, double alpha, double n_bar, double eta);

}  // namespace ionfb::analytic
