#pragma once

#include <functional>

#include "ionfb/error.hpp"

namespace ionfb {

/// Raw laser/trap inputs in consistent angular-frequency units.
struct PhysicalParams {
  double rabi_frequency = 0.1;    // Omega
  double laser_detuning = -0.5;   // Delta_L, negative = red
  double linewidth = 1.0;         // Gamma
  double solid_angle_fraction = 0.01;
  double lamb_dicke = 0.1;
  double laser_angle = 1.5707963267948966;  // chi
  double dipole_alpha = 0.4;
  double trap_frequency = 0.05;   // nu_T

  double projected_lamb_dicke() const;  // eta * sin(chi)
};

/// Rates derived from PhysicalParams; same units as the inputs.
struct DerivedRates {
  double a_minus = 0.0;
  double a_plus = 0.0;
  double gamma_eff = 0.0;
  double n_bar = 0.0;
  double gamma_mirror = 0.0;
  double gamma_tilde = 0.0;
};

/// Dimensionless model in units where Gamma_eff = 1. Every module downstream of
/// `params` works with this type only.
struct ModelRates {
  double n_bar = 15.0;
  double gamma_tilde = 0.0;  // gamma / Gamma_eff
  double eta = 0.1;
  double nu_tilde = 0.0;     // nu_T / Gamma_eff (only used for lab-frame runs)

  double a_minus() const { return n_bar + 1.0; }
  double a_plus() const { return n_bar; }

  /// gamma~ = eps N / ((1 + alpha) eta^2), the form used for all dimensionless
  /// parameter sets.
  static ModelRates from_collection(double eta, double epsilon, double n_bar, double alpha);
  /// Normalizes raw rates by Gamma_eff.
  static ModelRates from_derived(const DerivedRates& rates, const PhysicalParams& p);
};

Warnings validate(const PhysicalParams& p);

/// Throws Error{kBlueDetuning} for Delta_L >= 0 and Error{kHeatingDominates}
/// when A+ >= A-.
DerivedRates derive_rates(const PhysicalParams& p);

/// gamma~ evaluated through eps N / ((1+alpha) eta^2) times the exact
/// correction factor that relates it to the pumping-rate formula. The factor
/// tends to one for eps -> 0, chi = pi/2 and nu_T << |Delta_L|.
double gamma_tilde_collection_form(const PhysicalParams& p, const DerivedRates& rates);
double collection_form_correction(const PhysicalParams& p);

/// alpha = int_{-1}^{1} u^2 N(u) du. Requires N >= 0 and unit normalization.
double dipole_alpha(const std::function<double(double)>& pattern);

}  // namespace ionfb
