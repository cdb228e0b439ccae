#pragma once

#include <array>
#include <complex>
#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "ionfb/error.hpp"
#include "ionfb/params.hpp"

namespace ionfb {

/// Feedback loop settings. Rates are in units of Gamma_eff.
struct FeedbackConfig {
  double gain = 0.0;          // G
  double phase = -1.5707963267948966;  // phi [rad]
  double delta_tilde = 0.0;   // (omega_0 - nu_T) / Gamma_eff
  double bandwidth = 1e3;     // B / Gamma_eff
  double delay = 0.0;         // tau * Gamma_eff

  /// G~ = G eta gamma~.
  double loop_gain(const ModelRates& r) const { return gain * r.eta * r.gamma_tilde; }
};

/// Checks G gamma, |delta|, Gamma_eff << B << nu_T with the given ratio and the
/// delay condition tau nu_T << 1. Only warns; throws for tau < 0.
Warnings validate(const FeedbackConfig& fb, const ModelRates& r, double ratio = 10.0);

/// First and raw second moments of the Wigner function in the scaled
/// variables zbar = (a + a^dag)/2, pbar = (a - a^dag)/(2i).
struct GaussianMomentState {
  double mean_z = 0.0;
  double mean_p = 0.0;
  double zz = 0.25;  // <zbar^2>_W
  double pp = 0.25;  // <pbar^2>_W
  double zp = 0.0;   // <zbar pbar>_W (symmetric ordering)

  double var_z() const { return zz - mean_z * mean_z; }
  double var_p() const { return pp - mean_p * mean_p; }
  double cov_zp() const { return zp - mean_z * mean_p; }

  static GaussianMomentState thermal(double n);
  static GaussianMomentState vacuum() { return thermal(0.0); }
};

/// Returns a warning when var_z var_p - cov^2 < 1/16 (state outside the
/// uncertainty bound) or a variance is non-positive.
Warnings check_physical(const GaussianMomentState& s);

/// Ornstein-Uhlenbeck data for the feedback master equation.
/// Second-moment vector y = (<z^2>, <p^2>, <zp>) obeys dy/dt = M y + u.
struct DriftDiffusion {
  Eigen::Matrix2d kappa;
  Eigen::Matrix2d diffusion;
  Eigen::Matrix3d evolution;  // M
  Eigen::Vector3d source;     // u
  ModelRates rates;
  FeedbackConfig feedback;
};

DriftDiffusion build_drift_diffusion(const ModelRates& r, const FeedbackConfig& fb);

struct StabilityReport {
  bool stable = false;
  std::array<std::complex<double>, 3> eigenvalues{};
  std::complex<double> slowest;           // eigenvalue with the largest real part
  std::optional<double> critical_gain;    // 1/(2 eta gamma~ sin phi) for sin phi > 0
};

StabilityReport stability_margin(const DriftDiffusion& dd);

/// Solves M y + u = 0 by Gaussian elimination. Throws Error{kUnstable} when an
/// eigenvalue of M has non-negative real part.
GaussianMomentState steady_state_moments(const DriftDiffusion& dd);

enum class MomentIntegrator { kAdaptiveRungeKutta, kExactExponential };

struct MomentEvolutionOptions {
  MomentIntegrator integrator = MomentIntegrator::kAdaptiveRungeKutta;
  double rel_tol = 1e-9;
  double abs_tol = 1e-12;
};

/// Propagates the state to every time in `t_grid` (strictly increasing, first
/// entry 0). Output[i] corresponds to t_grid[i].
std::vector<GaussianMomentState> evolve_moments(const DriftDiffusion& dd, const GaussianMomentState& s0,
                                                const std::vector<double>& t_grid,
                                                const MomentEvolutionOptions& opt = {});

double phonon_number(const GaussianMomentState& s);

/// Ratio of semi-minor to semi-major axis of the covariance ellipse.
double squeezing_parameter(const GaussianMomentState& s);

/// Solves a 3x3 system with partial pivoting; exposed for testing.
Eigen::Vector3d solve3(Eigen::Matrix3d a, Eigen::Vector3d b);

}  // namespace ionfb
