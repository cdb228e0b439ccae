#include "ionfb/analytic.hpp"

#include <cmath>
#include <sstream>

namespace ionfb::analytic {

double nss_cold_damping(const ModelRates& r, double gain) {
  const double n = r.n_bar;
  const double x = r.eta * r.gamma_tilde;
  return (n + 0.5 * x * (2.0 * n - 1.0) * gain + r.gamma_tilde * gain * gain / 8.0) /
         (1.0 + 2.0 * x * gain);
}

OptimalGain optimal_gain_cold_damping(const ModelRates& r) {
  const double x = r.eta * r.gamma_tilde;
  const double root = std::sqrt(1.0 + 8.0 * (2.0 * r.n_bar + 1.0) * r.eta * r.eta * r.gamma_tilde);
  return {(root - 1.0) / (2.0 * x), n_min_cold_damping(r)};
}

double n_min_cold_damping(const ModelRates& r) {
  const double n = r.n_bar;
  const double e2g = r.eta * r.eta * r.gamma_tilde;
  return (4.0 * (2.0 * n - 1.0) * e2g - 1.0 + std::sqrt(1.0 + 8.0 * (2.0 * n + 1.0) * e2g)) /
         (16.0 * e2g);
}

double nss_variable_phase(const ModelRates& r, double gain, double phase) {
  const double n = r.n_bar;
  const double g = r.gamma_tilde;
  const double s = std::sin(phase);
  const double xs = r.eta * g * gain * s;
  if (2.0 * xs >= 1.0) {
    std::ostringstream os;
    os << "gain " << gain << " exceeds stability limit for phase " << phase;
    throw Error(ErrorKind::kUnstable, os.str());
  }
  const double num = n - 0.5 * (4.0 * n - 1.0) * xs +
                     g * gain * gain / 8.0 * (1.0 + 4.0 * g * r.eta * r.eta * (2.0 * n + 1.0 - 2.0 * s * s)) -
                     r.eta * g * g * gain * gain * gain * s / 8.0;
  return num / ((1.0 - xs) * (1.0 - 2.0 * xs));
}

double nss_large_detuning(const ModelRates& r, double gain) {
  const double x = r.eta * r.gamma_tilde;
  return (r.n_bar - 0.5 * x * gain + r.gamma_tilde * gain * gain / 8.0) / (1.0 + x * gain);
}

OptimalGain optimal_gain_large_detuning(const ModelRates& r) {
  // Stationary point of (N - aG + bG^2)/(1 + cG): b c G^2 + 2 b G - (a + c N) = 0.
  const double a = 0.5 * r.eta * r.gamma_tilde;
  const double b = r.gamma_tilde / 8.0;
  const double c = r.eta * r.gamma_tilde;
  const double g = (-b + std::sqrt(b * b + b * c * (a + c * r.n_bar))) / (b * c);
  return {g, nss_large_detuning(r, g)};
}

double n_min_large_detuning(double epsilon, double alpha, double n_bar) {
  return std::sqrt((1.0 + alpha) / (2.0 * epsilon)) - 0.5 - 2.0 * (1.0 + alpha) / (8.0 * epsilon * n_bar);
}

DopplerAsymptote n_min_doppler_asymptote(double epsilon, double alpha, double n_bar, double eta) {
  DopplerAsymptote out{};
  const ModelRates r = ModelRates::from_collection(eta, epsilon, n_bar, alpha);
  out.exact = n_min_cold_damping(r);
  const double q = (1.0 + alpha) / epsilon;
  out.derived = n_bar / 2.0 + 0.25 * std::sqrt(q) - 0.25 - q / (16.0 * n_bar);
  out.printed = n_bar / 2.0 + 4.0 * std::sqrt(q) - q / n_bar;
  out.regime_ok = n_bar * std::sqrt(epsilon) > 3.0;
  return out;
}

}  // namespace ionfb::analytic
