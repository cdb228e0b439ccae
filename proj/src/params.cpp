#include "ionfb/params.hpp"

#include <cmath>
#include <sstream>

#include <boost/math/quadrature/gauss_kronrod.hpp>

namespace ionfb {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kInvalidParameter: return "InvalidParameter";
    case ErrorKind::kBlueDetuning: return "BlueDetuning";
    case ErrorKind::kHeatingDominates: return "HeatingDominates";
    case ErrorKind::kNotNormalized: return "NotNormalized";
    case ErrorKind::kUnstable: return "Unstable";
    case ErrorKind::kDegenerateState: return "DegenerateState";
    case ErrorKind::kDimensionMismatch: return "DimensionMismatch";
    case ErrorKind::kTruncationLeakage: return "TruncationLeakage";
    case ErrorKind::kStepTooLarge: return "StepTooLarge";
    case ErrorKind::kNormCollapse: return "NormCollapse";
    case ErrorKind::kSampleRateTooLow: return "SampleRateTooLow";
    case ErrorKind::kGridMismatch: return "GridMismatch";
    case ErrorKind::kNoStableGain: return "NoStableGain";
    case ErrorKind::kConfig: return "Config";
  }
  return "Unknown";
}

double PhysicalParams::projected_lamb_dicke() const { return lamb_dicke * std::sin(laser_angle); }

namespace {

double lorentzian(double detuning, double linewidth) {
  return 1.0 / (detuning * detuning + 0.25 * linewidth * linewidth);
}

void require(bool ok, const std::string& what) {
  if (!ok) throw Error(ErrorKind::kInvalidParameter, what);
}

}  // namespace

Warnings validate(const PhysicalParams& p) {
  require(p.linewidth > 0.0, "linewidth must be positive");
  require(p.trap_frequency > 0.0, "trap frequency must be positive");
  require(p.solid_angle_fraction > 0.0 && p.solid_angle_fraction < 1.0,
          "solid angle fraction must lie in (0, 1)");
  require(p.lamb_dicke > 0.0, "Lamb-Dicke parameter must be positive");
  require(p.dipole_alpha >= 0.0, "dipole alpha must be non-negative");
  require(p.rabi_frequency >= 0.0, "Rabi frequency must be non-negative");

  Warnings w;
  if (p.lamb_dicke > 0.3) {
    std::ostringstream os;
    os << "Lamb-Dicke parameter " << p.lamb_dicke << " is outside the small-eta regime";
    w.push_back(os.str());
  }
  const double scale = std::max(p.linewidth, std::abs(p.laser_detuning));
  if (p.rabi_frequency > 0.1 * scale) {
    std::ostringstream os;
    os << "weak driving violated: Omega=" << p.rabi_frequency
       << " is not small against max(Gamma,|Delta_L|)=" << scale;
    w.push_back(os.str());
  }
  return w;
}

DerivedRates derive_rates(const PhysicalParams& p) {
  validate(p);
  if (p.laser_detuning >= 0.0) {
    throw Error(ErrorKind::kBlueDetuning, "laser detuning must be negative (red) for cooling");
  }
  const double gamma_b = (1.0 - p.solid_angle_fraction) * p.linewidth;
  const double s2 = std::pow(std::sin(p.laser_angle), 2);
  const double drive = p.lamb_dicke * p.lamb_dicke * p.rabi_frequency * p.rabi_frequency / 4.0;
  const double carrier = lorentzian(p.laser_detuning, p.linewidth);

  DerivedRates r;
  // A- is resonant on the red sideband (Delta_L = -nu_T).
  r.a_minus = drive * gamma_b *
              (s2 * lorentzian(p.laser_detuning + p.trap_frequency, p.linewidth) +
               p.dipole_alpha * carrier);
  r.a_plus = drive * gamma_b *
             (s2 * lorentzian(p.laser_detuning - p.trap_frequency, p.linewidth) +
              p.dipole_alpha * carrier);
  if (!(r.a_minus > r.a_plus) || !(r.a_plus > 0.0)) {
    throw Error(ErrorKind::kHeatingDominates, "heating rate A+ is not below cooling rate A-");
  }
  r.gamma_eff = r.a_minus - r.a_plus;
  r.n_bar = r.a_plus / r.gamma_eff;
  r.gamma_mirror = p.solid_angle_fraction * p.linewidth * p.rabi_frequency * p.rabi_frequency /
                   4.0 * carrier;
  r.gamma_tilde = r.gamma_mirror / r.gamma_eff;
  return r;
}

double collection_form_correction(const PhysicalParams& p) {
  const double s2 = std::pow(std::sin(p.laser_angle), 2);
  const double gamma_b = (1.0 - p.solid_angle_fraction) * p.linewidth;
  const double carrier = lorentzian(p.laser_detuning, p.linewidth);
  const double heating =
      gamma_b * (s2 * lorentzian(p.laser_detuning - p.trap_frequency, p.linewidth) +
                 p.dipole_alpha * carrier);
  return (1.0 + p.dipole_alpha) * p.linewidth * carrier / heating;
}

double gamma_tilde_collection_form(const PhysicalParams& p, const DerivedRates& rates) {
  const double eta2 = p.lamb_dicke * p.lamb_dicke;
  return p.solid_angle_fraction * rates.n_bar / ((1.0 + p.dipole_alpha) * eta2) *
         collection_form_correction(p);
}

ModelRates ModelRates::from_collection(double eta, double epsilon, double n_bar, double alpha) {
  require(eta > 0.0, "eta must be positive");
  require(epsilon > 0.0 && epsilon < 1.0, "epsilon must lie in (0, 1)");
  require(n_bar >= 0.0, "N must be non-negative");
  require(alpha >= 0.0, "alpha must be non-negative");
  ModelRates m;
  m.eta = eta;
  m.n_bar = n_bar;
  m.gamma_tilde = epsilon * n_bar / ((1.0 + alpha) * eta * eta);
  return m;
}

ModelRates ModelRates::from_derived(const DerivedRates& rates, const PhysicalParams& p) {
  ModelRates m;
  m.eta = p.lamb_dicke;
  m.n_bar = rates.n_bar;
  m.gamma_tilde = rates.gamma_tilde;
  m.nu_tilde = p.trap_frequency / rates.gamma_eff;
  return m;
}

double dipole_alpha(const std::function<double(double)>& pattern) {
  constexpr int kProbe = 401;
  for (int i = 0; i < kProbe; ++i) {
    const double u = -1.0 + 2.0 * i / (kProbe - 1);
    if (pattern(u) < 0.0) {
      throw Error(ErrorKind::kInvalidParameter, "angular distribution must be non-negative");
    }
  }
  using boost::math::quadrature::gauss_kronrod;
  const double norm = gauss_kronrod<double, 61>::integrate(pattern, -1.0, 1.0, 15, 1e-14);
  if (std::abs(norm - 1.0) > 1e-8) {
    std::ostringstream os;
    os << "angular distribution integrates to " << norm;
    throw Error(ErrorKind::kNotNormalized, os.str());
  }
  return gauss_kronrod<double, 61>::integrate([&](double u) { return u * u * pattern(u); }, -1.0,
                                              1.0, 15, 1e-14);
}

}  // namespace ionfb
