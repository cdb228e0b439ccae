#include "ionfb/signal_chain.hpp"

#include <cmath>
#include <sstream>

namespace ionfb {

DemodulationResult bandpass_demodulate(const std::vector<double>& signal, const DemodulationSettings& s) {
  if (!(s.sample_interval > 0.0) || !(s.omega0 > 0.0) || !(s.bandwidth > 0.0)) {
    throw Error(ErrorKind::kInvalidParameter, "sample interval, omega0 and bandwidth must be positive");
  }
  const double rate = 1.0 / s.sample_interval;
  if (rate < 20.0 * s.omega0) {
    std::ostringstream os;
    os << "sample rate " << rate << " is below 20 omega0 = " << 20.0 * s.omega0;
    throw Error(ErrorKind::kSampleRateTooLow, os.str());
  }
  DemodulationResult res;
  if (s.bandwidth > s.omega0 / 10.0) {
    std::ostringstream os;
    os << "bandwidth " << s.bandwidth << " exceeds omega0/10";
    res.warnings.push_back(os.str());
  }
  const double a = std::exp(-s.bandwidth * s.sample_interval);
  res.output.resize(signal.size());
  res.baseband.resize(signal.size());
  double y = 0.0;
  for (std::size_t k = 0; k < signal.size(); ++k) {
    const double t = s.t0 + static_cast<double>(k) * s.sample_interval;
    const double mixed = signal[k] * std::cos(s.omega0 * t + s.phase);
    y = a * y + (1.0 - a) * mixed;
    res.baseband[k] = y;
    res.output[k] = s.gain * std::cos(s.omega0 * t) * y;
  }
  return res;
}

double lowpass_gain(double omega, double bandwidth, double sample_interval) {
  const double a = std::exp(-bandwidth * sample_interval);
  const double den = 1.0 - 2.0 * a * std::cos(omega * sample_interval) + a * a;
  return (1.0 - a) / std::sqrt(den);
}

}  // namespace ionfb
