#include "ionfb/optimize.hpp"

#include <cmath>
#include <limits>
#include <numbers>

#include "ionfb/analytic.hpp"

namespace ionfb {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double clean(double v) { return std::isfinite(v) ? v : kInf; }

}  // namespace

ScalarMinimum golden_section_minimize(const std::function<double(double)>& f, double lo, double hi, double tol,
                                      int scan_points) {
  if (!(hi > lo)) throw Error(ErrorKind::kInvalidParameter, "empty search interval");
  scan_points = std::max(scan_points, 3);
  ScalarMinimum res{};
  auto eval = [&](double x) {
    ++res.evaluations;
    return clean(f(x));
  };

  std::vector<double> xs(scan_points), fs(scan_points);
  int best = -1;
  for (int i = 0; i < scan_points; ++i) {
    xs[i] = lo + (hi - lo) * i / (scan_points - 1);
    fs[i] = eval(xs[i]);
    if (fs[i] < kInf && (best < 0 || fs[i] < fs[best])) best = i;
  }
  if (best < 0) throw Error(ErrorKind::kNoStableGain, "objective is infinite on the whole interval");

  int minima = 0;
  for (int i = 0; i < scan_points; ++i) {
    if (!(fs[i] < kInf)) continue;
    const bool left = i == 0 || fs[i] < fs[i - 1];
    const bool right = i == scan_points - 1 || fs[i] <= fs[i + 1];
    if (left && right) ++minima;
  }
  res.multimodal = minima > 1;

  double a = xs[std::max(0, best - 1)];
  double b = xs[std::min(scan_points - 1, best + 1)];
  const double invphi = (std::sqrt(5.0) - 1.0) / 2.0;
  double c = b - invphi * (b - a);
  double d = a + invphi * (b - a);
  double fc = eval(c);
  double fd = eval(d);
  while (b - a > tol) {
    if (fc <= fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - invphi * (b - a);
      fc = eval(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + invphi * (b - a);
      fd = eval(d);
    }
  }
  res.x = fc <= fd ? c : d;
  res.value = std::min(fc, fd);
  // The interior search never reaches the bracket ends exactly.
  for (double edge : {a, b, xs[best]}) {
    const double fe = eval(edge);
    if (fe < res.value || (fe == res.value && edge < res.x)) {
      res.x = edge;
      res.value = fe;
    }
  }
  if (!(res.value < kInf)) throw Error(ErrorKind::kNoStableGain, "no finite value near the scanned optimum");
  return res;
}

double steady_occupation(const ModelRates& r, FeedbackConfig fb, double gain) {
  fb.gain = gain;
  const DriftDiffusion dd = build_drift_diffusion(r, fb);
  if (!stability_margin(dd).stable) return kInf;
  return phonon_number(steady_state_moments(dd));
}

GainOptimum minimize_over_gain(const ModelRates& r, const FeedbackConfig& fb, double g_lo, double g_hi, double tol) {
  const ScalarMinimum m =
      golden_section_minimize([&](double g) { return steady_occupation(r, fb, g); }, g_lo, g_hi, tol);
  return {m.x, m.value, m.multimodal};
}

PhaseOptimum optimal_phase(const ModelRates& r, double delta_tilde, const PhaseSearchOptions& opt) {
  const double g_cd = analytic::optimal_gain_cold_damping(r).gain;
  double g_hi = std::max(1.0, 4.0 * g_cd);

  auto inner = [&](double phase, double hi) {
    FeedbackConfig fb;
    fb.phase = phase;
    fb.delta_tilde = delta_tilde;
    GainOptimum g = minimize_over_gain(r, fb, 0.0, hi, opt.gain_tol);
    for (int k = 0; k < 12 && g.gain > 0.9 * hi; ++k) {
      hi *= 2.0;
      g = minimize_over_gain(r, fb, 0.0, hi, opt.gain_tol);
    }
    return g;
  };

  const double eps = 1e-6;
  const ScalarMinimum ph = golden_section_minimize(
      [&](double phase) { return inner(phase, g_hi).n_min; }, -std::numbers::pi + eps, -eps, opt.phase_tol,
      opt.phase_scan_points);
  const GainOptimum g = inner(ph.x, g_hi);

  FeedbackConfig fb;
  fb.phase = ph.x;
  fb.delta_tilde = delta_tilde;
  fb.gain = g.gain;
  const GaussianMomentState s = steady_state_moments(build_drift_diffusion(r, fb));
  return {delta_tilde, ph.x, g.gain, g.n_min, squeezing_parameter(s)};
}

std::vector<PhaseOptimum> optimal_phase_vs_detuning(const ModelRates& r, const std::vector<double>& delta_grid,
                                                    const PhaseSearchOptions& opt) {
  std::vector<PhaseOptimum> out;
  out.reserve(delta_grid.size());
  for (double d : delta_grid) {
    if (!std::isfinite(d)) throw Error(ErrorKind::kInvalidParameter, "detuning grid must be finite");
    out.push_back(optimal_phase(r, d, opt));
  }
  return out;
}

}  // namespace ionfb
