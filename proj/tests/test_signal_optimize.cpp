#include <catch_amalgamated.hpp>

#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include "ionfb/analytic.hpp"
#include "ionfb/csv.hpp"
#include "ionfb/optimize.hpp"
#include "ionfb/signal_chain.hpp"

using namespace ionfb;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

constexpr double kPi = std::numbers::pi;

ModelRates set_a() { return ModelRates::from_collection(0.1, 0.01, 15.0, 0.4); }

// Projection of the demodulated output onto cos(w t) over the last `span`.
double line_amplitude(const std::vector<double>& y, double dt, double w, std::size_t from) {
  double c = 0.0, s = 0.0;
  for (std::size_t k = from; k < y.size(); ++k) {
    c += y[k] * std::cos(w * k * dt);
    s += y[k] * std::sin(w * k * dt);
  }
  const double n = static_cast<double>(y.size() - from);
  return 2.0 * std::hypot(c, s) / n;
}

}  // namespace

TEST_CASE("demodulator rejects undersampling and warns on wide filters", "[signal]") {
  DemodulationSettings s;
  s.omega0 = 10.0;
  s.sample_interval = 0.01;
  const std::vector<double> x(100, 1.0);
  CHECK_THROWS_AS(bandpass_demodulate(x, s), Error);
  s.sample_interval = 1e-3;
  s.bandwidth = 2.0;
  CHECK_FALSE(bandpass_demodulate(x, s).warnings.empty());
  s.bandwidth = 0.5;
  CHECK(bandpass_demodulate(x, s).warnings.empty());
  CHECK(bandpass_demodulate(x, s).output.size() == x.size());
}

TEST_CASE("low-pass stage is the exponential recursion", "[signal]") {
  DemodulationSettings s;
  s.omega0 = 1.0;
  s.sample_interval = 1e-3;
  s.bandwidth = 0.05;
  s.phase = 0.0;
  std::vector<double> x(3);
  x[0] = 1.0;  // cos(0) = 1 on the first sample only
  const auto r = bandpass_demodulate(x, s);
  const double a = std::exp(-s.bandwidth * s.sample_interval);
  CHECK_THAT(r.baseband[0], WithinAbs(1.0 - a, 1e-15));
  CHECK_THAT(r.baseband[1], WithinAbs(a * (1.0 - a), 1e-15));
  CHECK_THAT(lowpass_gain(0.0, 0.05, 1e-3), WithinAbs(1.0, 1e-7));
  CHECK(lowpass_gain(10.0, 0.05, 1e-3) < lowpass_gain(1.0, 0.05, 1e-3));
}

TEST_CASE("in-band tone is passed at half the gain", "[signal]") {
  DemodulationSettings s;
  s.omega0 = 20.0 * kPi;
  s.bandwidth = 1.0;
  s.gain = 2.0;
  s.sample_interval = 2.0 * kPi / s.omega0 / 128.0;
  const std::size_t n = static_cast<std::size_t>(30.0 / s.sample_interval);
  std::vector<double> x(n);
  for (std::size_t k = 0; k < n; ++k) x[k] = std::cos(s.omega0 * k * s.sample_interval);
  const auto r = bandpass_demodulate(x, s);
  const auto from = static_cast<std::size_t>(10.0 / s.sample_interval);
  CHECK_THAT(line_amplitude(r.output, s.sample_interval, s.omega0, from), WithinRel(s.gain / 2.0, 0.02));
}

TEST_CASE("golden section finds a parabola minimum", "[optimize]") {
  const auto m = golden_section_minimize([](double x) { return (x - 0.3) * (x - 0.3) + 1.0; }, -2.0, 2.0, 1e-9);
  CHECK_THAT(m.x, WithinAbs(0.3, 1e-6));
  CHECK_THAT(m.value, WithinAbs(1.0, 1e-12));
  CHECK_FALSE(m.multimodal);
  const auto bi = golden_section_minimize([](double x) { return std::cos(3.0 * x); }, 0.0, 6.0);
  CHECK(bi.multimodal);
  CHECK_THAT(bi.value, WithinAbs(-1.0, 1e-9));
  CHECK_THROWS_AS(golden_section_minimize([](double) { return INFINITY; }, 0.0, 1.0), Error);
  CHECK_THROWS_AS(golden_section_minimize([](double x) { return x; }, 1.0, 1.0), Error);
}

TEST_CASE("golden section never loses to its grid", "[optimize][property]") {
  std::mt19937_64 gen(31);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int trial = 0; trial < 30; ++trial) {
    const double a = u(gen), b = u(gen), c = u(gen);
    auto f = [=](double x) { return std::sin(4.0 * a * x) + b * x * x + c * x; };
    const auto m = golden_section_minimize(f, -2.0, 2.0, 1e-8);
    for (int i = 0; i < 200; ++i) {
      const double x = -2.0 + 4.0 * i / 199.0;
      CHECK(m.value <= f(x) + 1e-8);
    }
  }
}

TEST_CASE("gain optimum reproduces the cold-damping closed form", "[optimize]") {
  const ModelRates r = set_a();
  FeedbackConfig fb;
  fb.phase = -kPi / 2.0;
  const auto g = minimize_over_gain(r, fb, 0.0, 10.0, 1e-9);
  const auto ref = analytic::optimal_gain_cold_damping(r);
  CHECK_THAT(g.gain, WithinRel(ref.gain, 1e-4));
  CHECK_THAT(g.n_min, WithinRel(ref.n_min, 1e-9));
  fb.phase = kPi / 2.0;
  CHECK(std::isinf(steady_occupation(r, fb, 1.0)));
}

TEST_CASE("optimal phase at zero detuning is cold damping", "[optimize]") {
  const ModelRates r = set_a();
  const auto p = optimal_phase(r, 0.0);
  const auto ref = analytic::optimal_gain_cold_damping(r);
  CHECK_THAT(p.phase, WithinAbs(-kPi / 2.0, 1e-3));
  CHECK_THAT(p.gain, WithinRel(ref.gain, 1e-3));
  CHECK_THAT(p.n_min, WithinRel(ref.n_min, 1e-6));
  CHECK(p.r_sigma > 0.0);
  CHECK(p.r_sigma <= 1.0);
}

TEST_CASE("csv keeps 17 significant digits", "[csv]") {
  CHECK(format_double(0.1) == "0.10000000000000001");
  CHECK(std::stod(format_double(1.0 / 3.0)) == 1.0 / 3.0);
  std::ostringstream out;
  CsvWriter w(out, {"a", "b"});
  w.row({1.0, 2.5});
  CHECK(out.str() == "a,b\n1,2.5\n");
  CHECK_THROWS(w.row({1.0}));
}
