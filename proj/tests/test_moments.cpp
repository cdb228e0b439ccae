#include <catch_amalgamated.hpp>

#include <cmath>
#include <numbers>
#include <random>

#include "ionfb/analytic.hpp"
#include "ionfb/moments.hpp"

using namespace ionfb;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

constexpr double kPi = std::numbers::pi;

ModelRates set_a() { return ModelRates::from_collection(0.1, 0.01, 15.0, 0.4); }

FeedbackConfig feedback(double gain, double phase = -kPi / 2.0, double delta = 0.0) {
  FeedbackConfig fb;
  fb.gain = gain;
  fb.phase = phase;
  fb.delta_tilde = delta;
  return fb;
}

Eigen::Vector3d as_vector(const GaussianMomentState& s) { return {s.zz, s.pp, s.zp}; }

}  // namespace

TEST_CASE("set A steady state matches the frozen occupation", "[moments]") {
  const GaussianMomentState s = steady_state_moments(build_drift_diffusion(set_a(), feedback(1.984)));
  CHECK_THAT(s.zz, WithinRel(7.75, 1e-12));
  CHECK_THAT(phonon_number(s), WithinRel(9.729662676822633, 1e-10));
}

TEST_CASE("zero gain gives the thermal state", "[moments]") {
  const double n = 15.0;
  for (double phi : {-kPi / 2.0, 0.3, 2.0}) {
    const GaussianMomentState s = steady_state_moments(build_drift_diffusion(set_a(), feedback(0.0, phi, 0.7)));
    CHECK_THAT(s.zz, WithinAbs((2 * n + 1) / 4.0, 1e-12));
    CHECK_THAT(s.pp, WithinAbs((2 * n + 1) / 4.0, 1e-12));
    CHECK_THAT(s.zp, WithinAbs(0.0, 1e-12));
  }
}

TEST_CASE("steady state solves M y + u = 0", "[moments][property]") {
  std::mt19937_64 gen(3);
  std::uniform_real_distribution<double> ug(0.0, 4.0), uphi(-kPi, 0.0), ud(0.0, 20.0);
  const ModelRates r = set_a();
  int checked = 0;
  while (checked < 100) {
    const DriftDiffusion dd = build_drift_diffusion(r, feedback(ug(gen), uphi(gen), ud(gen)));
    if (!stability_margin(dd).stable) continue;
    ++checked;
    const Eigen::Vector3d y = as_vector(steady_state_moments(dd));
    const Eigen::Vector3d res = dd.evolution * y + dd.source;
    CHECK(res.norm() < 1e-10 * std::max(1.0, dd.source.norm()));
  }
}

TEST_CASE("drift matrix has -Gamma_eff as an eigenvalue at zero detuning", "[moments][property]") {
  std::mt19937_64 gen(5);
  std::uniform_real_distribution<double> ug(-3.0, 3.0), uphi(-kPi, kPi), ud(-20.0, 20.0);
  const ModelRates r = set_a();
  for (int i = 0; i < 100; ++i) {
    const double g = ug(gen), phi = uphi(gen);
    const DriftDiffusion dd = build_drift_diffusion(r, feedback(g, phi));
    const Eigen::Matrix3d shifted = dd.evolution + Eigen::Matrix3d::Identity();
    CHECK(std::abs(shifted.determinant()) < 1e-9 * std::max(1.0, dd.evolution.norm() * dd.evolution.norm()));
    // Detuning only rotates the quadratures, so the total decay rate is unchanged.
    const DriftDiffusion detuned = build_drift_diffusion(r, feedback(g, phi, ud(gen)));
    CHECK_THAT(detuned.evolution.trace(), WithinAbs(dd.evolution.trace(), 1e-12 * (1.0 + std::abs(dd.evolution.trace()))));
  }
}

TEST_CASE("cold damping eigenvalues are the energy decay rates", "[moments]") {
  const ModelRates r = set_a();
  const FeedbackConfig fb = feedback(1.0);
  const double gt = fb.loop_gain(r);
  const StabilityReport rep = stability_margin(build_drift_diffusion(r, fb));
  REQUIRE(rep.stable);
  std::vector<double> re;
  for (const auto& e : rep.eigenvalues) {
    CHECK_THAT(e.imag(), WithinAbs(0.0, 1e-10));
    re.push_back(e.real());
  }
  std::sort(re.begin(), re.end());
  CHECK_THAT(re[0], WithinRel(-(1.0 + 2.0 * gt), 1e-12));
  CHECK_THAT(re[1], WithinRel(-(1.0 + gt), 1e-12));
  CHECK_THAT(re[2], WithinRel(-1.0, 1e-12));
}

TEST_CASE("evolution converges to the steady state", "[moments][property]") {
  const DriftDiffusion dd = build_drift_diffusion(set_a(), feedback(1.984));
  const Eigen::Vector3d yss = as_vector(steady_state_moments(dd));
  GaussianMomentState s0 = GaussianMomentState::vacuum();
  s0.zp = 0.1;
  for (auto integrator : {MomentIntegrator::kAdaptiveRungeKutta, MomentIntegrator::kExactExponential}) {
    MomentEvolutionOptions opt;
    opt.integrator = integrator;
    const auto traj = evolve_moments(dd, s0, {0.0, 1.0, 40.0}, opt);
    CHECK((as_vector(traj.back()) - yss).norm() < 1e-6);
  }
}

TEST_CASE("both integrators agree on intermediate times", "[moments]") {
  const DriftDiffusion dd = build_drift_diffusion(set_a(), feedback(0.8, -1.2, 0.5));
  std::vector<double> grid;
  for (int i = 0; i <= 20; ++i) grid.push_back(0.1 * i);
  MomentEvolutionOptions exact;
  exact.integrator = MomentIntegrator::kExactExponential;
  const auto a = evolve_moments(dd, GaussianMomentState::thermal(15.0), grid);
  const auto b = evolve_moments(dd, GaussianMomentState::thermal(15.0), grid, exact);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    CHECK((as_vector(a[i]) - as_vector(b[i])).norm() < 1e-7 * as_vector(b[i]).norm());
  }
}

TEST_CASE("bad time grids are rejected", "[moments]") {
  const DriftDiffusion dd = build_drift_diffusion(set_a(), feedback(1.0));
  CHECK_THROWS_AS(evolve_moments(dd, GaussianMomentState::vacuum(), {0.5, 1.0}), Error);
  CHECK_THROWS_AS(evolve_moments(dd, GaussianMomentState::vacuum(), {0.0, 1.0, 1.0}), Error);
}

TEST_CASE("unstable gain throws", "[moments]") {
  const ModelRates r = set_a();
  const double gc = 1.0 / (2.0 * r.eta * r.gamma_tilde);
  CHECK_THAT(gc, WithinRel(0.46666666666666667, 1e-12));
  const DriftDiffusion dd = build_drift_diffusion(r, feedback(1.1 * gc, kPi / 2.0));
  CHECK_FALSE(stability_margin(dd).stable);
  REQUIRE(stability_margin(dd).critical_gain.has_value());
  CHECK_THAT(*stability_margin(dd).critical_gain, WithinRel(gc, 1e-12));
  CHECK_THROWS_AS(steady_state_moments(dd), Error);
}

TEST_CASE("physicality monitor flags sub-vacuum states", "[moments]") {
  CHECK(check_physical(GaussianMomentState::vacuum()).empty());
  GaussianMomentState s;
  s.zz = 0.1;
  s.pp = 0.1;
  CHECK_FALSE(check_physical(s).empty());
}

TEST_CASE("squeezing parameter of isotropic and squeezed states", "[moments]") {
  CHECK_THAT(squeezing_parameter(GaussianMomentState::thermal(3.0)), WithinAbs(1.0, 1e-14));
  GaussianMomentState s;
  s.zz = 1.0;
  s.pp = 0.25;
  CHECK_THAT(squeezing_parameter(s), WithinAbs(0.25, 1e-14));
  std::swap(s.zz, s.pp);
  CHECK_THAT(squeezing_parameter(s), WithinAbs(0.25, 1e-14));
  GaussianMomentState cd;
  cd.zz = 7.75;
  cd.pp = 2.48;
  // (1 - f)/(1 + f) with f = 5.27/10.23
  CHECK_THAT(squeezing_parameter(cd), WithinRel(0.32, 1e-12));
  CHECK_THAT(phonon_number(GaussianMomentState::thermal(2.5)), WithinAbs(2.5, 1e-14));
}

TEST_CASE("solve3 pivots", "[moments]") {
  Eigen::Matrix3d a;
  a << 0, 1, 2, 1, 0, 3, 4, -3, 8;
  const Eigen::Vector3d x(1, -2, 0.5);
  CHECK((solve3(a, a * x) - x).norm() < 1e-13);
}

// -- closed forms ------------------------------------------------------------

TEST_CASE("closed-form cold damping values", "[analytic]") {
  const ModelRates r = set_a();
  CHECK_THAT(analytic::nss_cold_damping(r, 1.0), WithinRel(10.142045454545455, 1e-12));
  const auto opt = analytic::optimal_gain_cold_damping(r);
  CHECK_THAT(opt.gain, WithinRel(1.9837301265985479, 1e-12));
  CHECK_THAT(opt.n_min, WithinRel(9.729662658248184, 1e-12));
  CHECK_THAT(analytic::n_min_cold_damping(r), WithinRel(opt.n_min, 1e-12));
  CHECK_THAT(analytic::nss_cold_damping(r, 0.0), WithinRel(15.0, 1e-15));
}

TEST_CASE("closed forms agree with the moment steady state", "[analytic][property]") {
  std::mt19937_64 gen(13);
  std::uniform_real_distribution<double> ug(0.0, 5.0), uphi(-kPi, kPi);
  const ModelRates r = set_a();
  for (int i = 0; i < 50; ++i) {
    const double g = ug(gen);
    const double nm = phonon_number(steady_state_moments(build_drift_diffusion(r, feedback(g))));
    CHECK_THAT(analytic::nss_cold_damping(r, g), WithinRel(nm, 1e-9));
  }
  int checked = 0;
  while (checked < 50) {
    const double g = ug(gen), phi = uphi(gen);
    const DriftDiffusion dd = build_drift_diffusion(r, feedback(g, phi));
    if (!stability_margin(dd).stable) continue;
    CHECK_THAT(analytic::nss_variable_phase(r, g, phi), WithinRel(phonon_number(steady_state_moments(dd)), 1e-9));
    ++checked;
  }
}

TEST_CASE("variable-phase form reduces to cold damping", "[analytic]") {
  const ModelRates r = set_a();
  for (double g : {0.0, 0.5, 1.984, 4.0}) {
    CHECK_THAT(analytic::nss_variable_phase(r, g, -kPi / 2.0), WithinRel(analytic::nss_cold_damping(r, g), 1e-12));
  }
  CHECK_THROWS_AS(analytic::nss_variable_phase(r, 0.5, kPi / 2.0), Error);
}

TEST_CASE("phase reflection symmetry", "[analytic][property]") {
  std::mt19937_64 gen(17);
  std::uniform_real_distribution<double> uphi(-kPi, 0.0);
  const ModelRates r = set_a();
  for (int i = 0; i < 50; ++i) {
    const double phi = uphi(gen);
    CHECK_THAT(analytic::nss_variable_phase(r, 1.2, phi),
               WithinRel(analytic::nss_variable_phase(r, 1.2, kPi - phi), 1e-12));
    const double a = phonon_number(steady_state_moments(build_drift_diffusion(r, feedback(1.2, phi))));
    const double b = phonon_number(steady_state_moments(build_drift_diffusion(r, feedback(1.2, kPi - phi))));
    CHECK_THAT(a, WithinRel(b, 1e-10));
  }
}

TEST_CASE("gain slope at zero is negative exactly on the lower half circle", "[analytic][property]") {
  const ModelRates r = set_a();
  const double h = 1e-6;
  for (int i = 1; i < 60; ++i) {
    const double phi = -kPi + 2.0 * kPi * i / 60.0;
    if (std::abs(std::sin(phi)) < 1e-9) continue;
    const double slope = (analytic::nss_variable_phase(r, h, phi) - analytic::nss_variable_phase(r, 0.0, phi)) / h;
    CHECK((slope < 0.0) == (phi < 0.0));
  }
}

TEST_CASE("large detuning limit", "[analytic]") {
  const ModelRates r = set_a();
  CHECK_THAT(analytic::nss_large_detuning(r, 1.0), WithinRel(7.629310344827587, 1e-12));
  const double g = 1.0;
  const double nm = phonon_number(steady_state_moments(build_drift_diffusion(r, feedback(g, -kPi / 2.0, 50.0))));
  CHECK_THAT(nm, WithinRel(analytic::nss_large_detuning(r, g), 0.02));
  const auto opt = analytic::optimal_gain_large_detuning(r);
  CHECK(analytic::nss_large_detuning(r, opt.gain * 1.01) > opt.n_min);
  CHECK(analytic::nss_large_detuning(r, opt.gain * 0.99) > opt.n_min);
}

TEST_CASE("asymptote audit at N = 1000", "[analytic]") {
  const auto a = analytic::n_min_doppler_asymptote(0.01, 0.4, 1000.0, 0.1);
  CHECK(a.regime_ok);
  CHECK_THAT(a.exact, WithinRel(502.70004, 1e-6));
  CHECK_THAT(a.derived, WithinRel(a.exact, 1e-3));
  CHECK(std::abs(a.printed / a.exact - 1.0) > 1e-3);
  CHECK_THAT(a.printed, WithinRel(547.1886, 1e-6));
}
