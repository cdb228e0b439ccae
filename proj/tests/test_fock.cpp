#include <catch_amalgamated.hpp>

#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include "ionfb/fock.hpp"
#include "ionfb/moments.hpp"

using namespace ionfb;
using namespace ionfb::fock;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

constexpr double kPi = std::numbers::pi;

ModelRates small_rates(double n_bar = 3.0) { return ModelRates::from_collection(0.1, 0.01, n_bar, 0.4); }

FeedbackConfig feedback(double gain, double phase = -kPi / 2.0, double delta = 0.0) {
  FeedbackConfig fb;
  fb.gain = gain;
  fb.phase = phase;
  fb.delta_tilde = delta;
  return fb;
}

TruncatedDensityMatrix random_state(int n_max, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> g;
  CMatrix a(n_max + 1, n_max + 1);
  for (int i = 0; i <= n_max; ++i)
    for (int j = 0; j <= n_max; ++j) a(i, j) = Complex(g(gen), g(gen)) * std::exp(-0.3 * (i + j));
  CMatrix rho = a * a.adjoint();
  rho /= rho.trace();
  return TruncatedDensityMatrix(rho);
}

}  // namespace

TEST_CASE("ladder operators on the truncated basis", "[fock]") {
  const OperatorSet ops = build_fock_operators(0.1, 0.3, 10);
  const CMatrix a = ops.a.dense(), ad = ops.a_dag.dense();
  const CMatrix comm = a * ad - ad * a;
  for (int k = 0; k < 10; ++k) CHECK_THAT(comm(k, k).real(), WithinAbs(1.0, 1e-14));
  CHECK_THAT(comm(10, 10).real(), WithinAbs(-10.0, 1e-13));
  CHECK((ops.number.dense() - ad * a).norm() < 1e-13);
  CHECK((ops.z_tilde.dense() - (a + ad)).norm() < 1e-14);
  const Complex e(std::cos(0.3), std::sin(0.3));
  CHECK((ops.x_phi.dense() - (a * e + ad * std::conj(e))).norm() < 1e-14);
  const CMatrix z = ops.z_tilde.dense();
  const CMatrix cm = (CMatrix::Identity(11, 11) + 0.1 * z - 0.005 * z * z) / std::sqrt(2.0);
  // z~^2 is projected exactly, which differs from the truncated product only in the top two levels.
  CHECK((ops.c_m.dense() - cm).topLeftCorner(9, 9).norm() < 1e-14);
  CHECK_THAT(ops.c_m.dense()(1, 0).real(), WithinAbs(0.1 / std::sqrt(2.0), 1e-15));
  CHECK((build_fock_operators(0.0, 0.0, 10).c_m.dense() - CMatrix::Identity(11, 11) / std::sqrt(2.0)).norm() < 1e-15);
  CHECK_THROWS_AS(annihilation(1), Error);
}

TEST_CASE("state factories are normalized", "[fock]") {
  const auto th = TruncatedDensityMatrix::thermal(200, 15.0);
  CHECK_THAT(th.trace().real(), WithinAbs(1.0, 1e-13));
  CHECK_THAT(mean_number(th), WithinRel(15.0, 1e-4));
  CHECK(th.top_population(5) < 1e-5);
  const auto coh = TruncatedDensityMatrix::coherent(60, Complex(2.0, 0.0));
  CHECK_THAT(mean_number(coh), WithinRel(4.0, 1e-10));
  const GaussianMomentState m = wigner_moments(coh);
  CHECK_THAT(m.mean_z, WithinAbs(2.0, 1e-10));
  CHECK_THAT(m.var_z(), WithinAbs(0.25, 1e-10));
  const auto dt = TruncatedDensityMatrix::displaced_thermal(80, 1.0, Complex(0.0, 1.5));
  const GaussianMomentState d = wigner_moments(dt);
  CHECK_THAT(d.mean_p, WithinAbs(1.5, 1e-8));
  CHECK_THAT(d.var_p(), WithinAbs(0.75, 1e-8));
  CHECK_THAT(mean_number(TruncatedDensityMatrix::fock_state(5, 3)), WithinAbs(3.0, 1e-15));
}

TEST_CASE("number equals the Wigner second moments minus one half", "[fock][property]") {
  const MomentObservables obs = MomentObservables::build(40);
  for (std::uint64_t s = 1; s <= 10; ++s) {
    const auto rho = random_state(40, s);
    const GaussianMomentState m = wigner_moments(rho, obs);
    CHECK_THAT(mean_number(rho), WithinAbs(m.zz + m.pp - 0.5, 1e-12));
  }
}

TEST_CASE("sparse superoperator matches the operator form", "[fock][property]") {
  const ModelRates r = small_rates();
  const std::vector<MasterEquation> eqs = {
      MasterEquation::laser_cooling(r, 0.4, RecoilTerm::kFull),
      MasterEquation::laser_cooling(r, 0.0, RecoilTerm::kLinearized),
      MasterEquation::feedback_loop(r, feedback(1.3, -1.0, 0.7)),
      MasterEquation::feedback_loop(r, feedback(0.7, 0.4, -0.2), RecoilTerm::kFull),
  };
  const auto rho = random_state(25, 99);
  for (const auto& me : eqs) {
    const Liouvillian l(me, 25);
    const CMatrix a = l.apply(rho.matrix());
    const CMatrix b = liouvillian_apply(me, rho);
    CHECK((a - b).norm() < 1e-11 * std::max(1.0, b.norm()));
    CHECK(std::abs(a.trace()) < 1e-11);
    CHECK((a - a.adjoint()).norm() < 1e-11);
  }
}

TEST_CASE("apply rejects a wrong dimension", "[fock]") {
  const Liouvillian l(MasterEquation::laser_cooling(small_rates(), 0.0), 10);
  CHECK_THROWS_AS(l.apply(CMatrix::Identity(5, 5)), Error);
  CHECK(l.spectral_radius_estimate() <= l.norm_bound() * (1.0 + 1e-9));
}

TEST_CASE("feedback steady state reproduces the moment solution", "[fock][property]") {
  std::mt19937_64 gen(21);
  std::uniform_real_distribution<double> un(1.0, 5.0), ug(0.0, 3.0), uphi(-kPi, 0.0), ud(0.0, 3.0);
  int checked = 0;
  while (checked < 5) {
    const ModelRates r = small_rates(un(gen));
    const FeedbackConfig fb = feedback(ug(gen), uphi(gen), ud(gen));
    const DriftDiffusion dd = build_drift_diffusion(r, fb);
    if (!stability_margin(dd).stable) continue;
    const GaussianMomentState ref = steady_state_moments(dd);
    const int n_max = std::max(50, static_cast<int>(std::ceil(12.0 * (phonon_number(ref) + 1.0))));
    const auto rho = steady_state(Liouvillian(MasterEquation::feedback_loop(r, fb), n_max));
    const GaussianMomentState m = wigner_moments(rho);
    CHECK_THAT(m.zz, WithinRel(ref.zz, 1e-3));
    CHECK_THAT(m.pp, WithinRel(ref.pp, 1e-3));
    CHECK_THAT(m.zp, WithinAbs(ref.zp, 1e-3 * std::max(ref.zz, ref.pp)));
    ++checked;
  }
}

TEST_CASE("laser cooling without recoil relaxes to the thermal state", "[fock]") {
  const ModelRates r = small_rates(2.0);
  const auto rho = steady_state(Liouvillian(MasterEquation::laser_cooling(r, 0.0, RecoilTerm::kNone), 60));
  CHECK_THAT(mean_number(rho), WithinRel(2.0, 1e-6));
  for (int k = 0; k < 10; ++k) {
    CHECK_THAT(rho.matrix()(k, k).real(), WithinRel(std::pow(2.0, k) / std::pow(3.0, k + 1), 1e-6));
  }
}

TEST_CASE("steady state flags truncation leakage", "[fock]") {
  const ModelRates r = ModelRates::from_collection(0.1, 0.01, 15.0, 0.4);
  CHECK_THROWS_AS(steady_state(Liouvillian(MasterEquation::feedback_loop(r, feedback(0.0)), 50)), Error);
  CHECK(default_n_max(15.0) == 192);
  CHECK(default_n_max(1.0) == 50);
}

TEST_CASE("evolution preserves trace and Hermiticity; integrators agree", "[fock]") {
  const ModelRates r = small_rates(3.0);
  const Liouvillian l(MasterEquation::feedback_loop(r, feedback(1.0, -1.2, 0.5)), 50);
  const auto rho0 = TruncatedDensityMatrix::thermal(50, 3.0);
  const std::vector<double> grid = {0.0, 0.25, 0.5, 1.0};
  DensityEvolutionOptions rk;
  DensityEvolutionOptions sd;
  sd.integrator = DensityIntegrator::kSdirk2;
  sd.dt = 0.0025;
  const auto a = evolve_density_matrix(l, rho0, grid, rk);
  const auto b = evolve_density_matrix(l, rho0, grid, sd);
  REQUIRE(a.states.size() == grid.size());
  CHECK(a.max_trace_drift < 1e-10);
  CHECK(b.max_trace_drift < 1e-10);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    CHECK(a.states[i].hermiticity_error() < 1e-12);
    CHECK_THAT(mean_number(a.states[i]), WithinRel(mean_number(b.states[i]), 1e-4));
  }
  const auto ref = evolve_moments(build_drift_diffusion(r, feedback(1.0, -1.2, 0.5)),
                                  GaussianMomentState::thermal(3.0), grid);
  CHECK_THAT(wigner_moments(a.states.back()).zz, WithinRel(ref.back().zz, 1e-3));
  CHECK_THAT(wigner_moments(a.states.back()).pp, WithinRel(ref.back().pp, 1e-3));
}

TEST_CASE("density evolution detects leakage", "[fock]") {
  const ModelRates r = ModelRates::from_collection(0.1, 0.01, 15.0, 0.4);
  const Liouvillian l(MasterEquation::feedback_loop(r, feedback(0.0)), 20);
  CHECK_THROWS_AS(evolve_density_matrix(l, TruncatedDensityMatrix::fock_state(20, 0), {0.0, 3.0}), Error);
}

TEST_CASE("snapshot round trip", "[fock]") {
  const auto rho = random_state(7, 5);
  std::stringstream buf;
  write_snapshot(buf, rho, 1.25);
  CHECK(buf.str().size() == 16 + 8 * 8 * 8);
  double t = 0.0;
  const auto back = read_snapshot(buf, &t);
  CHECK(t == 1.25);
  CHECK((back.matrix() - rho.matrix()).cwiseAbs().maxCoeff() < 1e-6);
}
