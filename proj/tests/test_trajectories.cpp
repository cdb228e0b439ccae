#include <catch_amalgamated.hpp>

#include <cmath>
#include <cstdlib>
#include <numbers>
#include <random>
#include <sstream>

#include "ionfb/analytic.hpp"
#include "ionfb/rng.hpp"
#include "ionfb/trajectories.hpp"

using namespace ionfb;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

namespace {

constexpr double kPi = std::numbers::pi;

ModelRates small_rates() { return ModelRates::from_collection(0.1, 0.01, 2.0, 0.4); }

FeedbackConfig cold_damping(double gain) {
  FeedbackConfig fb;
  fb.gain = gain;
  fb.phase = -kPi / 2.0;
  return fb;
}

TrajectoryConfig base_config(Unravelling kind) {
  TrajectoryConfig cfg;
  cfg.kind = kind;
  cfg.dt = 0.01;
  cfg.t_final = 1.0;
  cfg.record_stride = 10;
  cfg.seed = 42;
  cfg.ensemble_size = 4;
  cfg.recoil = kind == Unravelling::kFeedback ? fock::RecoilTerm::kNone : fock::RecoilTerm::kLinearized;
  return cfg;
}

InitialState thermal_init(int n_max = 30) { return InitialState(fock::TruncatedDensityMatrix::thermal(n_max, 2.0)); }

bool same(const TrajectoryRecord& a, const TrajectoryRecord& b) {
  return a.times == b.times && a.mean_x_phi == b.mean_x_phi && a.n_cond == b.n_cond && a.current == b.current &&
         a.dn == b.dn && a.jump_times == b.jump_times && a.background_jumps == b.background_jumps;
}

}  // namespace

TEST_CASE("counter RNG is deterministic and stream separated", "[rng]") {
  const CounterRng a(1, 2, kStreamMeasurement), b(1, 2, kStreamMeasurement), c(1, 2, kStreamJumpThreshold);
  CHECK(a.bits(17) == b.bits(17));
  CHECK(a.bits(17) != c.bits(17));
  CHECK(a.bits(17) != CounterRng(1, 3, kStreamMeasurement).bits(17));
  double sum = 0.0, sq = 0.0, esum = 0.0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double u = a.uniform(i);
    REQUIRE(u > 0.0);
    REQUIRE(u < 1.0);
    const double g = a.normal(i);
    sum += g;
    sq += g * g;
    esum += c.exponential(i);
  }
  CHECK(std::abs(sum / n) < 5.0 / std::sqrt(n));
  CHECK(std::abs(sq / n - 1.0) < 0.02);
  CHECK(std::abs(esum / n - 1.0) < 0.02);
}

TEST_CASE("trajectory configuration is validated", "[trajectories]") {
  const ModelRates r = small_rates();
  TrajectoryConfig cfg = base_config(Unravelling::kJump);
  CHECK_NOTHROW(validate(cfg, r, FeedbackConfig{}));
  cfg.dt = 0.1;
  CHECK_THROWS_AS(validate(cfg, r, FeedbackConfig{}), Error);
  cfg = base_config(Unravelling::kJump);
  cfg.t_final = 1.005 + 1e-4;
  CHECK_THROWS_AS(validate(cfg, r, FeedbackConfig{}), Error);
  FeedbackConfig delayed = cold_damping(1.0);
  delayed.delay = 0.1;
  CHECK_THROWS_AS(validate(base_config(Unravelling::kFeedback), r, delayed), Error);
}

TEST_CASE("same seed gives bit-identical records", "[trajectories][property]") {
  const ModelRates r = small_rates();
  const auto init = thermal_init();
  for (auto kind : {Unravelling::kJump, Unravelling::kDiffusive, Unravelling::kFeedback}) {
    for (auto rep : {StateRepresentation::kWavefunction, StateRepresentation::kDensityMatrix}) {
      TrajectoryConfig cfg = base_config(kind);
      cfg.representation = rep;
      const FeedbackConfig fb = cold_damping(1.0);
      cfg.threads = 1;
      const auto a = run_ensemble(init, r, fb, cfg);
      cfg.threads = 3;
      const auto b = run_ensemble(init, r, fb, cfg);
      REQUIRE(a.size() == 4);
      for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(same(a[i], b[i]));
        CHECK(a[i].trajectory == i);
      }
      CHECK_FALSE(same(a[0], a[1]));
    }
  }
}

TEST_CASE("zero gain feedback reduces bitwise to the diffusive unravelling", "[trajectories]") {
  const ModelRates r = small_rates();
  const auto init = thermal_init();
  for (auto rep : {StateRepresentation::kWavefunction, StateRepresentation::kDensityMatrix}) {
    TrajectoryConfig cfg = base_config(Unravelling::kDiffusive);
    cfg.recoil = fock::RecoilTerm::kNone;
    cfg.representation = rep;
    const auto d = simulate_diffusive_trajectory(init, r, cfg, 2);
    cfg.kind = Unravelling::kFeedback;
    const auto f = simulate_feedback_trajectory(init, r, cold_damping(0.0), cfg, 2);
    CHECK(same(d, f));
  }
}

TEST_CASE("record layout", "[trajectories]") {
  const ModelRates r = small_rates();
  TrajectoryConfig cfg = base_config(Unravelling::kJump);
  cfg.t_final = 3.0;
  const auto rec = simulate_jump_trajectory(thermal_init(), r, cfg, 0);
  const std::size_t steps = 300;
  CHECK(rec.current.size() == steps);
  CHECK(rec.dn.size() == steps);
  CHECK(rec.times.size() == steps / 10 + 1);
  CHECK(rec.times.front() == 0.0);
  CHECK_THAT(rec.times.back(), WithinAbs(3.0, 1e-12));
  long total = 0;
  for (int k : rec.dn) total += k;
  CHECK(total == static_cast<long>(rec.jump_times.size()));
  CHECK_FALSE(rec.jump_times.empty());
  for (std::size_t i = 1; i < rec.jump_times.size(); ++i) CHECK(rec.jump_times[i] > rec.jump_times[i - 1]);
  for (double n : rec.n_cond) CHECK(n >= 0.0);
}

TEST_CASE("measurement superoperator is traceless", "[trajectories][property]") {
  const auto ops = fock::build_fock_operators(0.1, 0.0, 20);
  std::mt19937_64 gen(8);
  std::normal_distribution<double> g;
  for (int s = 0; s < 5; ++s) {
    fock::CMatrix a(21, 21);
    for (int i = 0; i < 21; ++i)
      for (int j = 0; j < 21; ++j) a(i, j) = fock::Complex(g(gen), g(gen));
    fock::CMatrix rho = a * a.adjoint();
    rho /= rho.trace();
    const fock::CMatrix x = ops.x_phi.dense();
    const fock::Complex mean = (x * rho).trace();
    const fock::CMatrix h = x * rho + rho * x - 2.0 * mean * rho;
    CHECK(std::abs(h.trace()) < 1e-12);
    CHECK((h - h.adjoint()).norm() < 1e-12);
  }
}

TEST_CASE("jump and diffusive ensembles agree at zero gain", "[trajectories][statistical]") {
  const ModelRates r = small_rates();
  const auto init = InitialState(fock::TruncatedDensityMatrix::coherent(30, 1.5));
  TrajectoryConfig cfg = base_config(Unravelling::kJump);
  cfg.t_final = 1.0;
  cfg.ensemble_size = 300;
  const auto jump = ensemble_statistics(run_ensemble(init, r, FeedbackConfig{}, cfg));
  cfg.kind = Unravelling::kDiffusive;
  const auto diff = ensemble_statistics(run_ensemble(init, r, FeedbackConfig{}, cfg));
  REQUIRE(jump.times == diff.times);
  for (std::size_t i = 0; i < jump.times.size(); ++i) {
    const double se = std::hypot(jump.n_cond.std_error[i], diff.n_cond.std_error[i]);
    CHECK(std::abs(jump.n_cond.mean[i] - diff.n_cond.mean[i]) < 3.0 * se + 1e-12);
  }
}

TEST_CASE("feedback ensemble settles near the moment steady state", "[trajectories][statistical]") {
  const ModelRates r = small_rates();
  const auto opt = analytic::optimal_gain_cold_damping(r);
  const FeedbackConfig fb = cold_damping(opt.gain);
  TrajectoryConfig cfg = base_config(Unravelling::kFeedback);
  cfg.dt = 0.02;
  cfg.t_final = 10.0;
  cfg.record_stride = 25;
  cfg.ensemble_size = 200;
  const auto stats = ensemble_statistics(run_ensemble(thermal_init(40), r, fb, cfg));
  double sum = 0.0;
  int count = 0;
  for (std::size_t i = 0; i < stats.times.size(); ++i) {
    if (stats.times[i] < 4.0) continue;
    sum += stats.n_cond.mean[i];
    ++count;
  }
  CHECK_THAT(sum / count, WithinRel(opt.n_min, 0.05));
}

TEST_CASE("ensemble statistics and writers", "[trajectories]") {
  const ModelRates r = small_rates();
  TrajectoryConfig cfg = base_config(Unravelling::kJump);
  auto recs = run_ensemble(thermal_init(), r, FeedbackConfig{}, cfg);
  const auto stats = ensemble_statistics(recs);
  CHECK(stats.count == 4);
  for (std::size_t i = 0; i < stats.times.size(); ++i) {
    double m = 0.0;
    for (const auto& rec : recs) m += rec.n_cond[i];
    CHECK_THAT(stats.n_cond.mean[i], WithinAbs(m / 4.0, 1e-12));
    CHECK_THAT(stats.n_cond.std_error[i], WithinAbs(std::sqrt(stats.n_cond.variance[i] / 4.0), 1e-12));
  }
  const RateEstimate rate = jump_rate(recs, 0.0);
  CHECK(rate.rate > 0.0);

  std::ostringstream t, e, s;
  write_trajectory_csv(t, recs[0]);
  CHECK(t.str().rfind("t,mean_x_phi,n_cond,current,dN\n", 0) == 0);
  write_ensemble_csv(e, stats);
  CHECK(e.str().find('\n') != std::string::npos);
  write_seed_sidecar(s, cfg, recs.size());
  CHECK(s.str().find("42") != std::string::npos);

  CHECK_THROWS_AS(ensemble_statistics({recs[0]}), Error);
  cfg.record_stride = 5;
  recs.push_back(simulate_jump_trajectory(thermal_init(), r, cfg, 9));
  CHECK_THROWS_AS(ensemble_statistics(recs), Error);
}

TEST_CASE("ensemble master equation follows the unravelling", "[trajectories]") {
  const ModelRates r = small_rates();
  const auto jump = ensemble_master_equation(r, FeedbackConfig{}, base_config(Unravelling::kJump));
  CHECK(jump.kind == fock::MasterEquation::Kind::kLaserCooling);
  CHECK(jump.recoil == fock::RecoilTerm::kFull);
  const auto fb = ensemble_master_equation(r, cold_damping(1.0), base_config(Unravelling::kFeedback));
  CHECK(fb.kind == fock::MasterEquation::Kind::kFeedback);
  CHECK(fb.feedback.gain == 1.0);
}

TEST_CASE("worker count honours the request", "[trajectories]") {
  CHECK(worker_count(3) == 3);
  CHECK(worker_count(0) >= 1);
}
