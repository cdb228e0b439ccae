#include "ionfb/trajectories.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <map>
#include <mutex>
#include <ostream>
#include <sstream>
#include <thread>

#include <Eigen/Eigenvalues>

#include "ionfb/csv.hpp"
#include "ionfb/rng.hpp"

namespace ionfb {

using fock::CMatrix;
using fock::Complex;
using fock::CVector;
using fock::SparseC;

namespace {

constexpr Complex kI{0.0, 1.0};

SparseC adjoint(const SparseC& m) { return SparseC(m.adjoint()); }

long long step_count(const TrajectoryConfig& cfg) {
  if (!(cfg.dt > 0.0) || !(cfg.t_final > 0.0)) {
    throw Error(ErrorKind::kInvalidParameter, "dt and t_final must be positive");
  }
  const long long n = std::llround(cfg.t_final / cfg.dt);
  if (n < 1 || std::abs(n * cfg.dt - cfg.t_final) > 1e-9 * std::max(1.0, cfg.t_final)) {
    throw Error(ErrorKind::kInvalidParameter, "t_final must be an integer multiple of dt");
  }
  if (cfg.record_stride < 1) throw Error(ErrorKind::kInvalidParameter, "record_stride must be >= 1");
  if (cfg.noise_substeps < 1) throw Error(ErrorKind::kInvalidParameter, "noise_substeps must be >= 1");
  return n;
}

double wiener_increment(const CounterRng& rng, long long step, const TrajectoryConfig& cfg) {
  double w = 0.0;
  const auto base = static_cast<std::uint64_t>(step) * static_cast<std::uint64_t>(cfg.noise_substeps);
  for (int k = 0; k < cfg.noise_substeps; ++k) w += rng.normal(base + static_cast<std::uint64_t>(k));
  return w * std::sqrt(cfg.dt / cfg.noise_substeps);
}

double real_expectation(const CVector& psi, const SparseC& op) { return psi.dot(op * psi).real(); }

double number_expectation(const CVector& psi) {
  double s = 0.0;
  for (int n = 0; n < psi.size(); ++n) s += n * std::norm(psi(n));
  return s;
}

// Quantities shared by both representations.
struct Measurement {
  double phase = 0.0;
  double frame = 0.0;
  double gain = 0.0;
  double sqrt_kappa = 0.0;  // eta sqrt(gamma/2)
  double current_scale = 0.0;  // sqrt(gamma/2)
};

Measurement measurement_for(Unravelling kind, const ModelRates& r, const FeedbackConfig& fb,
                            const TrajectoryConfig& cfg) {
  Measurement m;
  const bool feedback = kind == Unravelling::kFeedback;
  m.phase = feedback ? fb.phase : cfg.quadrature_phase;
  m.frame = feedback ? fb.delta_tilde : cfg.frame_frequency;
  m.gain = feedback ? fb.gain : 0.0;
  m.current_scale = std::sqrt(0.5 * r.gamma_tilde);
  m.sqrt_kappa = r.eta * m.current_scale;
  return m;
}

SparseC quadrature(double phase, int n_max) {
  const SparseC a = fock::annihilation(n_max);
  return std::exp(kI * phase) * a + std::exp(-kI * phase) * adjoint(a);
}

class Recorder {
 public:
  Recorder(const TrajectoryConfig& cfg, long long steps, std::uint64_t trajectory) {
    rec_.seed = cfg.seed;
    rec_.trajectory = trajectory;
    rec_.dt = cfg.dt;
    rec_.record_stride = cfg.record_stride;
    const auto points = static_cast<std::size_t>(steps / cfg.record_stride + 1);
    rec_.times.reserve(points);
    rec_.mean_x_phi.reserve(points);
    rec_.n_cond.reserve(points);
    rec_.current.reserve(static_cast<std::size_t>(steps));
    rec_.dn.reserve(static_cast<std::size_t>(steps));
  }

  void point(double t, double x, double n) {
    rec_.times.push_back(t);
    rec_.mean_x_phi.push_back(x);
    rec_.n_cond.push_back(n);
  }
  void sample(double current, int dn) {
    rec_.current.push_back(current);
    rec_.dn.push_back(dn);
  }
  TrajectoryRecord& record() { return rec_; }

 private:
  TrajectoryRecord rec_;
};

// ---------------------------------------------------------------------------
// Pure-state engine.

struct Channel {
  SparseC op;
  bool observed = false;
  bool diagonal_rate = false;  // op^dag op is diagonal
  Eigen::VectorXd rate_diag;   // diag(op^dag op) when diagonal_rate
};

class WavefunctionEngine {
 public:
  WavefunctionEngine(Unravelling kind, const ModelRates& r, const FeedbackConfig& fb, const TrajectoryConfig& cfg,
                     int n_max)
      : kind_(kind), cfg_(cfg), r_(r), m_(measurement_for(kind, r, fb, cfg)), n_max_(n_max) {
    const SparseC a = fock::annihilation(n_max);
    const SparseC ad = adjoint(a);
    x_ = quadrature(m_.phase, n_max);
    z_ = a + ad;
    z_norm_ = 2.0 * std::sqrt(static_cast<double>(n_max));

    auto add_channel = [&](SparseC op, bool observed) {
      Channel c;
      c.op = std::move(op);
      c.observed = observed;
      const SparseC cdc = adjoint(c.op) * c.op;
      CMatrix dense(cdc);
      const CMatrix off = dense - CMatrix(dense.diagonal().asDiagonal());
      c.diagonal_rate = off.cwiseAbs().maxCoeff() < 1e-14;
      c.rate_diag = dense.diagonal().real();
      channels_.push_back(std::move(c));
    };

    if (kind == Unravelling::kJump) {
      add_channel(std::sqrt(r.gamma_tilde) * fock::build_fock_operators(r.eta, 0.0, n_max).c_m.matrix, true);
      add_channel(std::sqrt(r.a_minus()) * a, false);
      add_channel(std::sqrt(r.a_plus()) * ad, false);
    } else {
      const double kappa = m_.sqrt_kappa * m_.sqrt_kappa;
      if (cfg.recoil == fock::RecoilTerm::kLinearized) {
        if (std::abs(std::sin(m_.phase)) > 1e-12) {
          throw Error(ErrorKind::kInvalidParameter,
                      "linearized recoil in pure-state form requires the measured quadrature to be z~");
        }
        add_channel(std::sqrt(r.a_minus()) * a, false);
        add_channel(std::sqrt(r.a_plus()) * ad, false);
      } else if (cfg.recoil == fock::RecoilTerm::kNone) {
        // Background with the measurement's own kappa D[X] subtracted, so that the
        // ensemble follows A- D[a] + A+ D[a^dag] exactly.
        Eigen::Matrix2cd c;
        const Complex e2 = std::exp(2.0 * kI * m_.phase);
        c << r.a_minus() - kappa, -kappa * e2, -kappa * std::conj(e2), r.a_plus() - kappa;
        Eigen::SelfAdjointEigenSolver<Eigen::Matrix2cd> es(c);
        const double scale = std::max(r.a_minus(), 1.0);
        for (int i = 0; i < 2; ++i) {
          const double lam = es.eigenvalues()(i);
          if (lam < -1e-12 * scale) {
            throw Error(ErrorKind::kInvalidParameter, "measurement rate exceeds the thermal background");
          }
          if (lam <= 1e-14 * scale) continue;
          const Eigen::Vector2cd w = es.eigenvectors().col(i);
          add_channel(std::sqrt(lam) * (w(0) * a + w(1) * ad), false);
        }
      } else {
        throw Error(ErrorKind::kInvalidParameter, "full recoil is only available for the jump unravelling");
      }
    }

    SparseC total(n_max + 1, n_max + 1);
    for (const Channel& c : channels_) total += adjoint(c.op) * c.op;
    const SparseC h = m_.frame * SparseC(ad * a) - 0.5 * kI * total;
    const CMatrix hd(h);
    diag_ = hd.diagonal();
    SparseC off = h;
    off.prune([](Eigen::Index row, Eigen::Index col, const Complex&) { return row != col; });
    off.prune(Complex(0.0, 0.0));
    h_off_ = off;
    has_off_ = h_off_.nonZeros() > 0;
  }

  TrajectoryRecord run(const CVector& psi0, std::uint64_t trajectory) {
    const long long steps = step_count(cfg_);
    const double dt = cfg_.dt;
    const CounterRng meas(cfg_.seed, trajectory, kStreamMeasurement);
    const CounterRng thr(cfg_.seed, trajectory, kStreamJumpThreshold);
    const CounterRng chan(cfg_.seed, trajectory, kStreamJumpChannel);
    const bool diffusive = kind_ != Unravelling::kJump;
    const double gamma = r_.gamma_tilde;

    Recorder recorder(cfg_, steps, trajectory);
    CVector psi = psi0 / psi0.norm();
    record_point(recorder, 0.0, psi);

    std::uint64_t jumps = 0;
    double hazard = 0.0;
    double threshold = thr.exponential(0);
    std::vector<double> rates(channels_.size());

    for (long long step = 0; step < steps; ++step) {
      const double t_next = static_cast<double>(step + 1) * dt;
      const double xm = real_expectation(psi, x_);
      double dw = 0.0;
      double current = 0.0;
      int detected = 0;

      if (diffusive) {
        dw = wiener_increment(meas, step, cfg_);
        const double dy = dw + 2.0 * m_.sqrt_kappa * xm * dt;
        const CVector xpsi = x_ * psi;
        const CVector x2psi = x_ * xpsi;
        psi += m_.sqrt_kappa * dy * xpsi - 0.5 * m_.sqrt_kappa * m_.sqrt_kappa * dt * x2psi;
        psi /= psi.norm();
        current = m_.current_scale * dy / dt;
      }

      // Jump channels over [t, t + dt], subdivided so each substep has small hazard.
      double total_rate = channel_rates(psi, rates);
      if (kind_ == Unravelling::kJump && rates[0] * dt > 0.1) {
        std::ostringstream os;
        os << "detection probability " << rates[0] * dt << " per step exceeds 0.1";
        throw Error(ErrorKind::kStepTooLarge, os.str());
      }
      int sub = 1;
      while (total_rate * dt / sub > 0.05 && sub < (1 << 20)) sub *= 2;
      const double h = dt / sub;
      const CVector& decay = decay_factors(sub);
      for (int s = 0; s < sub; ++s) {
        // Several jumps may fall in one substep; each is placed at its crossing time
        // and the remainder of the substep continues with a fresh threshold.
        double left = h;
        while (left > 0.0) {
          CVector trial = no_jump(psi, left, left == h ? &decay : nullptr);
          const double n2 = trial.squaredNorm();
          const double dh = -std::log(n2);
          if (hazard + dh < threshold) {
            psi = trial / std::sqrt(n2);
            hazard += dh;
            break;
          }
          const double tau = std::clamp(left * (threshold - hazard) / dh, 0.0, left);
          psi = no_jump(psi, tau, nullptr);
          psi /= psi.norm();
          left -= tau;
          total_rate = channel_rates(psi, rates);
          double pick = chan.uniform(jumps) * total_rate;
          std::size_t k = 0;
          while (k + 1 < channels_.size() && pick >= rates[k]) {
            pick -= rates[k];
            ++k;
          }
          psi = channels_[k].op * psi;
          const double nrm = psi.norm();
          if (!(nrm > 0.0)) throw Error(ErrorKind::kNormCollapse, "jump annihilated the state");
          psi /= nrm;
          if (channels_[k].observed) {
            detected += 1;
            recorder.record().jump_times.push_back(static_cast<double>(step) * dt + (s + 1) * h - left);
          } else {
            recorder.record().background_jumps += 1;
          }
          ++jumps;
          hazard = 0.0;
          threshold = thr.exponential(jumps);
        }
      }

      if (m_.gain != 0.0) {
        const double theta = 0.5 * m_.gain * (gamma * r_.eta * xm * dt + m_.current_scale * dw);
        apply_feedback(theta, psi);
      }
      if (!diffusive) current = detected / dt - 0.5 * gamma;
      if (!psi.allFinite()) throw Error(ErrorKind::kNormCollapse, "state became non-finite");
      recorder.sample(current, detected);
      if ((step + 1) % cfg_.record_stride == 0) record_point(recorder, t_next, psi);
    }
    return std::move(recorder.record());
  }

 private:
  void record_point(Recorder& recorder, double t, const CVector& psi) const {
    const double top = std::norm(psi(psi.size() - 1));
    if (top > 1e-3) {
      std::ostringstream os;
      os << "top-level population " << top << " at t=" << t;
      throw Error(ErrorKind::kTruncationLeakage, os.str());
    }
    recorder.point(t, real_expectation(psi, x_), number_expectation(psi));
  }

  double channel_rates(const CVector& psi, std::vector<double>& rates) const {
    double total = 0.0;
    for (std::size_t k = 0; k < channels_.size(); ++k) {
      const Channel& c = channels_[k];
      double v = 0.0;
      if (c.diagonal_rate) {
        for (int n = 0; n < psi.size(); ++n) v += c.rate_diag(n) * std::norm(psi(n));
      } else {
        v = (c.op * psi).squaredNorm();
      }
      rates[k] = v;
      total += v;
    }
    return total;
  }

  // Unnormalised no-jump evolution over tau; `cached` holds exp(-i diag tau) when available.
  CVector no_jump(const CVector& psi, double tau, const CVector* cached) const {
    CVector next = psi;
    if (has_off_) next -= kI * tau * (h_off_ * psi);
    if (cached) return cached->cwiseProduct(next);
    for (int n = 0; n < next.size(); ++n) next(n) *= std::exp(-kI * diag_(n) * tau);
    return next;
  }

  const CVector& decay_factors(int sub) {
    auto it = decay_.find(sub);
    if (it != decay_.end()) return it->second;
    const double h = cfg_.dt / sub;
    CVector f(diag_.size());
    for (int n = 0; n < diag_.size(); ++n) f(n) = std::exp(-kI * diag_(n) * h);
    return decay_.emplace(sub, std::move(f)).first->second;
  }

  // psi <- exp(-i theta z~) psi by Taylor series on short sub-intervals.
  void apply_feedback(double theta, CVector& psi) const {
    const int pieces = std::max(1, static_cast<int>(std::ceil(std::abs(theta) * z_norm_ / 2.0)));
    const double th = theta / pieces;
    for (int p = 0; p < pieces; ++p) {
      CVector term = psi;
      CVector acc = psi;
      for (int k = 1; k < 80; ++k) {
        term = (-kI * th / static_cast<double>(k)) * (z_ * term);
        acc += term;
        if (term.norm() < 1e-17 * acc.norm()) break;
      }
      psi = acc;
    }
    psi /= psi.norm();
  }

  Unravelling kind_;
  TrajectoryConfig cfg_;
  ModelRates r_;
  Measurement m_;
  int n_max_;
  SparseC x_, z_;
  double z_norm_ = 0.0;
  std::vector<Channel> channels_;
  CVector diag_;
  SparseC h_off_;
  bool has_off_ = false;
  std::map<int, CVector> decay_;
};

// ---------------------------------------------------------------------------
// Density-matrix engine (conditional master equation, Euler-Maruyama).

class DensityEngine {
 public:
  DensityEngine(Unravelling kind, const ModelRates& r, const FeedbackConfig& fb, const TrajectoryConfig& cfg,
                int n_max)
      : kind_(kind),
        cfg_(cfg),
        r_(r),
        m_(measurement_for(kind, r, fb, cfg)),
        liouvillian_(ensemble_master_equation(r, fb, cfg), n_max) {
    x_ = CMatrix(quadrature(m_.phase, n_max));
    z_ = CMatrix(fock::annihilation(n_max) + adjoint(fock::annihilation(n_max)));
    if (kind == Unravelling::kJump) c_ = CMatrix(fock::build_fock_operators(r.eta, 0.0, n_max).c_m.matrix);
    // Explicit Euler on the drift is unstable once dt exceeds 2/|L|; RK4 substeps keep h |L| <= 2.
    drift_substeps_ = std::max(1, static_cast<int>(std::ceil(cfg.dt * liouvillian_.norm_bound() / 2.0)));
  }

  // Deterministic part of one step: L rho, minus gamma c rho c^dag on the no-jump branch.
  CMatrix integrate_drift(const CMatrix& rho0, double dt, double jump_rate) const {
    auto f = [&](const CMatrix& rho) {
      CMatrix out = liouvillian_.apply(rho);
      if (jump_rate != 0.0) out -= jump_rate * (c_ * rho * c_.adjoint());
      return out;
    };
    const double h = dt / drift_substeps_;
    CMatrix rho = rho0;
    for (int k = 0; k < drift_substeps_; ++k) {
      const CMatrix k1 = f(rho);
      const CMatrix k2 = f(rho + 0.5 * h * k1);
      const CMatrix k3 = f(rho + 0.5 * h * k2);
      const CMatrix k4 = f(rho + h * k3);
      rho += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    return rho;
  }

  TrajectoryRecord run(const fock::TruncatedDensityMatrix& rho0, std::uint64_t trajectory) const {
    const long long steps = step_count(cfg_);
    const double dt = cfg_.dt;
    const double gamma = r_.gamma_tilde;
    const CounterRng meas(cfg_.seed, trajectory, kStreamMeasurement);
    const CounterRng bern(cfg_.seed, trajectory, kStreamJumpBernoulli);
    Recorder recorder(cfg_, steps, trajectory);
    CMatrix rho = rho0.matrix();
    record_point(recorder, 0.0, rho);

    for (long long step = 0; step < steps; ++step) {
      const double t_next = static_cast<double>(step + 1) * dt;
      double current = 0.0;
      int detected = 0;
      if (kind_ == Unravelling::kJump) {
        const CMatrix jumped = c_ * rho * c_.adjoint();
        const double tr_jump = jumped.trace().real();
        const double p = gamma * tr_jump * dt;
        if (p > 0.1) {
          std::ostringstream os;
          os << "jump probability " << p << " per step exceeds 0.1";
          throw Error(ErrorKind::kStepTooLarge, os.str());
        }
        if (bern.uniform(static_cast<std::uint64_t>(step)) < p) {
          rho = jumped / tr_jump;
          detected = 1;
          recorder.record().jump_times.push_back(t_next);
        } else {
          rho = integrate_drift(rho, dt, gamma);
          const double tr = rho.trace().real();
          if (tr < 0.5) throw Error(ErrorKind::kNormCollapse, "conditional trace fell below 0.5");
          rho /= tr;
        }
        current = detected / dt - 0.5 * gamma;
      } else {
        const double dw = wiener_increment(meas, step, cfg_);
        const double xm = (x_ * rho).trace().real();
        const CMatrix xr = x_ * rho;
        CMatrix innovation = m_.sqrt_kappa * (xr + xr.adjoint() - 2.0 * xm * rho);
        if (m_.gain != 0.0) {
          const CMatrix zr = z_ * rho;
          const CMatrix k = -kI * (zr - zr.adjoint());
          innovation += 0.5 * m_.gain * m_.current_scale * k;
        }
        rho = integrate_drift(rho, dt, 0.0) + dw * innovation;
        const double tr = rho.trace().real();
        if (tr < 0.5) throw Error(ErrorKind::kNormCollapse, "conditional trace fell below 0.5");
        rho /= tr;
        current = gamma * r_.eta * xm + m_.current_scale * dw / dt;
      }
      const CMatrix herm = 0.5 * (rho + rho.adjoint());
      rho = herm;
      if (!rho.allFinite()) throw Error(ErrorKind::kNormCollapse, "conditional state became non-finite");
      recorder.sample(current, detected);
      if ((step + 1) % cfg_.record_stride == 0) record_point(recorder, t_next, rho);
    }
    return std::move(recorder.record());
  }

 private:
  void record_point(Recorder& recorder, double t, const CMatrix& rho) const {
    const int d = static_cast<int>(rho.rows());
    const double top = rho(d - 1, d - 1).real();
    if (top > 1e-3) {
      std::ostringstream os;
      os << "top-level population " << top << " at t=" << t;
      throw Error(ErrorKind::kTruncationLeakage, os.str());
    }
    double n = 0.0;
    for (int k = 0; k < d; ++k) n += k * rho(k, k).real();
    recorder.point(t, (x_ * rho).trace().real(), n);
  }

  Unravelling kind_;
  TrajectoryConfig cfg_;
  ModelRates r_;
  Measurement m_;
  fock::Liouvillian liouvillian_;
  CMatrix x_, z_, c_;
  int drift_substeps_ = 1;
};

TrajectoryRecord simulate(Unravelling kind, const InitialState& init, const ModelRates& r, const FeedbackConfig& fb,
                          const TrajectoryConfig& cfg, std::uint64_t trajectory) {
  TrajectoryConfig c = cfg;
  c.kind = kind;
  validate(c, r, fb);
  if (c.representation == StateRepresentation::kDensityMatrix) {
    return DensityEngine(kind, r, fb, c, init.n_max()).run(init.density(), trajectory);
  }
  WavefunctionEngine engine(kind, r, fb, c, init.n_max());
  return engine.run(init.sample(c.seed, trajectory), trajectory);
}

FeedbackConfig no_feedback() {
  FeedbackConfig fb;
  fb.gain = 0.0;
  return fb;
}

}  // namespace

// ---------------------------------------------------------------------------

void validate(const TrajectoryConfig& cfg, const ModelRates& r, const FeedbackConfig& fb) {
  step_count(cfg);
  const double gt = cfg.kind == Unravelling::kFeedback ? std::abs(fb.loop_gain(r)) : 0.0;
  const double limit = 0.05 / std::max({1.0, r.gamma_tilde, gt});
  if (cfg.dt > limit * (1.0 + 1e-12)) {
    std::ostringstream os;
    os << "dt=" << cfg.dt << " exceeds 0.05/max(1, gamma~, G~) = " << limit;
    throw Error(ErrorKind::kStepTooLarge, os.str());
  }
  if (cfg.kind == Unravelling::kFeedback && fb.delay != 0.0) {
    throw Error(ErrorKind::kInvalidParameter, "trajectories support zero feedback delay only");
  }
}

InitialState::InitialState(const fock::TruncatedDensityMatrix& rho) : rho_(rho) {
  Eigen::SelfAdjointEigenSolver<CMatrix> es(rho.matrix());
  weights_ = es.eigenvalues().cwiseMax(0.0);
  weights_ /= weights_.sum();
  vectors_ = es.eigenvectors();
}

CVector InitialState::sample(std::uint64_t seed, std::uint64_t trajectory) const {
  const CounterRng rng(seed, trajectory, kStreamInitialState);
  double u = rng.uniform(0);
  Eigen::Index k = weights_.size() - 1;
  for (Eigen::Index i = weights_.size() - 1; i >= 0; --i) {
    if (weights_(i) <= 0.0) continue;
    k = i;
    if (u < weights_(i)) break;
    u -= weights_(i);
  }
  return vectors_.col(k);
}

TrajectoryRecord simulate_jump_trajectory(const InitialState& init, const ModelRates& r, const TrajectoryConfig& cfg,
                                          std::uint64_t trajectory) {
  return simulate(Unravelling::kJump, init, r, no_feedback(), cfg, trajectory);
}

TrajectoryRecord simulate_diffusive_trajectory(const InitialState& init, const ModelRates& r,
                                               const TrajectoryConfig& cfg, std::uint64_t trajectory) {
  return simulate(Unravelling::kDiffusive, init, r, no_feedback(), cfg, trajectory);
}

TrajectoryRecord simulate_feedback_trajectory(const InitialState& init, const ModelRates& r, const FeedbackConfig& fb,
                                              const TrajectoryConfig& cfg, std::uint64_t trajectory) {
  return simulate(Unravelling::kFeedback, init, r, fb, cfg, trajectory);
}

fock::MasterEquation ensemble_master_equation(const ModelRates& r, const FeedbackConfig& fb,
                                              const TrajectoryConfig& cfg) {
  switch (cfg.kind) {
    case Unravelling::kJump:
      return fock::MasterEquation::laser_cooling(r, cfg.frame_frequency, fock::RecoilTerm::kFull);
    case Unravelling::kDiffusive:
      return fock::MasterEquation::laser_cooling(r, cfg.frame_frequency, cfg.recoil);
    case Unravelling::kFeedback:
      return fock::MasterEquation::feedback_loop(r, fb, cfg.recoil);
  }
  throw Error(ErrorKind::kInvalidParameter, "unknown unravelling");
}

int worker_count(int requested) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("IONFB_THREADS")) {
    const int v = std::atoi(env);
    if (v > 0) return v;
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

std::vector<TrajectoryRecord> run_ensemble(const InitialState& init, const ModelRates& r, const FeedbackConfig& fb,
                                           const TrajectoryConfig& cfg) {
  if (cfg.ensemble_size < 1) throw Error(ErrorKind::kInvalidParameter, "ensemble_size must be >= 1");
  validate(cfg, r, fb);
  const auto n = static_cast<std::size_t>(cfg.ensemble_size);
  std::vector<TrajectoryRecord> out(n);
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;

  auto work = [&]() {
    try {
      if (cfg.representation == StateRepresentation::kDensityMatrix) {
        const DensityEngine engine(cfg.kind, r, fb, cfg, init.n_max());
        for (std::size_t i = next++; i < n; i = next++) out[i] = engine.run(init.density(), i);
      } else {
        WavefunctionEngine engine(cfg.kind, r, fb, cfg, init.n_max());
        for (std::size_t i = next++; i < n; i = next++) out[i] = engine.run(init.sample(cfg.seed, i), i);
      }
    } catch (...) {
      std::lock_guard<std::mutex> lock(failure_mutex);
      if (!failure) failure = std::current_exception();
      next = n;
    }
  };

  const int workers = std::min<int>(worker_count(cfg.threads), static_cast<int>(n));
  if (workers <= 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }
  if (failure) std::rethrow_exception(failure);
  return out;
}

// ---------------------------------------------------------------------------

namespace {

template <class Getter>
SeriesStatistics series(const std::vector<TrajectoryRecord>& recs, std::size_t len, Getter get) {
  SeriesStatistics s;
  s.mean.assign(len, 0.0);
  s.variance.assign(len, 0.0);
  s.std_error.assign(len, 0.0);
  const double n = static_cast<double>(recs.size());
  for (std::size_t i = 0; i < len; ++i) {
    // Two-pass for accuracy.
    double mean = 0.0;
    for (const auto& r : recs) mean += get(r)[i];
    mean /= n;
    double ss = 0.0;
    for (const auto& r : recs) {
      const double d = get(r)[i] - mean;
      ss += d * d;
    }
    s.mean[i] = mean;
    s.variance[i] = ss / (n - 1.0);
    s.std_error[i] = std::sqrt(s.variance[i] / n);
  }
  return s;
}

}  // namespace

EnsembleStatistics ensemble_statistics(const std::vector<TrajectoryRecord>& records) {
  if (records.size() < 2) throw Error(ErrorKind::kGridMismatch, "at least two records are required");
  const TrajectoryRecord& first = records.front();
  for (const auto& r : records) {
    if (r.times != first.times || r.current.size() != first.current.size() ||
        r.n_cond.size() != first.times.size() || r.mean_x_phi.size() != first.times.size()) {
      throw Error(ErrorKind::kGridMismatch, "records do not share a time grid");
    }
  }
  EnsembleStatistics st;
  st.times = first.times;
  st.count = records.size();
  st.n_cond = series(records, first.times.size(), [](const TrajectoryRecord& r) -> const std::vector<double>& {
    return r.n_cond;
  });
  st.mean_x_phi = series(records, first.times.size(),
                         [](const TrajectoryRecord& r) -> const std::vector<double>& { return r.mean_x_phi; });
  st.current = series(records, first.current.size(),
                      [](const TrajectoryRecord& r) -> const std::vector<double>& { return r.current; });
  return st;
}

RateEstimate jump_rate(const std::vector<TrajectoryRecord>& records, double t_from) {
  if (records.size() < 2) throw Error(ErrorKind::kGridMismatch, "at least two records are required");
  const double t_end = records.front().dt * static_cast<double>(records.front().current.size());
  const double span = t_end - t_from;
  if (!(span > 0.0)) throw Error(ErrorKind::kInvalidParameter, "empty counting window");
  std::vector<double> rates;
  for (const auto& r : records) {
    const auto count = std::count_if(r.jump_times.begin(), r.jump_times.end(), [&](double t) { return t > t_from; });
    rates.push_back(static_cast<double>(count) / span);
  }
  const double n = static_cast<double>(rates.size());
  double mean = 0.0;
  for (double v : rates) mean += v;
  mean /= n;
  double ss = 0.0;
  for (double v : rates) ss += (v - mean) * (v - mean);
  return {mean, std::sqrt(ss / (n - 1.0) / n)};
}

void write_trajectory_csv(std::ostream& out, const TrajectoryRecord& rec) {
  CsvWriter csv(out, {"t", "mean_x_phi", "n_cond", "current", "dN"});
  const std::size_t stride = static_cast<std::size_t>(rec.record_stride);
  for (std::size_t k = 0; k < rec.times.size(); ++k) {
    double current = 0.0;
    double dn = 0.0;
    if (k > 0) {
      for (std::size_t s = (k - 1) * stride; s < k * stride && s < rec.current.size(); ++s) {
        current += rec.current[s];
        dn += rec.dn[s];
      }
      current /= static_cast<double>(stride);
    }
    csv.row({rec.times[k], rec.mean_x_phi[k], rec.n_cond[k], current, dn});
  }
}

void write_ensemble_csv(std::ostream& out, const EnsembleStatistics& st) {
  CsvWriter csv(out, {"t", "n_mean", "n_se", "x_phi_mean", "x_phi_se"});
  for (std::size_t k = 0; k < st.times.size(); ++k) {
    csv.row({st.times[k], st.n_cond.mean[k], st.n_cond.std_error[k], st.mean_x_phi.mean[k],
             st.mean_x_phi.std_error[k]});
  }
}

void write_seed_sidecar(std::ostream& out, const TrajectoryConfig& cfg, std::size_t trajectories) {
  const char* kind = cfg.kind == Unravelling::kJump ? "jump" : cfg.kind == Unravelling::kDiffusive ? "diffusive"
                                                                                                     : "feedback";
  out << "seed=" << cfg.seed << '\n'
      << "trajectories=" << trajectories << '\n'
      << "kind=" << kind << '\n'
      << "representation="
      << (cfg.representation == StateRepresentation::kWavefunction ? "wavefunction" : "density_matrix") << '\n'
      << "dt=" << format_double(cfg.dt) << '\n'
      << "t_final=" << format_double(cfg.t_final) << '\n'
      << "noise_substeps=" << cfg.noise_substeps << '\n'
      << "record_stride=" << cfg.record_stride << '\n'
      << "stream_derivation=splitmix64(seed, trajectory, stream, counter)\n";
}

}  // namespace ionfb
