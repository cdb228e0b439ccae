#include "ionfb/moments.hpp"

#include <cmath>
#include <sstream>

#include <Eigen/Eigenvalues>
#include <boost/numeric/odeint.hpp>
#include <unsupported/Eigen/MatrixFunctions>

namespace ionfb {

Warnings validate(const FeedbackConfig& fb, const ModelRates& r, double ratio) {
  if (fb.delay < 0.0) throw Error(ErrorKind::kInvalidParameter, "feedback delay must be >= 0");
  if (fb.bandwidth <= 0.0) throw Error(ErrorKind::kInvalidParameter, "bandwidth must be positive");
  Warnings w;
  const double slow = std::max({std::abs(fb.gain) * r.gamma_tilde, std::abs(fb.delta_tilde), 1.0});
  if (fb.bandwidth < ratio * slow) {
    std::ostringstream os;
    os << "bandwidth B=" << fb.bandwidth << " is not well above the slow rates (" << slow << ")";
    w.push_back(os.str());
  }
  if (r.nu_tilde > 0.0) {
    if (r.nu_tilde < ratio * fb.bandwidth) {
      std::ostringstream os;
      os << "trap frequency " << r.nu_tilde << " is not well above bandwidth " << fb.bandwidth;
      w.push_back(os.str());
    }
    if (fb.delay * r.nu_tilde > 1.0 / ratio) {
      w.push_back("feedback delay is not short against the trap period");
    }
  }
  return w;
}

GaussianMomentState GaussianMomentState::thermal(double n) {
  GaussianMomentState s;
  s.zz = s.pp = (2.0 * n + 1.0) / 4.0;
  return s;
}

Warnings check_physical(const GaussianMomentState& s) {
  Warnings w;
  const double vz = s.var_z();
  const double vp = s.var_p();
  const double c = s.cov_zp();
  if (vz <= 0.0 || vp <= 0.0) w.push_back("non-positive variance");
  if (vz * vp - c * c < 1.0 / 16.0 - 1e-12) {
    std::ostringstream os;
    os << "uncertainty bound violated: det = " << vz * vp - c * c << " < 1/16";
    w.push_back(os.str());
  }
  return w;
}

DriftDiffusion build_drift_diffusion(const ModelRates& r, const FeedbackConfig& fb) {
  const double gt = fb.loop_gain(r);
  const double s = std::sin(fb.phase);
  const double c = std::cos(fb.phase);
  const double d = fb.delta_tilde;
  const double thermal = 2.0 * r.n_bar + 1.0;
  const double feedback_noise = 0.5 * fb.gain * fb.gain * r.gamma_tilde;

  DriftDiffusion dd;
  dd.rates = r;
  dd.feedback = fb;
  dd.kappa << 0.5, -d,
              gt * c + d, 0.5 * (1.0 - 2.0 * gt * s);
  dd.diffusion << thermal / 8.0, 0.0,
                  0.0, (thermal + feedback_noise) / 8.0;
  // Third component is the symmetric <zp>; the matrix follows from
  // d<x_k x_l>/dt = D_kl + D_lk - kappa_kj <x_l x_j> - kappa_lj <x_k x_j>.
  dd.evolution << -1.0, 0.0, 2.0 * d,
                  0.0, -(1.0 - 2.0 * gt * s), -2.0 * (gt * c + d),
                  -(gt * c + d), d, -(1.0 - gt * s);
  dd.source << thermal / 4.0, (thermal + feedback_noise) / 4.0, 0.0;
  return dd;
}

StabilityReport stability_margin(const DriftDiffusion& dd) {
  Eigen::EigenSolver<Eigen::Matrix3d> es(dd.evolution, false);
  StabilityReport rep;
  double max_re = -std::numeric_limits<double>::infinity();
  for (int i = 0; i < 3; ++i) {
    rep.eigenvalues[i] = es.eigenvalues()[i];
    if (rep.eigenvalues[i].real() > max_re) {
      max_re = rep.eigenvalues[i].real();
      rep.slowest = rep.eigenvalues[i];
    }
  }
  rep.stable = max_re < 0.0;
  const double s = std::sin(dd.feedback.phase);
  const double coupling = dd.rates.eta * dd.rates.gamma_tilde;
  if (s > 0.0 && coupling > 0.0) rep.critical_gain = 1.0 / (2.0 * coupling * s);
  return rep;
}

Eigen::Vector3d solve3(Eigen::Matrix3d a, Eigen::Vector3d b) {
  for (int col = 0; col < 3; ++col) {
    int pivot = col;
    for (int row = col + 1; row < 3; ++row) {
      if (std::abs(a(row, col)) > std::abs(a(pivot, col))) pivot = row;
    }
    if (a(pivot, col) == 0.0) throw Error(ErrorKind::kUnstable, "singular evolution matrix");
    if (pivot != col) {
      a.row(col).swap(a.row(pivot));
      std::swap(b(col), b(pivot));
    }
    for (int row = col + 1; row < 3; ++row) {
      const double f = a(row, col) / a(col, col);
      a.row(row) -= f * a.row(col);
      b(row) -= f * b(col);
    }
  }
  Eigen::Vector3d x;
  for (int row = 2; row >= 0; --row) {
    double acc = b(row);
    for (int k = row + 1; k < 3; ++k) acc -= a(row, k) * x(k);
    x(row) = acc / a(row, row);
  }
  return x;
}

GaussianMomentState steady_state_moments(const DriftDiffusion& dd) {
  const StabilityReport rep = stability_margin(dd);
  if (!rep.stable) {
    std::ostringstream os;
    os << "evolution matrix has eigenvalue " << rep.slowest.real() << (rep.slowest.imag() >= 0 ? "+" : "")
       << rep.slowest.imag() << "i with non-negative real part";
    throw Error(ErrorKind::kUnstable, os.str());
  }
  const Eigen::Vector3d y = solve3(dd.evolution, -dd.source);
  GaussianMomentState s;
  s.zz = y(0);
  s.pp = y(1);
  s.zp = y(2);
  return s;
}

namespace {

using OdeState = std::array<double, 5>;

std::vector<GaussianMomentState> evolve_exact(const DriftDiffusion& dd, const GaussianMomentState& s0,
                                              const std::vector<double>& t_grid) {
  // Augmented generator [[M, u], [0, 0]] handles the affine source for any M.
  Eigen::Matrix4d aug = Eigen::Matrix4d::Zero();
  aug.topLeftCorner<3, 3>() = dd.evolution;
  aug.topRightCorner<3, 1>() = dd.source;
  const Eigen::Vector4d y0(s0.zz, s0.pp, s0.zp, 1.0);
  const Eigen::Vector2d m0(s0.mean_z, s0.mean_p);

  std::vector<GaussianMomentState> out;
  out.reserve(t_grid.size());
  for (double t : t_grid) {
    const Eigen::Matrix4d prop = (aug * t).exp();
    const Eigen::Matrix2d first = (-dd.kappa * t).exp();
    const Eigen::Vector4d y = prop * y0;
    const Eigen::Vector2d m = first * m0;
    out.push_back({m(0), m(1), y(0), y(1), y(2)});
  }
  return out;
}

}  // namespace

std::vector<GaussianMomentState> evolve_moments(const DriftDiffusion& dd, const GaussianMomentState& s0,
                                                const std::vector<double>& t_grid,
                                                const MomentEvolutionOptions& opt) {
  if (t_grid.empty()) return {};
  if (t_grid.front() != 0.0) throw Error(ErrorKind::kInvalidParameter, "time grid must start at 0");
  for (std::size_t i = 1; i < t_grid.size(); ++i) {
    if (!(t_grid[i] > t_grid[i - 1])) {
      throw Error(ErrorKind::kInvalidParameter, "time grid must be strictly increasing");
    }
  }
  if (opt.integrator == MomentIntegrator::kExactExponential) return evolve_exact(dd, s0, t_grid);

  namespace odeint = boost::numeric::odeint;
  const Eigen::Matrix2d k = dd.kappa;
  const Eigen::Matrix3d m = dd.evolution;
  const Eigen::Vector3d u = dd.source;
  auto rhs = [&](const OdeState& x, OdeState& dx, double) {
    dx[0] = -(k(0, 0) * x[0] + k(0, 1) * x[1]);
    dx[1] = -(k(1, 0) * x[0] + k(1, 1) * x[1]);
    for (int i = 0; i < 3; ++i) {
      dx[2 + i] = u(i) + m(i, 0) * x[2] + m(i, 1) * x[3] + m(i, 2) * x[4];
    }
  };

  std::vector<GaussianMomentState> out;
  out.reserve(t_grid.size());
  auto observer = [&](const OdeState& x, double) { out.push_back({x[0], x[1], x[2], x[3], x[4]}); };
  OdeState x{s0.mean_z, s0.mean_p, s0.zz, s0.pp, s0.zp};
  auto stepper = odeint::make_controlled(opt.abs_tol, opt.rel_tol, odeint::runge_kutta_dopri5<OdeState>());
  const double dt0 = t_grid.size() > 1 ? 1e-3 * (t_grid[1] - t_grid[0]) : 1e-3;
  odeint::integrate_times(stepper, rhs, x, t_grid.begin(), t_grid.end(), dt0, observer);
  return out;
}

double phonon_number(const GaussianMomentState& s) { return s.zz + s.pp - 0.5; }

double squeezing_parameter(const GaussianMomentState& s) {
  const double szz = s.var_z();
  const double spp = s.var_p();
  const double szp = s.cov_zp();
  if (!(szz + spp > 0.0)) throw Error(ErrorKind::kDegenerateState, "sigma_zz + sigma_pp <= 0");
  const double f = std::sqrt((szz - spp) * (szz - spp) + 4.0 * szp * szp) / (szz + spp);
  return (1.0 - f) / (1.0 + f);
}

}  // namespace ionfb
