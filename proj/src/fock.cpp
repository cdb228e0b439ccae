#include "ionfb/fock.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <istream>
#include <map>
#include <memory>
#include <ostream>
#include <random>
#include <sstream>

#include <Eigen/SparseLU>
#include <unsupported/Eigen/KroneckerProduct>
#include <unsupported/Eigen/MatrixFunctions>

namespace ionfb::fock {

namespace {

constexpr Complex kI{0.0, 1.0};

void require_dim(int expected, int got, const char* what) {
  if (expected != got) {
    std::ostringstream os;
    os << what << ": dimension " << got << " does not match " << expected;
    throw Error(ErrorKind::kDimensionMismatch, os.str());
  }
}

SparseC from_triplets(int dim, const std::vector<Eigen::Triplet<Complex>>& t) {
  SparseC m(dim, dim);
  m.setFromTriplets(t.begin(), t.end());
  return m;
}

// Projection of (a + s a^dag)^2 onto the truncated space, s = +1 or -1.
SparseC exact_square(int n_max, double s) {
  const int d = n_max + 1;
  std::vector<Eigen::Triplet<Complex>> t;
  for (int n = 0; n < d; ++n) {
    t.emplace_back(n, n, s * (2.0 * n + 1.0));
    if (n + 2 < d) {
      const double v = std::sqrt((n + 1.0) * (n + 2.0));
      t.emplace_back(n, n + 2, v);
      t.emplace_back(n + 2, n, v);
    }
  }
  return from_triplets(d, t);
}

SparseC adjoint(const SparseC& m) { return SparseC(m.adjoint()); }
SparseC transpose(const SparseC& m) { return SparseC(m.transpose()); }

SparseC kron(const SparseC& a, const SparseC& b) {
  SparseC out = Eigen::kroneckerProduct(a, b);
  return out;
}

// Superoperator of rho -> c rho c^dag - {c^dag c, rho}/2 in column-major vec form.
SparseC dissipator(const SparseC& c, const SparseC& id) {
  const SparseC cdc = adjoint(c) * c;
  SparseC out = kron(SparseC(c.conjugate()), c);
  out -= 0.5 * kron(id, cdc);
  out -= 0.5 * kron(transpose(cdc), id);
  return out;
}

SparseC commutator(const SparseC& h, const SparseC& id) {
  SparseC out = kron(id, h);
  out -= kron(transpose(h), id);
  return out;
}

CMatrix dense_dissipator(const CMatrix& c, const CMatrix& rho) {
  const CMatrix cdc = c.adjoint() * c;
  return c * rho * c.adjoint() - 0.5 * (cdc * rho + rho * cdc);
}

SparseC jump_operator(double eta, int n_max) {
  const SparseC a = annihilation(n_max);
  const SparseC z = a + adjoint(a);
  SparseC c = identity(n_max) + eta * z - 0.5 * eta * eta * exact_square(n_max, 1.0);
  return c / std::sqrt(2.0);
}

SparseC x_quadrature(double phi, int n_max) {
  const SparseC a = annihilation(n_max);
  return std::exp(kI * phi) * a + std::exp(-kI * phi) * adjoint(a);
}

void check_hermitian(const CMatrix& rho, const char* what) {
  const double err = (rho - rho.adjoint()).cwiseAbs().maxCoeff();
  if (err > 1e-8 * std::max(1.0, rho.cwiseAbs().maxCoeff())) {
    std::ostringstream os;
    os << what << ": matrix is not Hermitian (max deviation " << err << ")";
    throw Error(ErrorKind::kInvalidParameter, os.str());
  }
}

}  // namespace

SparseC annihilation(int n_max) {
  if (n_max < 2) throw Error(ErrorKind::kInvalidParameter, "n_max must be >= 2");
  const int d = n_max + 1;
  std::vector<Eigen::Triplet<Complex>> t;
  for (int n = 1; n < d; ++n) t.emplace_back(n - 1, n, std::sqrt(static_cast<double>(n)));
  return from_triplets(d, t);
}

SparseC identity(int n_max) {
  SparseC id(n_max + 1, n_max + 1);
  id.setIdentity();
  return id;
}

OperatorSet build_fock_operators(double eta, double phi, int n_max, double frame_frequency,
                                 double gamma_mirror) {
  OperatorSet ops;
  ops.n_max = n_max;
  const SparseC a = annihilation(n_max);
  ops.a = {"a", a};
  ops.a_dag = {"a_dag", adjoint(a)};
  ops.number = {"n", SparseC(adjoint(a) * a)};
  ops.z_tilde = {"z_tilde", SparseC(a + adjoint(a))};
  ops.x_phi = {"x_phi", x_quadrature(phi, n_max)};
  ops.c_m = {"c_m", jump_operator(eta, n_max)};
  const SparseC cdc = adjoint(ops.c_m.matrix) * ops.c_m.matrix;
  ops.h_eff = {"h_eff", SparseC(frame_frequency * ops.number.matrix - 0.5 * kI * gamma_mirror * cdc)};
  return ops;
}

// ---------------------------------------------------------------------------

TruncatedDensityMatrix::TruncatedDensityMatrix(CMatrix rho) : rho_(std::move(rho)) {
  if (rho_.rows() != rho_.cols()) {
    throw Error(ErrorKind::kDimensionMismatch, "density matrix must be square");
  }
  if (rho_.rows() < 3) throw Error(ErrorKind::kInvalidParameter, "n_max must be >= 2");
}

TruncatedDensityMatrix TruncatedDensityMatrix::thermal(int n_max, double n_mean) {
  if (n_max < 2) throw Error(ErrorKind::kInvalidParameter, "n_max must be >= 2");
  if (n_mean < 0.0) throw Error(ErrorKind::kInvalidParameter, "thermal occupation must be >= 0");
  CMatrix rho = CMatrix::Zero(n_max + 1, n_max + 1);
  const double q = n_mean / (n_mean + 1.0);
  double p = 1.0;
  double norm = 0.0;
  for (int n = 0; n <= n_max; ++n) {
    rho(n, n) = p;
    norm += p;
    p *= q;
  }
  return TruncatedDensityMatrix(rho / norm);
}

TruncatedDensityMatrix TruncatedDensityMatrix::fock_state(int n_max, int n) {
  if (n < 0 || n > n_max) throw Error(ErrorKind::kInvalidParameter, "Fock index outside basis");
  CMatrix rho = CMatrix::Zero(n_max + 1, n_max + 1);
  rho(n, n) = 1.0;
  return TruncatedDensityMatrix(rho);
}

TruncatedDensityMatrix TruncatedDensityMatrix::coherent(int n_max, Complex alpha) {
  CVector psi(n_max + 1);
  Complex c = std::exp(-0.5 * std::norm(alpha));
  for (int n = 0; n <= n_max; ++n) {
    psi(n) = c;
    c *= alpha / std::sqrt(n + 1.0);
  }
  return pure(psi);
}

TruncatedDensityMatrix TruncatedDensityMatrix::displaced_thermal(int n_max, double n_mean, Complex alpha) {
  const int pad = n_max + 40 + static_cast<int>(std::ceil(4.0 * std::norm(alpha) + 12.0 * (n_mean + 1.0)));
  const CMatrix a = CMatrix(annihilation(pad));
  const CMatrix gen = alpha * a.adjoint() - std::conj(alpha) * a;
  const CMatrix disp = gen.exp();
  const CMatrix th = thermal(pad, n_mean).matrix();
  const CMatrix full = disp * th * disp.adjoint();
  CMatrix rho = full.topLeftCorner(n_max + 1, n_max + 1);
  rho /= rho.trace();
  return TruncatedDensityMatrix(rho);
}

TruncatedDensityMatrix TruncatedDensityMatrix::pure(const CVector& psi) {
  const double nrm = psi.norm();
  if (!(nrm > 0.0)) throw Error(ErrorKind::kInvalidParameter, "zero state vector");
  const CVector v = psi / nrm;
  return TruncatedDensityMatrix(v * v.adjoint());
}

double TruncatedDensityMatrix::hermiticity_error() const {
  return (rho_ - rho_.adjoint()).cwiseAbs().maxCoeff();
}

double TruncatedDensityMatrix::top_population(int levels) const {
  double s = 0.0;
  const int d = dim();
  for (int k = std::max(0, d - levels); k < d; ++k) s += rho_(k, k).real();
  return s;
}

void TruncatedDensityMatrix::hermitize() {
  CMatrix h = 0.5 * (rho_ + rho_.adjoint());
  rho_ = std::move(h);
}

// ---------------------------------------------------------------------------

MomentObservables MomentObservables::build(int n_max) {
  MomentObservables o;
  const SparseC a = annihilation(n_max);
  const SparseC ad = adjoint(a);
  o.z = 0.5 * (a + ad);
  o.p = (-0.5 * kI) * (a - ad);
  o.zz = 0.25 * exact_square(n_max, 1.0);
  o.pp = -0.25 * exact_square(n_max, -1.0);
  // (zp + pz)/2 = (a^2 - a^dag^2)/(4i)
  const int d = n_max + 1;
  std::vector<Eigen::Triplet<Complex>> t;
  for (int n = 0; n + 2 < d; ++n) {
    const double v = std::sqrt((n + 1.0) * (n + 2.0)) / 4.0;
    t.emplace_back(n, n + 2, -kI * v);
    t.emplace_back(n + 2, n, kI * v);
  }
  o.zp_sym = from_triplets(d, t);
  o.n = ad * a;
  return o;
}

Complex expectation(const CMatrix& rho, const SparseC& op) {
  require_dim(static_cast<int>(op.rows()), static_cast<int>(rho.rows()), "expectation");
  // Tr(rho A) = sum_{ij} rho_ji A_ij
  Complex acc = 0.0;
  for (int k = 0; k < op.outerSize(); ++k) {
    for (SparseC::InnerIterator it(op, k); it; ++it) acc += rho(it.col(), it.row()) * it.value();
  }
  return acc;
}

std::vector<Complex> expectations(const TruncatedDensityMatrix& rho,
                                  const std::vector<const TruncatedOperator*>& ops) {
  std::vector<Complex> out;
  out.reserve(ops.size());
  for (const TruncatedOperator* op : ops) out.push_back(expectation(rho.matrix(), op->matrix));
  return out;
}

GaussianMomentState wigner_moments(const TruncatedDensityMatrix& rho, const MomentObservables& obs) {
  const CMatrix& m = rho.matrix();
  GaussianMomentState s;
  s.mean_z = expectation(m, obs.z).real();
  s.mean_p = expectation(m, obs.p).real();
  s.zz = expectation(m, obs.zz).real();
  s.pp = expectation(m, obs.pp).real();
  s.zp = expectation(m, obs.zp_sym).real();
  return s;
}

GaussianMomentState wigner_moments(const TruncatedDensityMatrix& rho) {
  return wigner_moments(rho, MomentObservables::build(rho.n_max()));
}

double mean_number(const TruncatedDensityMatrix& rho) {
  double s = 0.0;
  for (int n = 0; n < rho.dim(); ++n) s += n * rho.matrix()(n, n).real();
  return s;
}

// ---------------------------------------------------------------------------

MasterEquation MasterEquation::laser_cooling(const ModelRates& r, double frame_frequency, RecoilTerm recoil) {
  MasterEquation me;
  me.kind = Kind::kLaserCooling;
  me.rates = r;
  me.frame_frequency = frame_frequency;
  me.recoil = recoil;
  return me;
}

MasterEquation MasterEquation::laser_cooling_lab(const ModelRates& r, RecoilTerm recoil) {
  return laser_cooling(r, r.nu_tilde, recoil);
}

MasterEquation MasterEquation::feedback_loop(const ModelRates& r, const FeedbackConfig& fb, RecoilTerm recoil) {
  MasterEquation me;
  me.kind = Kind::kFeedback;
  me.rates = r;
  me.feedback = fb;
  me.frame_frequency = fb.delta_tilde;
  me.recoil = recoil;
  return me;
}

Liouvillian::Liouvillian(const MasterEquation& me, int n_max) : me_(me), n_max_(n_max) {
  const SparseC id = identity(n_max);
  const SparseC a = annihilation(n_max);
  const SparseC ad = adjoint(a);
  const SparseC z = a + ad;
  const ModelRates& r = me.rates;

  super_ = (-kI * me.frame_frequency) * commutator(SparseC(ad * a), id);
  super_ += r.a_minus() * dissipator(a, id);
  super_ += r.a_plus() * dissipator(ad, id);

  switch (me.recoil) {
    case RecoilTerm::kNone:
      break;
    case RecoilTerm::kLinearized:
      super_ += (0.5 * r.gamma_tilde * r.eta * r.eta) * dissipator(z, id);
      break;
    case RecoilTerm::kFull:
      super_ += r.gamma_tilde * dissipator(jump_operator(r.eta, n_max), id);
      break;
  }

  if (me.kind == MasterEquation::Kind::kFeedback && me.feedback.gain != 0.0) {
    const double g = me.feedback.gain;
    const SparseC x = x_quadrature(me.feedback.phase, n_max);
    // -i (G/4) gamma eta [z, X rho + rho X]
    const SparseC zx = z * x;
    const SparseC xz = x * z;
    SparseC fb = kron(id, zx) + kron(transpose(x), z) - kron(transpose(z), x) - kron(transpose(xz), id);
    super_ += (-kI * 0.25 * g * r.gamma_tilde * r.eta) * fb;
    // -(G^2/16) gamma [z, [z, rho]]
    const SparseC zz = z * z;
    SparseC dc = kron(id, zz) - 2.0 * kron(transpose(z), z) + kron(transpose(zz), id);
    super_ += (-g * g * r.gamma_tilde / 16.0) * dc;
  }
  super_.prune(Complex(0.0, 0.0));
  super_.makeCompressed();
}

CMatrix Liouvillian::apply(const CMatrix& rho) const {
  require_dim(dim(), static_cast<int>(rho.rows()), "Liouvillian::apply");
  require_dim(dim(), static_cast<int>(rho.cols()), "Liouvillian::apply");
  const Eigen::Map<const CVector> v(rho.data(), rho.size());
  CVector out = super_ * v;
  return Eigen::Map<CMatrix>(out.data(), dim(), dim());
}

double Liouvillian::norm_bound() const {
  double best = 0.0;
  for (int k = 0; k < super_.outerSize(); ++k) {
    double col = 0.0;
    for (SparseC::InnerIterator it(super_, k); it; ++it) col += std::abs(it.value());
    best = std::max(best, col);
  }
  return best;
}

double Liouvillian::spectral_radius_estimate(int iterations) const {
  std::mt19937_64 gen(12345);
  std::normal_distribution<double> nd;
  CVector v(super_.cols());
  for (int i = 0; i < v.size(); ++i) v(i) = Complex(nd(gen), nd(gen));
  v.normalize();
  double est = 0.0;
  for (int it = 0; it < iterations; ++it) {
    CVector w = super_ * v;
    est = w.norm();
    if (est == 0.0) return 0.0;
    v = w / est;
  }
  return est;
}

CMatrix liouvillian_apply(const MasterEquation& me, const TruncatedDensityMatrix& rho) {
  const CMatrix& m = rho.matrix();
  check_hermitian(m, "liouvillian_apply");
  const int n_max = rho.n_max();
  const CMatrix a = CMatrix(annihilation(n_max));
  const CMatrix ad = a.adjoint();
  const CMatrix z = a + ad;
  const CMatrix num = ad * a;
  const ModelRates& r = me.rates;

  CMatrix out = -kI * me.frame_frequency * (num * m - m * num);
  out += r.a_minus() * dense_dissipator(a, m) + r.a_plus() * dense_dissipator(ad, m);
  if (me.recoil == RecoilTerm::kLinearized) {
    out += 0.5 * r.gamma_tilde * r.eta * r.eta * dense_dissipator(z, m);
  } else if (me.recoil == RecoilTerm::kFull) {
    out += r.gamma_tilde * dense_dissipator(CMatrix(jump_operator(r.eta, n_max)), m);
  }
  if (me.kind == MasterEquation::Kind::kFeedback) {
    const double g = me.feedback.gain;
    const CMatrix x = CMatrix(x_quadrature(me.feedback.phase, n_max));
    const CMatrix s = x * m + m * x;
    out += -kI * 0.25 * g * r.gamma_tilde * r.eta * (z * s - s * z);
    const CMatrix c1 = z * m - m * z;
    out += -g * g * r.gamma_tilde / 16.0 * (z * c1 - c1 * z);
  }
  return out;
}

// ---------------------------------------------------------------------------

int default_n_max(double n_mean) {
  return std::max(50, static_cast<int>(std::ceil(12.0 * (n_mean + 1.0))));
}

double default_time_step(const Liouvillian& l, DensityIntegrator integrator) {
  const MasterEquation& me = l.equation();
  const ModelRates& r = me.rates;
  double limit = 1.0;
  if (me.kind == MasterEquation::Kind::kFeedback) {
    const double gt = std::abs(me.feedback.loop_gain(r));
    limit = std::min(limit, 1.0 / (1.0 + 2.0 * gt));
    const double g2 = r.gamma_tilde * l.n_max() * r.eta * r.eta * me.feedback.gain * me.feedback.gain;
    if (g2 > 0.0) limit = std::min(limit, 1.0 / g2);
  }
  if (me.frame_frequency != 0.0) limit = std::min(limit, 1.0 / std::abs(me.frame_frequency));
  double dt = 0.25 * limit;
  if (integrator == DensityIntegrator::kRungeKutta4) {
    // The real-axis stability interval of RK4 is [-2.78, 0].
    dt = std::min(dt, 2.0 / l.norm_bound());
  } else {
    dt *= 0.2;
  }
  return dt;
}

namespace {

struct StepCounts {
  int steps;
  double h;
};

StepCounts split_interval(double span, double dt) {
  const int n = std::max(1, static_cast<int>(std::ceil(span / dt - 1e-9)));
  return {n, span / n};
}

void check_leakage(const TruncatedDensityMatrix& rho, double t, const DensityEvolutionOptions& opt,
                   bool& warned, Warnings& warnings) {
  const int d = rho.dim();
  const double top = rho.matrix()(d - 1, d - 1).real();
  if (top > opt.leakage_error) {
    std::ostringstream os;
    os << "top-level population " << top << " at t=" << t << " exceeds " << opt.leakage_error;
    throw Error(ErrorKind::kTruncationLeakage, os.str());
  }
  const double top5 = rho.top_population(5);
  if (!warned && top5 > opt.leakage_warn) {
    std::ostringstream os;
    os << "population " << top5 << " in the top 5 levels at t=" << t;
    warnings.push_back(os.str());
    warned = true;
  }
}

}  // namespace

DensityEvolution evolve_density_matrix(const Liouvillian& l, const TruncatedDensityMatrix& rho0,
                                       const std::vector<double>& t_grid, const DensityEvolutionOptions& opt) {
  require_dim(l.dim(), rho0.dim(), "evolve_density_matrix");
  DensityEvolution res;
  if (t_grid.empty()) return res;
  for (std::size_t i = 1; i < t_grid.size(); ++i) {
    if (!(t_grid[i] > t_grid[i - 1])) {
      throw Error(ErrorKind::kInvalidParameter, "time grid must be strictly increasing");
    }
  }
  res.dt = opt.dt > 0.0 ? opt.dt : default_time_step(l, opt.integrator);
  const int d = l.dim();
  const SparseC& L = l.superoperator();
  CVector y = Eigen::Map<const CVector>(rho0.matrix().data(), rho0.matrix().size());

  auto hermitize = [&](CVector& v) {
    Eigen::Map<CMatrix> m(v.data(), d, d);
    CMatrix h = 0.5 * (m + m.adjoint());
    m = h;
  };
  auto trace_of = [&](const CVector& v) {
    Complex t = 0.0;
    for (int k = 0; k < d; ++k) t += v(k * (d + 1));
    return t;
  };

  // SDIRK2 factorizations keyed by step size.
  const double gam = 1.0 - 1.0 / std::sqrt(2.0);
  std::map<double, std::unique_ptr<Eigen::SparseLU<SparseC>>> lu_cache;
  auto factor = [&](double h) -> Eigen::SparseLU<SparseC>& {
    auto it = lu_cache.find(h);
    if (it != lu_cache.end()) return *it->second;
    SparseC sys(L.rows(), L.cols());
    sys.setIdentity();
    sys -= (gam * h) * L;
    auto lu = std::make_unique<Eigen::SparseLU<SparseC>>();
    lu->compute(sys);
    if (lu->info() != Eigen::Success) throw Error(ErrorKind::kUnstable, "implicit step matrix is singular");
    return *lu_cache.emplace(h, std::move(lu)).first->second;
  };

  bool warned = false;
  const double t0 = t_grid.front();
  res.states.reserve(t_grid.size());
  for (std::size_t gi = 0; gi < t_grid.size(); ++gi) {
    if (gi > 0) {
      const StepCounts sc = split_interval(t_grid[gi] - t_grid[gi - 1], res.dt);
      const double h = sc.h;
      for (int s = 0; s < sc.steps; ++s) {
        if (opt.integrator == DensityIntegrator::kRungeKutta4) {
          const CVector k1 = L * y;
          const CVector k2 = L * (y + 0.5 * h * k1);
          const CVector k3 = L * (y + 0.5 * h * k2);
          const CVector k4 = L * (y + h * k3);
          y += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        } else {
          auto& lu = factor(h);
          const CVector k1 = lu.solve(CVector(L * y));
          const CVector k2 = lu.solve(CVector(L * (y + (1.0 - gam) * h * k1)));
          y += h * ((1.0 - gam) * k1 + gam * k2);
        }
        if (opt.hermitize_each_step) hermitize(y);
      }
      if (!y.allFinite()) throw Error(ErrorKind::kUnstable, "density-matrix integration diverged");
    }
    res.max_trace_drift = std::max(res.max_trace_drift, std::abs(trace_of(y) - 1.0));
    TruncatedDensityMatrix rho(Eigen::Map<CMatrix>(y.data(), d, d));
    check_leakage(rho, t_grid[gi] - t0, opt, warned, res.warnings);
    res.states.push_back(std::move(rho));
  }
  if (res.max_trace_drift > 1e-10) {
    std::ostringstream os;
    os << "trace drift " << res.max_trace_drift << " during evolution";
    res.warnings.push_back(os.str());
  }
  return res;
}

TruncatedDensityMatrix steady_state(const Liouvillian& l) {
  const int d = l.dim();
  const SparseC& L = l.superoperator();
  // Replace the equation for rho_00 by the trace condition.
  std::vector<Eigen::Triplet<Complex>> t;
  t.reserve(L.nonZeros() + d);
  for (int k = 0; k < L.outerSize(); ++k) {
    for (SparseC::InnerIterator it(L, k); it; ++it) {
      if (it.row() != 0) t.emplace_back(static_cast<int>(it.row()), static_cast<int>(it.col()), it.value());
    }
  }
  for (int k = 0; k < d; ++k) t.emplace_back(0, k * (d + 1), 1.0);
  SparseC sys(L.rows(), L.cols());
  sys.setFromTriplets(t.begin(), t.end());
  sys.makeCompressed();
  Eigen::SparseLU<SparseC> lu;
  lu.compute(sys);
  if (lu.info() != Eigen::Success) throw Error(ErrorKind::kUnstable, "steady-state system is singular");
  CVector rhs = CVector::Zero(L.rows());
  rhs(0) = 1.0;
  CVector v = lu.solve(rhs);
  TruncatedDensityMatrix rho(Eigen::Map<CMatrix>(v.data(), d, d));
  rho.hermitize();
  const int top = d - 1;
  if (rho.matrix()(top, top).real() > 1e-3) {
    throw Error(ErrorKind::kTruncationLeakage, "steady state populates the top basis level");
  }
  return rho;
}

// ---------------------------------------------------------------------------

void write_snapshot(std::ostream& out, const TruncatedDensityMatrix& rho, double time) {
  const std::uint64_t dim = static_cast<std::uint64_t>(rho.dim());
  out.write(reinterpret_cast<const char*>(&dim), sizeof(dim));
  out.write(reinterpret_cast<const char*>(&time), sizeof(time));
  const CMatrix& m = rho.matrix();
  for (int i = 0; i < rho.dim(); ++i) {
    for (int j = 0; j < rho.dim(); ++j) {
      const float pair[2] = {static_cast<float>(m(i, j).real()), static_cast<float>(m(i, j).imag())};
      out.write(reinterpret_cast<const char*>(pair), sizeof(pair));
    }
  }
}

TruncatedDensityMatrix read_snapshot(std::istream& in, double* time) {
  std::uint64_t dim = 0;
  double t = 0.0;
  in.read(reinterpret_cast<char*>(&dim), sizeof(dim));
  in.read(reinterpret_cast<char*>(&t), sizeof(t));
  if (!in || dim < 3 || dim > 100000) throw Error(ErrorKind::kInvalidParameter, "bad snapshot header");
  CMatrix m(dim, dim);
  for (std::uint64_t i = 0; i < dim; ++i) {
    for (std::uint64_t j = 0; j < dim; ++j) {
      float pair[2];
      in.read(reinterpret_cast<char*>(pair), sizeof(pair));
      m(i, j) = Complex(pair[0], pair[1]);
    }
  }
  if (!in) throw Error(ErrorKind::kInvalidParameter, "truncated snapshot");
  if (time) *time = t;
  return TruncatedDensityMatrix(m);
}

}  // namespace ionfb::fock
