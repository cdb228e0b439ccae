#pragma once

#include <complex>
#include <iosfwd>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "ionfb/error.hpp"
#include "ionfb/moments.hpp"
#include "ionfb/params.hpp"

namespace ionfb::fock {

using Complex = std::complex<double>;
using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;
using SparseC = Eigen::SparseMatrix<Complex>;

/// Operator on the Fock basis {|0>, ..., |n_max>}.
struct TruncatedOperator {
  std::string label;
  SparseC matrix;

  int dim() const { return static_cast<int>(matrix.rows()); }
  CMatrix dense() const { return CMatrix(matrix); }
};

struct OperatorSet {
  int n_max = 0;
  TruncatedOperator a;
  TruncatedOperator a_dag;
  TruncatedOperator number;
  TruncatedOperator z_tilde;  // a + a^dag
  TruncatedOperator x_phi;    // a e^{i phi} + a^dag e^{-i phi}
  TruncatedOperator c_m;      // (1 + eta z~ - eta^2 z~^2 / 2) / sqrt(2)
  TruncatedOperator h_eff;    // omega a^dag a - (i/2) gamma c_m^dag c_m
};

/// Builds the operator set. `frame_frequency` and `gamma_mirror` only enter h_eff.
OperatorSet build_fock_operators(double eta, double phi, int n_max, double frame_frequency = 0.0,
                                 double gamma_mirror = 0.0);

SparseC annihilation(int n_max);
SparseC identity(int n_max);

/// Hermitian, unit-trace state on the truncated basis.
class TruncatedDensityMatrix {
 public:
  TruncatedDensityMatrix() = default;
  explicit TruncatedDensityMatrix(CMatrix rho);

  static TruncatedDensityMatrix thermal(int n_max, double n_mean);
  static TruncatedDensityMatrix fock_state(int n_max, int n);
  static TruncatedDensityMatrix coherent(int n_max, Complex alpha);
  /// D(alpha) rho_th D(alpha)^dag, built from the displacement operator on a
  /// padded basis and then truncated.
  static TruncatedDensityMatrix displaced_thermal(int n_max, double n_mean, Complex alpha);
  static TruncatedDensityMatrix pure(const CVector& psi);

  int n_max() const { return static_cast<int>(rho_.rows()) - 1; }
  int dim() const { return static_cast<int>(rho_.rows()); }
  const CMatrix& matrix() const { return rho_; }
  CMatrix& matrix() { return rho_; }

  Complex trace() const { return rho_.trace(); }
  double hermiticity_error() const;
  /// Sum of the populations of the `levels` highest basis states.
  double top_population(int levels) const;
  void hermitize();

 private:
  CMatrix rho_;
};

/// Observables whose quadratic forms are projected exactly onto the truncated
/// space, so <n> = <z^2> + <p^2> - 1/2 holds identically.
struct MomentObservables {
  SparseC z, p, zz, pp, zp_sym, n;
  static MomentObservables build(int n_max);
};

std::vector<Complex> expectations(const TruncatedDensityMatrix& rho,
                                  const std::vector<const TruncatedOperator*>& ops);
Complex expectation(const CMatrix& rho, const SparseC& op);
GaussianMomentState wigner_moments(const TruncatedDensityMatrix& rho, const MomentObservables& obs);
GaussianMomentState wigner_moments(const TruncatedDensityMatrix& rho);
double mean_number(const TruncatedDensityMatrix& rho);

/// Which part of the mirror-mode dissipator gamma D[c_m] is kept.
enum class RecoilTerm {
  kNone,        // dropped, as in the feedback master equation
  kLinearized,  // gamma eta^2 / 2 D[z~], the diffusive-limit form
  kFull,        // gamma D[c_m] with the second-order jump operator
};

struct MasterEquation {
  enum class Kind { kLaserCooling, kFeedback };

  Kind kind = Kind::kLaserCooling;
  ModelRates rates;
  FeedbackConfig feedback;      // used when kind == kFeedback
  double frame_frequency = 0.0; // H = frame_frequency a^dag a
  RecoilTerm recoil = RecoilTerm::kFull;

  /// L0 = -i[H, .] + gamma D[c_m] + A- D[a] + A+ D[a^dag].
  static MasterEquation laser_cooling(const ModelRates& r, double frame_frequency,
                                      RecoilTerm recoil = RecoilTerm::kFull);
  /// Lab frame: H = nu_T a^dag a.
  static MasterEquation laser_cooling_lab(const ModelRates& r, RecoilTerm recoil = RecoilTerm::kFull);
  /// Rotating-frame feedback master equation with H = delta a^dag a.
  static MasterEquation feedback_loop(const ModelRates& r, const FeedbackConfig& fb,
                                      RecoilTerm recoil = RecoilTerm::kNone);
};

/// Lindblad superoperator acting on column-major vec(rho).
class Liouvillian {
 public:
  Liouvillian(const MasterEquation& me, int n_max);

  int n_max() const { return n_max_; }
  int dim() const { return n_max_ + 1; }
  const SparseC& superoperator() const { return super_; }
  const MasterEquation& equation() const { return me_; }

  CMatrix apply(const CMatrix& rho) const;
  /// Upper bound on the spectral radius (max column 1-norm).
  double norm_bound() const;
  /// Power-iteration estimate of the spectral radius.
  double spectral_radius_estimate(int iterations = 60) const;

 private:
  MasterEquation me_;
  int n_max_;
  SparseC super_;
};

/// Builds the same generator directly; convenience form for one-off applications.
CMatrix liouvillian_apply(const MasterEquation& me, const TruncatedDensityMatrix& rho);

enum class DensityIntegrator {
  kRungeKutta4,
  kSdirk2,  // two-stage L-stable singly diagonally implicit, sparse LU
};

struct DensityEvolutionOptions {
  DensityIntegrator integrator = DensityIntegrator::kRungeKutta4;
  double dt = 0.0;                 // 0 selects the step automatically
  double leakage_warn = 1e-6;      // top-5 population
  double leakage_error = 1e-3;     // top-level population
  bool hermitize_each_step = true;
};

struct DensityEvolution {
  std::vector<TruncatedDensityMatrix> states;  // one per time grid point
  double dt = 0.0;
  double max_trace_drift = 0.0;
  Warnings warnings;
};

/// Step-size rule: 0.25 min(1/(1 + 2|G~|), 1/|delta|, 1/(gamma n_max eta^2 G^2)),
/// further capped by the explicit stability limit of RK4.
double default_time_step(const Liouvillian& l, DensityIntegrator integrator);

DensityEvolution evolve_density_matrix(const Liouvillian& l, const TruncatedDensityMatrix& rho0,
                                       const std::vector<double>& t_grid,
                                       const DensityEvolutionOptions& opt = {});

/// Kernel of the generator with unit trace (sparse LU).
TruncatedDensityMatrix steady_state(const Liouvillian& l);

/// n_max from max(50, ceil(12 (N + 1))).
int default_n_max(double n_mean);

/// Row-major complex64 snapshot with a 16-byte header (uint64 dimension, float64 time).
void write_snapshot(std::ostream& out, const TruncatedDensityMatrix& rho, double time);
TruncatedDensityMatrix read_snapshot(std::istream& in, double* time = nullptr);

}  // namespace ionfb::fock
