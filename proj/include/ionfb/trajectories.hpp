#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "ionfb/fock.hpp"
#include "ionfb/moments.hpp"
#include "ionfb/params.hpp"

namespace ionfb {

enum class Unravelling { kJump, kDiffusive, kFeedback };

enum class StateRepresentation {
  kDensityMatrix,  // conditional rho_c, Euler-Maruyama on the stochastic master equation
  kWavefunction,   // pure-state unravelling; background channels become unobserved jumps
};

struct TrajectoryConfig {
  double dt = 1e-3;
  double t_final = 1.0;
  std::uint64_t seed = 0x1f0b5eedULL;
  int ensemble_size = 1;
  Unravelling kind = Unravelling::kJump;
  int record_stride = 1;
  /// Each step's Wiener increment is the sum of this many finer normals, so a
  /// run with (dt, k) and one with (dt/2, k/2) share the same Brownian path.
  int noise_substeps = 1;
  StateRepresentation representation = StateRepresentation::kWavefunction;
  fock::RecoilTerm recoil = fock::RecoilTerm::kLinearized;  // diffusive/feedback only
  double frame_frequency = 0.0;   // H = frame_frequency a^dag a (jump, diffusive)
  double quadrature_phase = 0.0;  // measured quadrature X_phi for the diffusive kind
  int threads = 0;                // 0: IONFB_THREADS or hardware concurrency
};

/// dt <= 0.05 / max(1, gamma~, |G~|); throws Error{kStepTooLarge}.
void validate(const TrajectoryConfig& cfg, const ModelRates& r, const FeedbackConfig& fb);

struct TrajectoryRecord {
  std::vector<double> times;       // recorded points, every record_stride steps, t = 0 included
  std::vector<double> mean_x_phi;  // <X_phi>_c (X_0 = z~)
  std::vector<double> n_cond;      // <n>_c
  std::vector<double> current;     // one sample per step
  std::vector<int> dn;             // detected counts per step (jump kind)
  std::vector<double> jump_times;  // detection times of the mirror channel
  std::uint64_t seed = 0;
  std::uint64_t trajectory = 0;
  double dt = 0.0;
  int record_stride = 1;
  long long background_jumps = 0;  // unobserved jumps (wavefunction form)
};

/// Initial condition: a density matrix is sampled through its eigen-decomposition
/// in the wavefunction representation.
class InitialState {
 public:
  explicit InitialState(const fock::TruncatedDensityMatrix& rho);

  int n_max() const { return rho_.n_max(); }
  const fock::TruncatedDensityMatrix& density() const { return rho_; }
  fock::CVector sample(std::uint64_t seed, std::uint64_t trajectory) const;

 private:
  fock::TruncatedDensityMatrix rho_;
  Eigen::VectorXd weights_;
  fock::CMatrix vectors_;
};

TrajectoryRecord simulate_jump_trajectory(const InitialState& init, const ModelRates& r,
                                          const TrajectoryConfig& cfg, std::uint64_t trajectory = 0);
TrajectoryRecord simulate_diffusive_trajectory(const InitialState& init, const ModelRates& r,
                                               const TrajectoryConfig& cfg, std::uint64_t trajectory = 0);
/// Measurement and feedback use the same Wiener increment (measure, then feed back).
TrajectoryRecord simulate_feedback_trajectory(const InitialState& init, const ModelRates& r,
                                              const FeedbackConfig& fb, const TrajectoryConfig& cfg,
                                              std::uint64_t trajectory = 0);

/// Runs cfg.ensemble_size trajectories of cfg.kind in parallel; output is
/// ordered by trajectory index.
std::vector<TrajectoryRecord> run_ensemble(const InitialState& init, const ModelRates& r,
                                           const FeedbackConfig& fb, const TrajectoryConfig& cfg);

/// The unconditional master equation whose solution the ensemble mean reproduces.
fock::MasterEquation ensemble_master_equation(const ModelRates& r, const FeedbackConfig& fb,
                                              const TrajectoryConfig& cfg);

struct SeriesStatistics {
  std::vector<double> mean;
  std::vector<double> variance;  // unbiased
  std::vector<double> std_error;
};

struct EnsembleStatistics {
  std::vector<double> times;
  SeriesStatistics n_cond;
  SeriesStatistics mean_x_phi;
  SeriesStatistics current;  // per step
  std::size_t count = 0;
};

EnsembleStatistics ensemble_statistics(const std::vector<TrajectoryRecord>& records);

/// Mean detection rate of the mirror channel over [t_from, t_final] with its
/// standard error across trajectories.
struct RateEstimate {
  double rate;
  double std_error;
};
RateEstimate jump_rate(const std::vector<TrajectoryRecord>& records, double t_from);

/// CSV columns t, mean_x_phi, n_cond, current, dN; current is averaged and dN
/// summed over each record window.
void write_trajectory_csv(std::ostream& out, const TrajectoryRecord& rec);
void write_ensemble_csv(std::ostream& out, const EnsembleStatistics& stats);
void write_seed_sidecar(std::ostream& out, const TrajectoryConfig& cfg, std::size_t trajectories);

int worker_count(int requested);

}  // namespace ionfb
