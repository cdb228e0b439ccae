#include "cli.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <ostream>
#include <set>
#include <sstream>

#include <CLI11.hpp>

#include "ionfb/analytic.hpp"
#include "ionfb/config.hpp"
#include "ionfb/csv.hpp"
#include "ionfb/fock.hpp"
#include "ionfb/optimize.hpp"
#include "ionfb/trajectories.hpp"
#include "ionfb/validation.hpp"

namespace ionfb::cli {

namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kDeg = kPi / 180.0;

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct Flags {
  std::string config;
  std::string out;
  std::uint64_t seed = 0;
  double eta = 0, epsilon = 0, nbar = 0, alpha = 0, gain = 0, phi_deg = 0, delta_tilde = 0, bandwidth = 0;
  int nmax = 0;
  double dt = 0, tfinal = 0;
  int ensemble = 0;
  std::map<std::string, CLI::Option*> opts;

  bool given(const std::string& name) const {
    auto it = opts.find(name);
    return it != opts.end() && it->second->count() > 0;
  }
};

const std::set<std::string> kConfigKeys = {
    "eta",  "epsilon", "nbar", "alpha", "gain",    "phi_deg",  "delta_tilde", "bandwidth", "nmax", "dt",
    "tfinal", "ensemble", "seed", "out", "omega", "delta_l", "gamma",      "chi",       "nu_t"};

std::ofstream open_output(const RunConfig& rc, const std::string& name) {
  std::error_code ec;
  std::filesystem::create_directories(rc.out_dir, ec);
  const std::filesystem::path path = std::filesystem::path(rc.out_dir) / name;
  std::ofstream f(path);
  if (!f) throw ConfigError("cannot write " + path.string());
  return f;
}

RunConfig resolve(const std::string& sub, const Flags& fl) {
  RunConfig rc;
  rc.subcommand = sub;
  rc.feedback.gain = 1.984;
  rc.feedback.phase = -kPi / 2.0;

  double eta = 0.1, eps = 0.01, nbar = 15.0, alpha = 0.4;
  KeyValueConfig cfg;
  if (!fl.config.empty()) {
    cfg = KeyValueConfig::load(fl.config);
    for (const auto& [k, v] : cfg.values()) {
      if (!kConfigKeys.count(k)) throw ConfigError("unknown config key '" + k + "'");
    }
  }
  auto num = [&](const char* key, double& target) {
    if (auto v = cfg.get_double(key)) target = *v;
  };
  num("eta", eta);
  num("epsilon", eps);
  num("nbar", nbar);
  num("alpha", alpha);
  double phi_deg = -90.0;
  num("gain", rc.feedback.gain);
  num("phi_deg", phi_deg);
  num("delta_tilde", rc.feedback.delta_tilde);
  num("bandwidth", rc.feedback.bandwidth);
  double nmax = 0, ensemble = 0, seed = static_cast<double>(rc.seed);
  num("nmax", nmax);
  num("dt", rc.dt);
  num("tfinal", rc.t_final);
  num("ensemble", ensemble);
  if (cfg.contains("seed")) {
    try {
      rc.seed = std::stoull(*cfg.get_string("seed"));
    } catch (const std::exception&) {
      throw ConfigError("seed must be an unsigned integer");
    }
  }
  (void)seed;
  if (auto v = cfg.get_string("out")) rc.out_dir = *v;

  if (fl.given("--eta")) eta = fl.eta;
  if (fl.given("--epsilon")) eps = fl.epsilon;
  if (fl.given("--nbar")) nbar = fl.nbar;
  if (fl.given("--alpha")) alpha = fl.alpha;
  if (fl.given("--gain")) rc.feedback.gain = fl.gain;
  if (fl.given("--phi-deg")) phi_deg = fl.phi_deg;
  if (fl.given("--delta-tilde")) rc.feedback.delta_tilde = fl.delta_tilde;
  if (fl.given("--bandwidth")) rc.feedback.bandwidth = fl.bandwidth;
  if (fl.given("--nmax")) nmax = fl.nmax;
  if (fl.given("--dt")) rc.dt = fl.dt;
  if (fl.given("--tfinal")) rc.t_final = fl.tfinal;
  if (fl.given("--ensemble")) ensemble = fl.ensemble;
  if (fl.given("--seed")) rc.seed = fl.seed;
  if (fl.given("--out")) rc.out_dir = fl.out;
  rc.feedback.phase = phi_deg * kDeg;
  rc.n_max = static_cast<int>(nmax);
  rc.ensemble = static_cast<int>(ensemble);

  if (has_physical_keys(cfg)) {
    for (const char* f : {"--nbar", "--epsilon", "--alpha"}) {
      if (fl.given(f)) throw ConfigError(std::string(f) + " cannot be combined with physical laser parameters");
    }
    PhysicalParams p = physical_params_from(cfg);
    if (fl.given("--eta")) p.lamb_dicke = eta;
    rc.warnings = validate(p);
    rc.rates = ModelRates::from_derived(derive_rates(p), p);
  } else {
    if (!(eta > 0.0) || !(eps > 0.0 && eps < 1.0) || !(nbar >= 0.0) || !(alpha >= 0.0)) {
      throw ConfigError("need eta > 0, 0 < epsilon < 1, nbar >= 0, alpha >= 0");
    }
    rc.rates = ModelRates::from_collection(eta, eps, nbar, alpha);
  }
  if (rc.n_max < 0 || rc.ensemble < 0 || rc.dt < 0.0 || rc.t_final < 0.0) {
    throw ConfigError("nmax, ensemble, dt and tfinal must be non-negative");
  }
  const Warnings fw = validate(rc.feedback, rc.rates);
  rc.warnings.insert(rc.warnings.end(), fw.begin(), fw.end());
  return rc;
}

int n_max_for(const RunConfig& rc, double n_expected) {
  return rc.n_max > 0 ? rc.n_max : fock::default_n_max(n_expected);
}

// ---------------------------------------------------------------------------

int cmd_steady(const RunConfig& rc, bool with_fock, std::ostream& out) {
  const DriftDiffusion dd = build_drift_diffusion(rc.rates, rc.feedback);
  const GaussianMomentState s = steady_state_moments(dd);
  const double n = phonon_number(s);
  auto f = open_output(rc, "steady.csv");
  std::vector<std::string> header = {"gain", "phi_deg", "delta_tilde", "n_ss", "zz", "pp", "zp", "r_sigma"};
  std::vector<double> row = {rc.feedback.gain, rc.feedback.phase / kDeg, rc.feedback.delta_tilde, n,
                             s.zz,             s.pp,                     s.zp,                     squeezing_parameter(s)};
  out << "n_ss = " << format_double(n) << '\n';
  if (rc.feedback.delta_tilde == 0.0) {
    const double cf = analytic::nss_variable_phase(rc.rates, rc.feedback.gain, rc.feedback.phase);
    out << "n_ss_closed_form = " << format_double(cf) << '\n';
    header.push_back("n_ss_closed_form");
    row.push_back(cf);
  }
  if (with_fock) {
    const int nm = n_max_for(rc, n);
    const fock::Liouvillian l(fock::MasterEquation::feedback_loop(rc.rates, rc.feedback), nm);
    const double nf = fock::mean_number(fock::steady_state(l));
    out << "n_ss_fock = " << format_double(nf) << " (n_max=" << nm << ")\n";
    header.push_back("n_ss_fock");
    row.push_back(nf);
  }
  out << "N = " << format_double(rc.rates.n_bar) << ", gamma_tilde = " << format_double(rc.rates.gamma_tilde)
      << ", G~ = " << format_double(rc.feedback.loop_gain(rc.rates)) << '\n';
  CsvWriter csv(f, header);
  csv.row(row);
  return 0;
}

int cmd_sweep_gain(const RunConfig& rc, double g_lo, double g_hi, int points, std::ostream& out) {
  if (points < 2 || !(g_hi > g_lo)) throw ConfigError("sweep needs points >= 2 and gmax > gmin");
  auto f = open_output(rc, "sweep_gain.csv");
  const bool closed = rc.feedback.delta_tilde == 0.0;
  std::vector<std::string> header = {"gain", "n_ss"};
  if (closed) header.push_back("n_ss_closed_form");
  CsvWriter csv(f, header);
  double best_g = 0.0, best_n = std::numeric_limits<double>::infinity();
  for (int i = 0; i < points; ++i) {
    const double g = g_lo + (g_hi - g_lo) * i / (points - 1);
    const double n = steady_occupation(rc.rates, rc.feedback, g);
    if (n < best_n) {
      best_n = n;
      best_g = g;
    }
    std::vector<double> row = {g, std::isfinite(n) ? n : std::nan("")};
    if (closed) {
      double cf = std::nan("");
      try {
        cf = analytic::nss_variable_phase(rc.rates, g, rc.feedback.phase);
      } catch (const Error&) {
      }
      row.push_back(cf);
    }
    csv.row(row);
  }
  out << "grid minimum: gain = " << format_double(best_g) << ", n_ss = " << format_double(best_n) << '\n';
  return 0;
}

int cmd_sweep_phase(const RunConfig& rc, int points, std::ostream& out) {
  if (points < 2) throw ConfigError("sweep needs points >= 2");
  auto f = open_output(rc, "sweep_phase.csv");
  CsvWriter csv(f, {"phi_deg", "n_ss", "r_sigma"});
  for (int i = 0; i < points; ++i) {
    const double deg = -180.0 + 360.0 * i / (points - 1);
    FeedbackConfig fb = rc.feedback;
    fb.phase = deg * kDeg;
    const DriftDiffusion dd = build_drift_diffusion(rc.rates, fb);
    double n = std::nan(""), rs = std::nan("");
    if (stability_margin(dd).stable) {
      const GaussianMomentState s = steady_state_moments(dd);
      n = phonon_number(s);
      rs = squeezing_parameter(s);
    }
    csv.row({deg, n, rs});
  }
  out << "wrote " << points << " phase points\n";
  return 0;
}

int cmd_evolve(const RunConfig& rc, bool with_fock, std::ostream& out) {
  const double t_final = rc.t_final > 0.0 ? rc.t_final : 5.0;
  const double step = rc.dt > 0.0 ? rc.dt : 0.05;
  const int points = static_cast<int>(std::llround(t_final / step)) + 1;
  std::vector<double> grid(points);
  for (int i = 0; i < points; ++i) grid[i] = step * i;
  const DriftDiffusion dd = build_drift_diffusion(rc.rates, rc.feedback);
  const auto m = evolve_moments(dd, GaussianMomentState::thermal(rc.rates.n_bar), grid);
  std::vector<std::string> header = {"t", "zz", "pp", "zp", "n"};
  std::vector<GaussianMomentState> fm;
  if (with_fock) {
    const int nm = n_max_for(rc, rc.rates.n_bar);
    const fock::Liouvillian l(fock::MasterEquation::feedback_loop(rc.rates, rc.feedback), nm);
    fock::DensityEvolutionOptions opt;
    opt.integrator = fock::DensityIntegrator::kSdirk2;
    const auto evo = fock::evolve_density_matrix(l, fock::TruncatedDensityMatrix::thermal(nm, rc.rates.n_bar),
                                                 grid, opt);
    const auto obs = fock::MomentObservables::build(nm);
    for (const auto& s : evo.states) fm.push_back(fock::wigner_moments(s, obs));
    for (const auto& w : evo.warnings) out << "warning: " << w << '\n';
    header.insert(header.end(), {"fock_zz", "fock_pp", "fock_zp", "fock_n"});
  }
  auto f = open_output(rc, "evolve.csv");
  CsvWriter csv(f, header);
  for (int i = 0; i < points; ++i) {
    std::vector<double> row = {grid[i], m[i].zz, m[i].pp, m[i].zp, phonon_number(m[i])};
    if (with_fock) row.insert(row.end(), {fm[i].zz, fm[i].pp, fm[i].zp, phonon_number(fm[i])});
    csv.row(row);
  }
  out << "n(t_final) = " << format_double(phonon_number(m.back())) << '\n';
  return 0;
}

int cmd_trajectory(const RunConfig& rc, const std::string& kind, const std::string& initial, int stride,
                   const std::string& representation, std::ostream& out) {
  TrajectoryConfig cfg;
  if (kind == "jump") {
    cfg.kind = Unravelling::kJump;
  } else if (kind == "diffusive") {
    cfg.kind = Unravelling::kDiffusive;
    cfg.recoil = fock::RecoilTerm::kLinearized;
  } else if (kind == "feedback") {
    cfg.kind = Unravelling::kFeedback;
    cfg.recoil = fock::RecoilTerm::kNone;
  } else {
    throw ConfigError("--kind must be jump, diffusive or feedback");
  }
  cfg.representation = representation == "density" ? StateRepresentation::kDensityMatrix
                                                    : StateRepresentation::kWavefunction;
  cfg.t_final = rc.t_final > 0.0 ? rc.t_final : 4.0;
  const double gt = cfg.kind == Unravelling::kFeedback ? std::abs(rc.feedback.loop_gain(rc.rates)) : 0.0;
  const double limit = 0.05 / std::max({1.0, rc.rates.gamma_tilde, gt});
  const double dt_req = rc.dt > 0.0 ? rc.dt : 0.5 * limit;
  cfg.dt = cfg.t_final / std::ceil(cfg.t_final / dt_req - 1e-9);
  cfg.record_stride = std::max(1, stride);
  cfg.ensemble_size = rc.ensemble > 0 ? rc.ensemble : 100;
  cfg.seed = rc.seed;

  const int nm = n_max_for(rc, rc.rates.n_bar);
  fock::TruncatedDensityMatrix rho0;
  if (initial == "thermal") {
    rho0 = fock::TruncatedDensityMatrix::thermal(nm, rc.rates.n_bar);
  } else if (initial == "vacuum") {
    rho0 = fock::TruncatedDensityMatrix::fock_state(nm, 0);
  } else if (initial == "coherent") {
    rho0 = fock::TruncatedDensityMatrix::coherent(nm, 2.0);
  } else {
    throw ConfigError("--initial must be thermal, vacuum or coherent");
  }
  const FeedbackConfig fb = rc.feedback;
  const auto recs = run_ensemble(InitialState(rho0), rc.rates, fb, cfg);
  {
    auto f = open_output(rc, "trajectory_0.csv");
    write_trajectory_csv(f, recs.front());
  }
  if (recs.size() >= 2) {
    auto f = open_output(rc, "ensemble.csv");
    write_ensemble_csv(f, ensemble_statistics(recs));
  }
  {
    auto f = open_output(rc, "trajectory_seeds.txt");
    write_seed_sidecar(f, cfg, recs.size());
  }
  out << "ran " << recs.size() << " " << kind << " trajectories, dt = " << format_double(cfg.dt)
      << ", n_max = " << nm << '\n';
  return 0;
}

int cmd_optimize(const RunConfig& rc, double d_lo, double d_hi, int points, std::ostream& out) {
  const double g_hi = std::max(1.0, 4.0 * analytic::optimal_gain_cold_damping(rc.rates).gain);
  const GainOptimum g = minimize_over_gain(rc.rates, rc.feedback, 0.0, g_hi);
  out << "gain optimum at phi = " << format_double(rc.feedback.phase / kDeg)
      << " deg, delta~ = " << format_double(rc.feedback.delta_tilde) << ": G* = " << format_double(g.gain)
      << ", n_min = " << format_double(g.n_min) << '\n';
  if (points < 1 || !(d_lo > 0.0) || !(d_hi >= d_lo)) throw ConfigError("need 0 < dmin <= dmax and points >= 1");
  std::vector<double> grid;
  for (int i = 0; i < points; ++i) {
    grid.push_back(points == 1 ? d_lo : d_lo * std::pow(d_hi / d_lo, static_cast<double>(i) / (points - 1)));
  }
  const auto curve = optimal_phase_vs_detuning(rc.rates, grid);
  auto f = open_output(rc, "optimal_phase.csv");
  CsvWriter csv(f, {"delta_tilde", "phi_opt_deg", "g_opt", "n_min", "r_sigma"});
  for (const auto& p : curve) csv.row({p.delta_tilde, p.phase / kDeg, p.gain, p.n_min, p.r_sigma});
  out << "wrote " << curve.size() << " optimal-phase points\n";
  return 0;
}

int cmd_validate(const RunConfig& rc, const std::vector<int>& only, std::ostream& out) {
  ValidationOptions vo;
  vo.seed = rc.seed;
  vo.only = only;
  const auto results = run_validation(vo, &out);
  const bool ok = all_passed(results);
  out << (ok ? "all checks passed" : "validation FAILED") << '\n';
  auto f = open_output(rc, "validation_report.txt");
  print_report(f, results);
  return ok ? 0 : 1;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Feedback cooling of a trapped ion in front of a mirror"};
  app.require_subcommand(1);
  app.fallthrough();
  Flags fl;
  fl.opts["--config"] = app.add_option("--config", fl.config, "key=value parameter file");
  fl.opts["--out"] = app.add_option("--out", fl.out, "output directory");
  fl.opts["--seed"] = app.add_option("--seed", fl.seed, "64-bit RNG seed");
  fl.opts["--eta"] = app.add_option("--eta", fl.eta, "Lamb-Dicke parameter");
  fl.opts["--epsilon"] = app.add_option("--epsilon", fl.epsilon, "mirror solid-angle fraction");
  fl.opts["--nbar"] = app.add_option("--nbar", fl.nbar, "laser-cooling occupation N");
  fl.opts["--alpha"] = app.add_option("--alpha", fl.alpha, "dipole emission parameter");
  fl.opts["--gain"] = app.add_option("--gain,--g", fl.gain, "feedback gain G");
  fl.opts["--phi-deg"] = app.add_option("--phi-deg", fl.phi_deg, "feedback phase in degrees");
  fl.opts["--delta-tilde"] = app.add_option("--delta-tilde", fl.delta_tilde, "detuning / Gamma_eff");
  fl.opts["--bandwidth"] = app.add_option("--bandwidth", fl.bandwidth, "filter bandwidth / Gamma_eff");
  fl.opts["--nmax"] = app.add_option("--nmax", fl.nmax, "Fock cutoff");
  fl.opts["--dt"] = app.add_option("--dt", fl.dt, "time step");
  fl.opts["--tfinal"] = app.add_option("--tfinal", fl.tfinal, "final time");
  fl.opts["--ensemble"] = app.add_option("--ensemble", fl.ensemble, "number of trajectories");

  bool steady_fock = false, evolve_fock = false;
  auto* steady = app.add_subcommand("steady", "steady-state occupation");
  steady->add_flag("--fock", steady_fock, "also solve the truncated Fock master equation");

  double gmin = 0.0, gmax = 6.0;
  int gpoints = 121;
  auto* sweep_gain = app.add_subcommand("sweep-gain", "steady state over a gain grid");
  sweep_gain->add_option("--gmin", gmin);
  sweep_gain->add_option("--gmax", gmax);
  sweep_gain->add_option("--points", gpoints);

  int ppoints = 181;
  auto* sweep_phase = app.add_subcommand("sweep-phase", "steady state over the feedback phase");
  sweep_phase->add_option("--points", ppoints);

  auto* evolve = app.add_subcommand("evolve", "moment (and Fock) time evolution from a thermal state");
  evolve->add_flag("--fock", evolve_fock, "also integrate the Fock master equation");

  std::string kind = "feedback", initial = "thermal", representation = "wavefunction";
  int stride = 20;
  auto* traj = app.add_subcommand("trajectory", "conditional trajectory ensembles");
  traj->add_option("--kind", kind, "jump | diffusive | feedback");
  traj->add_option("--initial", initial, "thermal | vacuum | coherent");
  traj->add_option("--stride", stride, "record every k steps");
  traj->add_option("--representation", representation, "wavefunction | density");

  double dmin = 0.1, dmax = 10.0;
  int dpoints = 21;
  auto* optimize = app.add_subcommand("optimize", "optimal gain and optimal phase versus detuning");
  optimize->add_option("--dmin", dmin);
  optimize->add_option("--dmax", dmax);
  optimize->add_option("--points", dpoints);

  std::vector<int> only;
  auto* validate_cmd = app.add_subcommand("validate", "run the cross-check suite");
  validate_cmd->add_option("--only", only, "criterion ids")->delimiter(',');

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      out << app.help();
      return 0;
    }
    err << "error: " << e.what() << '\n';
    return 2;
  }

  const std::string sub = app.get_subcommands().front()->get_name();
  try {
    const RunConfig rc = resolve(sub, fl);
    for (const auto& w : rc.warnings) err << "warning: " << w << '\n';
    if (sub == "steady") return cmd_steady(rc, steady_fock, out);
    if (sub == "sweep-gain") return cmd_sweep_gain(rc, gmin, gmax, gpoints, out);
    if (sub == "sweep-phase") return cmd_sweep_phase(rc, ppoints, out);
    if (sub == "evolve") return cmd_evolve(rc, evolve_fock, out);
    if (sub == "trajectory") return cmd_trajectory(rc, kind, initial, stride, representation, out);
    if (sub == "optimize") return cmd_optimize(rc, dmin, dmax, dpoints, out);
    if (sub == "validate") return cmd_validate(rc, only, out);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return 2;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    switch (e.kind()) {
      case ErrorKind::kConfig:
      case ErrorKind::kInvalidParameter:
      case ErrorKind::kBlueDetuning:
      case ErrorKind::kHeatingDominates:
      case ErrorKind::kStepTooLarge:
        return 2;
      default:
        return 1;
    }
  }
  return 2;
}

}  // namespace ionfb::cli
