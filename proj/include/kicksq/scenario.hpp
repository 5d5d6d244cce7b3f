#pragma once

// Orchestration behind the command-line tool: presets, one full run, CSV and
// summary output.

#include <algorithm>
#include <fstream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "kicksq/config.hpp"
#include "kicksq/ensemble.hpp"
#include "kicksq/errors.hpp"
#include "kicksq/moments.hpp"
#include "kicksq/pulse.hpp"

namespace kicksq {

inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 1;
inline constexpr int kExitNumerical = 2;

// A run configuration plus, for presets, the physical hardware the preset's
// theta stands for. The hardware only feeds the regime report.
struct Scenario {
  std::string name;
  RunConfig config;
  std::optional<PhysicalKick> reference_hardware;
};

/// Membrane-in-the-middle hardware: L = 0.1 mm, kappa = 1e8 1/s,
/// lambda = 1550 nm, 0.1 ns pulses at 1 W, m = 0.25e-11 kg, R = 0.2.
inline PhysicalKick reference_hardware(double tau) {
  PhysicalKick pk;
  pk.pulse = {PulseShape::rectangular, 1e-10, 1.0, tau};
  pk.cavity = {1e-4, 1e8, 0.0, 1550e-9};
  pk.membrane = {0.25e-11, 0.2};
  return pk;
}

inline std::vector<std::string> preset_names() { return {"fig1", "fig2", "fig3"}; }

inline Scenario preset(const std::string& name) {
  Scenario s;
  s.name = name;
  RunConfig& c = s.config;
  c.mechanical = {5e5, 1e2, 10.0};
  c.kick = DirectKick{10.0};
  c.schedule.tau = 1e-7;
  c.schedule.n_kicks = 1000000;
  c.schedule.stride = 100;
  c.schedule.intra_samples = 101;
  c.output = name + ".csv";
  if (name == "fig1") {
    // defaults above
  } else if (name == "fig2") {
    c.mechanical.n_bar = 200.0;
  } else if (name == "fig3") {
    c.schedule.intra_samples = 0;
    c.ensemble.enabled = true;
    c.ensemble.mean_theta = 10.0;
    c.ensemble.variance = 0.001;
    c.ensemble.trajectories = 100;
    c.ensemble.base_seed = 1;
  } else {
    throw InvalidArgument("unknown scenario '" + name + "' (expected fig1, fig2 or fig3)");
  }
  s.reference_hardware = reference_hardware(c.schedule.tau);
  return s;
}

struct RunSummary {
  std::string name;
  double theta = 0.0;
  std::optional<KickDerivation> derivation;  // physical kick source or preset hardware
  bool derivation_is_reference = false;
  double spectral_radius = 0.0;
  bool steady_unphysical = false;
  std::optional<MomentVector> steady;
  std::optional<StateMetrics> steady_metrics;
  StrobeSample final_sample;
  StateMetrics final_metrics;
  std::optional<EnsemblePoint> ensemble_final;
  std::size_t trajectories = 0;
  RegimeReport regime;
};

namespace detail {

inline void write_metric_columns(std::ostream& out, const MomentVector& v,
                                 const StateMetrics& m) {
  out << format_double(v.sigma_q) << ',' << format_double(v.sigma_qp) << ','
      << format_double(v.sigma_p) << ',' << format_double(m.sigma_min) << ','
      << format_double(m.squeezing_db) << ',' << format_double(m.phi_min) << ','
      << format_double(m.purity) << ',' << format_double(m.entropy) << ','
      << format_double(m.n_eff);
}

inline constexpr const char* kMetricHeader =
    "sigma_q,sigma_qp,sigma_p,sigma_min,squeezing_db,phi_min_rad,purity,entropy_nats,n_eff";

inline void write_mean_std(std::ostream& out, const MeanStd& x) {
  out << ',' << format_double(x.mean) << ',' << format_double(x.std);
}

}  // namespace detail

inline constexpr const char* kCsvHeader =
    "kick_index,time_s,sigma_q,sigma_qp,sigma_p,sigma_min,squeezing_db,phi_min_rad,"
    "purity,entropy_nats,n_eff";

inline constexpr const char* kEnsembleCsvExtra =
    ",squeezing_db_of_mean_sigma_min"
    ",mean_sigma_q,std_sigma_q,mean_sigma_qp,std_sigma_qp,mean_sigma_p,std_sigma_p"
    ",mean_sigma_min,std_sigma_min,mean_squeezing_db,std_squeezing_db"
    ",mean_phi_min_rad,std_phi_min_rad,mean_purity,std_purity"
    ",mean_entropy_nats,std_entropy_nats,mean_n_eff,std_n_eff";

inline double kick_theta(const RunConfig& cfg, std::optional<KickDerivation>& derivation) {
  if (const auto* d = std::get_if<DirectKick>(&cfg.kick)) return d->theta;
  const auto& pk = std::get<PhysicalKick>(cfg.kick);
  PulseSpec pulse = pk.pulse;
  pulse.period = cfg.schedule.tau;
  derivation = derive_kick(pulse, pk.cavity, pk.membrane, cfg.mechanical.omega_m);
  return derivation->theta;
}

/// Runs one configuration, writing the trajectory CSV to `csv` and the
/// intra-period trace (deterministic runs with intra_samples >= 2) to
/// `intra`. Throws NumericalFailure on divergence.
inline RunSummary execute(const Scenario& scenario, std::ostream& csv, std::ostream* intra) {
  const RunConfig& cfg = scenario.config;
  RunSummary s;
  s.name = scenario.name;
  s.theta = kick_theta(cfg, s.derivation);
  const double tau = cfg.schedule.tau;

  const CycleMap cycle = cycle_map(cfg.mechanical, tau, s.theta);
  s.spectral_radius = cycle.spectral_radius;
  if (cycle.spectral_radius < 1.0) {
    const MomentVector ss = steady_state(cycle);
    try {
      s.steady_metrics = state_metrics(ss);
      s.steady = ss;
    } catch (const InvalidArgument&) {
      s.steady_unphysical = true;
    }
  }

  double max_sigma_q = 0.0;
  csv << kCsvHeader;
  if (cfg.ensemble.enabled) {
    const KickNoiseModel noise{cfg.ensemble.mean_theta.value_or(s.theta), cfg.ensemble.variance};
    const EnsembleStats stats =
        run_ensemble(cfg.mechanical, tau, noise, cfg.schedule.n_kicks, cfg.schedule.stride,
                     static_cast<std::size_t>(cfg.ensemble.trajectories),
                     cfg.ensemble.base_seed);
    csv << kEnsembleCsvExtra << '\n';
    for (std::size_t k = 0; k < stats.points.size(); ++k) {
      const TrajectorySample& t = stats.first.samples[k];
      const EnsemblePoint& p = stats.points[k];
      csv << t.kick_index << ',' << format_double(static_cast<double>(t.kick_index) * tau) << ',';
      detail::write_metric_columns(csv, t.state, t.metrics);
      csv << ',' << format_double(p.squeezing_db_of_mean);
      for (const MeanStd* m : {&p.sigma_q, &p.sigma_qp, &p.sigma_p, &p.sigma_min,
                               &p.squeezing_db, &p.phi_min, &p.purity, &p.entropy, &p.n_eff}) {
        detail::write_mean_std(csv, *m);
      }
      csv << '\n';
      max_sigma_q = std::max(max_sigma_q, t.state.sigma_q);
    }
    const TrajectorySample& last = stats.first.samples.back();
    s.final_sample = {last.kick_index, last.state};
    s.final_metrics = last.metrics;
    s.ensemble_final = stats.points.back();
    s.trajectories = stats.trajectories;
  } else {
    csv << '\n';
    const MomentVector v0 = thermal_state(cfg.mechanical);
    const auto samples = stroboscopic_evolve(v0, cycle, cfg.schedule.n_kicks, cfg.schedule.stride);
    for (const StrobeSample& smp : samples) {
      const StateMetrics m = checked_metrics(smp.state, smp.kick_index);
      csv << smp.kick_index << ','
          << format_double(static_cast<double>(smp.kick_index) * tau) << ',';
      detail::write_metric_columns(csv, smp.state, m);
      csv << '\n';
      max_sigma_q = std::max(max_sigma_q, smp.state.sigma_q);
    }
    s.final_sample = samples.back();
    s.final_metrics = checked_metrics(s.final_sample.state, s.final_sample.kick_index);
    if (intra && cfg.schedule.intra_samples >= 2) {
      *intra << "offset_s," << detail::kMetricHeader << '\n';
      for (const TraceSample& t : intra_period_trace(
               s.final_sample.state, cycle, static_cast<std::size_t>(cfg.schedule.intra_samples))) {
        *intra << format_double(t.offset) << ',';
        detail::write_metric_columns(*intra, t.state,
                                     checked_metrics(t.state, s.final_sample.kick_index));
        *intra << '\n';
      }
    }
  }

  // Regime report, against the configured hardware or the preset's reference.
  std::optional<PhysicalKick> hardware;
  if (const auto* pk = std::get_if<PhysicalKick>(&cfg.kick)) hardware = *pk;
  if (!hardware && scenario.reference_hardware) {
    hardware = scenario.reference_hardware;
    PulseSpec pulse = hardware->pulse;
    pulse.period = tau;
    s.derivation = derive_kick(pulse, hardware->cavity, hardware->membrane,
                               cfg.mechanical.omega_m);
    s.derivation_is_reference = true;
  }
  BathParams bath;
  bath.temperature = cfg.bath.temperature.value_or(
      temperature_for_occupancy(cfg.mechanical.n_bar, cfg.mechanical.omega_m));
  if (cfg.bath.cutoff) {
    bath.cutoff = *cfg.bath.cutoff;
  } else if (hardware) {
    bath.cutoff = 100.0 * hardware->cavity.kappa();
  }
  if (s.steady) max_sigma_q = std::max(max_sigma_q, s.steady->sigma_q);
  if (hardware) {
    PulseSpec pulse = hardware->pulse;
    pulse.period = tau;
    s.regime = regime_check(pulse, hardware->cavity, cfg.mechanical, bath, s.derivation->g2,
                            max_sigma_q);
  } else {
    s.regime.checks = markov_checks(tau, bath);
  }
  return s;
}

inline std::string format_summary(const RunSummary& s) {
  std::ostringstream out;
  auto line = [&](const std::string& key, double x) {
    out << key << " = " << format_double(x) << '\n';
  };
  out << "scenario = " << s.name << '\n';
  line("theta", s.theta);
  line("spectral_radius", s.spectral_radius);
  if (s.steady) {
    line("steady.sigma_q", s.steady->sigma_q);
    line("steady.sigma_qp", s.steady->sigma_qp);
    line("steady.sigma_p", s.steady->sigma_p);
    const StateMetrics& m = *s.steady_metrics;
    line("steady.sigma_min", m.sigma_min);
    line("steady.squeezing_db", m.squeezing_db);
    line("steady.phi_min_rad", m.phi_min);
    line("steady.purity", m.purity);
    line("steady.entropy_nats", m.entropy);
    line("steady.n_eff", m.n_eff);
  } else if (s.steady_unphysical) {
    out << "steady = none (fixed point violates the uncertainty bound)\n";
  } else {
    out << "steady = none (spectral radius >= 1)\n";
  }
  out << "final.kick_index = " << s.final_sample.kick_index << '\n';
  line("final.squeezing_db", s.final_metrics.squeezing_db);
  line("final.purity", s.final_metrics.purity);
  if (s.ensemble_final) {
    out << "ensemble.trajectories = " << s.trajectories << '\n';
    line("ensemble.final.squeezing_db_of_mean_sigma_min", s.ensemble_final->squeezing_db_of_mean);
    line("ensemble.final.mean_squeezing_db", s.ensemble_final->squeezing_db.mean);
    line("ensemble.final.std_squeezing_db", s.ensemble_final->squeezing_db.std);
    line("ensemble.final.mean_purity", s.ensemble_final->purity.mean);
    line("ensemble.final.std_purity", s.ensemble_final->purity.std);
  }
  if (s.derivation) {
    const std::string prefix = s.derivation_is_reference ? "reference_hardware." : "derived.";
    line(prefix + "g2", s.derivation->g2);
    line(prefix + "peak_photons", s.derivation->peak_photons);
    line(prefix + "theta", s.derivation->theta);
  }
  for (const RegimeCheck& c : s.regime.checks) {
    out << "regime[" << c.name << "] = " << format_double(c.ratio) << ' ' << to_string(c.verdict)
        << (c.hard ? " (hard)" : " (soft)") << '\n';
  }
  out << "regime.hard_ok = " << (s.regime.hard_ok() ? "true" : "false") << '\n';
  return out.str();
}

// Command-line overrides applied on top of a preset or config file.
struct RunOptions {
  std::optional<std::string> scenario;
  std::optional<std::string> config_path;
  std::optional<std::string> out;
  std::optional<std::uint64_t> seed;
  std::optional<std::uint64_t> trajectories;
  std::optional<std::uint64_t> kicks;
  std::optional<std::uint64_t> stride;
  bool quiet = false;
};

inline std::string summary_path(const std::string& csv_path) { return csv_path + ".summary.txt"; }
inline std::string intra_path(const std::string& csv_path) { return csv_path + ".intra.csv"; }

/// Loads the scenario, runs it and writes `<out>`, `<out>.summary.txt` and,
/// when enabled, `<out>.intra.csv`. Returns the process exit code: 0 success,
/// 1 validation or I/O error, 2 numerical failure.
inline int run_scenario(const RunOptions& opts, std::ostream& log, std::ostream& err) {
  Scenario scenario;
  try {
    if (opts.scenario.has_value() == opts.config_path.has_value()) {
      err << "error: give exactly one of --scenario or --config\n";
      return kExitValidation;
    }
    if (opts.scenario) {
      scenario = preset(*opts.scenario);
    } else {
      std::ifstream in(*opts.config_path);
      if (!in) {
        err << "error: cannot read config '" << *opts.config_path << "'\n";
        return kExitValidation;
      }
      std::stringstream text;
      text << in.rdbuf();
      scenario.name = *opts.config_path;
      scenario.config = parse_config(text.str());
    }
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const InvalidArgument& e) {
    err << "error: " << e.what() << '\n';
    return kExitValidation;
  }

  RunConfig& cfg = scenario.config;
  if (opts.out) cfg.output = *opts.out;
  if (opts.seed) cfg.ensemble.base_seed = *opts.seed;
  if (opts.trajectories) cfg.ensemble.trajectories = *opts.trajectories;
  if (opts.kicks) cfg.schedule.n_kicks = *opts.kicks;
  if (opts.stride) cfg.schedule.stride = *opts.stride;
  if (cfg.output.empty()) cfg.output = "kicksq.csv";
  if (cfg.schedule.stride < 1 || cfg.ensemble.trajectories < 1) {
    err << "error: stride and trajectories must be >= 1\n";
    return kExitValidation;
  }

  std::ofstream csv(cfg.output, std::ios::binary | std::ios::trunc);
  std::ofstream summary(summary_path(cfg.output), std::ios::binary | std::ios::trunc);
  if (!csv || !summary) {
    err << "error: cannot write output '" << cfg.output << "'\n";
    return kExitValidation;
  }
  std::ofstream intra;
  const bool want_intra = !cfg.ensemble.enabled && cfg.schedule.intra_samples >= 2;
  if (want_intra) {
    intra.open(intra_path(cfg.output), std::ios::binary | std::ios::trunc);
    if (!intra) {
      err << "error: cannot write output '" << intra_path(cfg.output) << "'\n";
      return kExitValidation;
    }
  }

  try {
    const RunSummary s = execute(scenario, csv, want_intra ? &intra : nullptr);
    const std::string text = format_summary(s);
    summary << text;
    csv.flush();
    summary.flush();
    if (!csv || !summary) {
      err << "error: failed writing output '" << cfg.output << "'\n";
      return kExitValidation;
    }
    if (!opts.quiet) log << text;
  } catch (const NumericalFailure& e) {
    err << "numerical failure: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const NoStationaryState& e) {
    err << "numerical failure: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const InvalidArgument& e) {
    err << "error: " << e.what() << '\n';
    return kExitValidation;
  }
  return kExitOk;
}

}  // namespace kicksq
