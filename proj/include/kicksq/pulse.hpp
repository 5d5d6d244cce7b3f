#pragma once

// Physical inputs to the kick model: quadratic coupling, cavity drive and
// intracavity photon number for a pulsed laser, the resulting kick strength,
// and the regime inequalities under which an impulsive kick is a good model.

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include "kicksq/errors.hpp"
#include "kicksq/moments.hpp"

namespace kicksq {

namespace constants {
inline constexpr double c = 299792458.0;          // m/s (exact)
inline constexpr double hbar = 1.054571817e-34;   // J s (exact)
inline constexpr double k_B = 1.380649e-23;       // J/K (exact)
}  // namespace constants

struct CavityParams {
  double length = 0.0;      // m
  double kappa_0 = 0.0;     // input-mirror decay rate, 1/s
  double kappa_loss = 0.0;  // other losses, 1/s
  double wavelength = 0.0;  // drive wavelength, m

  double kappa() const { return kappa_0 + kappa_loss; }
  double omega_c() const { return 2.0 * std::numbers::pi * constants::c / wavelength; }

  void validate() const {
    auto positive = [](double x) { return std::isfinite(x) && x > 0.0; };
    if (!positive(length)) throw InvalidArgument("cavity length must be > 0");
    if (!positive(kappa_0)) throw InvalidArgument("kappa_0 must be > 0");
    if (!std::isfinite(kappa_loss) || kappa_loss < 0.0) {
      throw InvalidArgument("kappa_loss must be >= 0");
    }
    if (!positive(wavelength)) throw InvalidArgument("wavelength must be > 0");
  }

  bool operator==(const CavityParams&) const = default;
};

struct MembraneParams {
  double mass = 0.0;          // kg
  double reflectivity = 0.0;  // power reflectivity R in [0, 1)

  void validate() const {
    if (!std::isfinite(mass) || mass <= 0.0) throw InvalidArgument("membrane mass must be > 0");
    if (!std::isfinite(reflectivity) || reflectivity < 0.0 || reflectivity >= 1.0) {
      throw InvalidArgument("membrane reflectivity must be in [0, 1)");
    }
  }

  bool operator==(const MembraneParams&) const = default;
};

enum class PulseShape { rectangular, gaussian };

inline const char* to_string(PulseShape s) {
  return s == PulseShape::rectangular ? "rectangular" : "gaussian";
}

struct PulseSpec {
  PulseShape shape = PulseShape::rectangular;
  double duration = 0.0;    // tau_p, s (full width for rectangular, FWHM for gaussian)
  double peak_power = 0.0;  // W
  double period = 0.0;      // tau, s

  // Gaussian pulses are centred this many durations after the period start
  // so the envelope is negligible at t = 0, where the cavity is empty.
  static constexpr double kGaussianCentre = 3.0;

  void validate() const {
    if (!std::isfinite(duration) || duration <= 0.0) throw InvalidArgument("pulse duration must be > 0");
    if (!std::isfinite(period) || period <= duration) {
      throw InvalidArgument("pulse period must exceed the pulse duration");
    }
    if (!std::isfinite(peak_power) || peak_power < 0.0) {
      throw InvalidArgument("pulse peak power must be >= 0");
    }
  }

  double power(double t) const {
    switch (shape) {
      case PulseShape::rectangular:
        return (t >= 0.0 && t < duration) ? peak_power : 0.0;
      case PulseShape::gaussian: {
        const double x = (t - kGaussianCentre * duration) / duration;
        return peak_power * std::exp(-4.0 * std::numbers::ln2 * x * x);
      }
    }
    return 0.0;
  }

  bool operator==(const PulseSpec&) const = default;
};

/// Quadratic optomechanical coupling g2 (1/s) for a membrane of mass m and
/// reflectivity R at a node of the cavity field:
///   g2 = 16 pi^2 c hbar / (lambda^2 L m omega_m) * sqrt(R / (1 - R)).
inline double coupling_g2(const CavityParams& cavity, const MembraneParams& membrane,
                          double omega_m) {
  if (!(membrane.reflectivity < 1.0)) {
    throw InvalidArgument("coupling_g2: reflectivity must be < 1");
  }
  cavity.validate();
  membrane.validate();
  if (!std::isfinite(omega_m) || omega_m <= 0.0) throw InvalidArgument("omega_m must be > 0");
  const double pi2 = std::numbers::pi * std::numbers::pi;
  const double lambda = cavity.wavelength;
  const double prefactor = 16.0 * pi2 * constants::c * constants::hbar /
                           (lambda * lambda * cavity.length * membrane.mass * omega_m);
  const double r = membrane.reflectivity;
  return prefactor * std::sqrt(r / (1.0 - r));
}

/// Cavity drive E0(t) = sqrt(2 P0(t) kappa_0 / (hbar omega_c)), in s^-1/2.
inline double drive_amplitude(const PulseSpec& pulse, const CavityParams& cavity, double t) {
  const double p = pulse.power(t);
  if (p <= 0.0) return 0.0;
  return std::sqrt(2.0 * p * cavity.kappa_0 / (constants::hbar * cavity.omega_c()));
}

// Uniform time grid starting at t = 0.
struct TimeGrid {
  double step = 0.0;
  std::size_t count = 0;

  double at(std::size_t i) const { return static_cast<double>(i) * step; }
};

struct PhotonTrace {
  double step = 0.0;
  std::vector<double> photons;  // |alpha(t_i)|^2 at t_i = i * step
};

inline double max_grid_step(const PulseSpec& pulse, const CavityParams& cavity) {
  return std::min(pulse.duration, 1.0 / cavity.kappa()) / 50.0;
}

/// Default resolution: 1/2000 of the shorter of tau_p and 1/kappa, covering
/// one full period.
inline TimeGrid default_grid(const PulseSpec& pulse, const CavityParams& cavity) {
  const double step = std::min(pulse.duration, 1.0 / cavity.kappa()) / 2000.0;
  return {step, static_cast<std::size_t>(std::floor(pulse.period / step)) + 1};
}

/// |alpha(t)|^2 on the grid, from alpha' = -kappa alpha + E0(t), alpha(0) = 0.
///
/// Classical RK4. Steps that straddle a rectangular pulse edge are split at
/// the edge so the drive is smooth on every sub-step.
inline PhotonTrace intracavity_amplitude(const PulseSpec& pulse, const CavityParams& cavity,
                                         const TimeGrid& grid) {
  pulse.validate();
  cavity.validate();
  if (!(grid.step > 0.0) || grid.count < 2) {
    throw InvalidArgument("intracavity_amplitude: grid needs a positive step and >= 2 points");
  }
  const double limit = max_grid_step(pulse, cavity);
  if (grid.step > limit * (1.0 + 1e-12)) {
    throw InvalidArgument("intracavity_amplitude: grid step " + std::to_string(grid.step) +
                          " s is coarser than min(tau_p, 1/kappa)/50 = " +
                          std::to_string(limit) + " s");
  }
  const double kappa = cavity.kappa();

  // Drive on [a, b]; for rectangular pulses the sub-step never straddles an
  // edge, so the midpoint value is the value on the whole sub-step.
  auto rk4 = [&](double alpha, double a, double b) {
    const double h = b - a;
    double e0 = 0, e_half = 0, e1 = 0;
    if (pulse.shape == PulseShape::rectangular) {
      e0 = e_half = e1 = drive_amplitude(pulse, cavity, 0.5 * (a + b));
    } else {
      e0 = drive_amplitude(pulse, cavity, a);
      e_half = drive_amplitude(pulse, cavity, a + 0.5 * h);
      e1 = drive_amplitude(pulse, cavity, b);
    }
    const double k1 = -kappa * alpha + e0;
    const double k2 = -kappa * (alpha + 0.5 * h * k1) + e_half;
    const double k3 = -kappa * (alpha + 0.5 * h * k2) + e_half;
    const double k4 = -kappa * (alpha + h * k3) + e1;
    return alpha + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  };

  PhotonTrace trace;
  trace.step = grid.step;
  trace.photons.resize(grid.count);
  trace.photons[0] = 0.0;
  double alpha = 0.0;
  const double edge = pulse.duration;
  for (std::size_t i = 1; i < grid.count; ++i) {
    const double a = grid.at(i - 1);
    const double b = grid.at(i);
    if (pulse.shape == PulseShape::rectangular && a < edge && edge < b) {
      alpha = rk4(rk4(alpha, a, edge), edge, b);
    } else {
      alpha = rk4(alpha, a, b);
    }
    trace.photons[i] = alpha * alpha;
  }
  return trace;
}

/// theta = 2 g2 * integral |alpha(t)|^2 dt, trapezoidal rule.
inline double kick_strength(double g2, const PhotonTrace& trace) {
  if (trace.photons.size() < 2) return 0.0;
  double sum = 0.5 * (trace.photons.front() + trace.photons.back());
  for (std::size_t i = 1; i + 1 < trace.photons.size(); ++i) sum += trace.photons[i];
  return 2.0 * g2 * sum * trace.step;
}

struct KickDerivation {
  double g2 = 0.0;
  double peak_photons = 0.0;
  double theta = 0.0;
};

inline KickDerivation derive_kick(const PulseSpec& pulse, const CavityParams& cavity,
                                  const MembraneParams& membrane, double omega_m) {
  KickDerivation d;
  d.g2 = coupling_g2(cavity, membrane, omega_m);
  const PhotonTrace trace = intracavity_amplitude(pulse, cavity, default_grid(pulse, cavity));
  d.peak_photons = *std::max_element(trace.photons.begin(), trace.photons.end());
  d.theta = kick_strength(d.g2, trace);
  return d;
}

// ---- regime checks ---------------------------------------------------------

enum class Verdict { pass, marginal, fail };

inline const char* to_string(Verdict v) {
  switch (v) {
    case Verdict::pass: return "pass";
    case Verdict::marginal: return "marginal";
    case Verdict::fail: return "fail";
  }
  return "?";
}

enum class Relation {
  greater,       // lhs > rhs
  much_greater,  // lhs >> rhs: pass at ratio >= 10, marginal in [3, 10)
  at_least_order  // lhs >~ rhs: pass at ratio >= 1
};

struct RegimeCheck {
  std::string name;
  Relation relation = Relation::greater;
  double ratio = 0.0;  // lhs / rhs
  Verdict verdict = Verdict::fail;
  bool hard = true;  // soft checks are reported but never fatal
};

struct RegimeReport {
  std::vector<RegimeCheck> checks;

  bool hard_ok() const {
    return std::all_of(checks.begin(), checks.end(), [](const RegimeCheck& c) {
      return !c.hard || c.verdict == Verdict::pass;
    });
  }
};

inline Verdict judge(Relation rel, double ratio) {
  // Ratios land exactly on thresholds for round parameters (kappa tau = 10).
  constexpr double slack = 1.0 - 1e-12;
  switch (rel) {
    case Relation::greater:
      return ratio > 1.0 ? Verdict::pass : Verdict::fail;
    case Relation::much_greater:
      if (ratio >= 10.0 * slack) return Verdict::pass;
      if (ratio >= 3.0 * slack) return Verdict::marginal;
      return Verdict::fail;
    case Relation::at_least_order:
      return ratio >= 1.0 * slack ? Verdict::pass : Verdict::fail;
  }
  return Verdict::fail;
}

struct BathParams {
  double cutoff = 0.0;       // Omega_c, rad/s
  double temperature = 0.0;  // K
};

/// Bath temperature whose Bose occupancy at omega_m is n_bar.
inline double temperature_for_occupancy(double n_bar, double omega_m) {
  if (n_bar <= 0.0) return 0.0;
  return constants::hbar * omega_m / (constants::k_B * std::log1p(1.0 / n_bar));
}

inline RegimeCheck make_check(std::string name, Relation rel, double ratio, bool hard) {
  return {std::move(name), rel, ratio, judge(rel, ratio), hard};
}

/// Markov-limit conditions only; these need no cavity or pulse data. The
/// cutoff check is omitted when the cutoff is unknown (<= 0).
inline std::vector<RegimeCheck> markov_checks(double tau, const BathParams& bath) {
  std::vector<RegimeCheck> out;
  if (bath.cutoff > 0.0) {
    out.push_back(make_check("Omega_c tau >~ 1", Relation::at_least_order, bath.cutoff * tau, false));
  }
  out.push_back(make_check("k_B T tau / hbar >~ 1", Relation::at_least_order,
                           constants::k_B * bath.temperature * tau / constants::hbar, false));
  return out;
}

inline RegimeReport regime_check(const PulseSpec& pulse, const CavityParams& cavity,
                                 const MechanicalParams& mech, const BathParams& bath,
                                 double g2, double q2_estimate) {
  pulse.validate();
  cavity.validate();
  mech.validate();
  const double kappa = cavity.kappa();
  RegimeReport r;
  r.checks.push_back(make_check("1/tau_p < c/2L", Relation::greater,
                                (constants::c / (2.0 * cavity.length)) * pulse.duration, true));
  r.checks.push_back(make_check("1/tau_p >> kappa", Relation::much_greater,
                                1.0 / (pulse.duration * kappa), true));
  r.checks.push_back(make_check("kappa >> 1/tau", Relation::much_greater, kappa * pulse.period, true));
  for (auto& c : markov_checks(pulse.period, bath)) r.checks.push_back(std::move(c));
  const double shift = g2 * q2_estimate;
  r.checks.push_back(make_check("kappa >> g2 <q^2>", Relation::much_greater,
                                shift > 0.0 ? kappa / shift : INFINITY, true));
  return r;
}

}  // namespace kicksq
