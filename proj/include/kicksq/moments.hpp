#pragma once

// Second-moment dynamics of a damped mechanical resonator subject to
// periodic position-squeezing kicks.
//
// State is v = (sigma_q, sigma_qp, sigma_p) with sigma_q = <q^2>,
// sigma_qp = <qp + pq>/2, sigma_p = <p^2>, in units where [q, p] = i.
// One period of the stroboscopic map is a kick followed by free damped
// evolution for tau:  v[n + 1] = M(tau) K v[n] + v_inh(tau).
// v[n] is the state immediately before the (n + 1)-th kick.

#include <cmath>
#include <complex>
#include <cstdint>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "kicksq/errors.hpp"
#include "kicksq/expm.hpp"

namespace kicksq {

using Mat3 = Eigen::Matrix3d;
using Vec3 = Eigen::Vector3d;

// Tolerance on the uncertainty relation det >= 1/4.
inline constexpr double kUncertaintyTolerance = 1e-9;
// Tolerance on purity <= 1.
inline constexpr double kPurityTolerance = 1e-9;

struct MechanicalParams {
  double omega_m = 0.0;  // rad/s
  double gamma_m = 0.0;  // 1/s
  double n_bar = 0.0;    // thermal phonon number

  void validate() const {
    if (!std::isfinite(omega_m) || omega_m <= 0.0) {
      throw InvalidArgument("omega_m must be finite and > 0");
    }
    if (!std::isfinite(gamma_m) || gamma_m < 0.0) {
      throw InvalidArgument("gamma_m must be finite and >= 0");
    }
    if (!std::isfinite(n_bar) || n_bar < 0.0) {
      throw InvalidArgument("n_bar must be finite and >= 0");
    }
  }

  bool operator==(const MechanicalParams&) const = default;
};

struct MomentVector {
  double sigma_q = 0.5;
  double sigma_qp = 0.0;
  double sigma_p = 0.5;

  Vec3 vec() const { return {sigma_q, sigma_qp, sigma_p}; }
  static MomentVector from(const Vec3& v) { return {v[0], v[1], v[2]}; }

  // sigma_q sigma_p - sigma_qp^2; the uncertainty relation is det >= 1/4.
  double determinant() const { return sigma_q * sigma_p - sigma_qp * sigma_qp; }

  bool finite() const {
    return std::isfinite(sigma_q) && std::isfinite(sigma_qp) &&
           std::isfinite(sigma_p);
  }

  bool physical(double tol = kUncertaintyTolerance) const {
    return finite() && sigma_q > 0.0 && sigma_p > 0.0 &&
           determinant() >= 0.25 - tol;
  }

  bool operator==(const MomentVector&) const = default;
};

struct DriftModel {
  Mat3 B;
  Vec3 b;
};

// Free evolution over a fixed duration: v(t) = M v(0) + v_inh.
struct Propagator {
  double duration = 0.0;
  Mat3 M = Mat3::Identity();
  Vec3 v_inh = Vec3::Zero();
};

struct KickMap {
  double theta = 0.0;
  Mat3 K = Mat3::Identity();
};

struct CycleMap {
  Mat3 A;        // M(tau) K
  Vec3 v_inh;    // v_inh(tau)
  double tau = 0.0;
  double theta = 0.0;
  DriftModel drift;
  Propagator free;
  KickMap kick;
  double spectral_radius = 0.0;
};

struct StateMetrics {
  double sigma_min = 0.0;
  double phi_min = 0.0;       // rad, in (-pi/2, pi/2]
  double squeezing_db = 0.0;  // 10 log10(2 sigma_min)
  double purity = 1.0;
  double entropy = 0.0;  // nats
  double n_eff = 0.0;
};

struct StrobeSample {
  std::uint64_t kick_index = 0;
  MomentVector state;
};

struct TraceSample {
  double offset = 0.0;  // seconds after the kick
  MomentVector state;
};

inline MomentVector thermal_state(const MechanicalParams& params) {
  params.validate();
  const double s = params.n_bar + 0.5;
  return {s, 0.0, s};
}

inline DriftModel build_drift(const MechanicalParams& params) {
  params.validate();
  const double w = params.omega_m;
  const double g = params.gamma_m;
  DriftModel d;
  d.B << 0.0, 2.0 * w, 0.0,
         -w, -g, w,
         0.0, -2.0 * w, -2.0 * g;
  d.b = Vec3(0.0, 0.0, g * (2.0 * params.n_bar + 1.0));
  return d;
}

// M = exp(B t); v_inh is the top-right column of exp([[B, b], [0, 0]] t),
// i.e. the integral of exp(B s) b over [0, t]. Valid for gamma_m == 0 too.
inline Propagator make_propagator(const DriftModel& drift, double t) {
  if (!std::isfinite(t) || t < 0.0) {
    throw InvalidArgument("make_propagator: duration must be finite and >= 0");
  }
  Eigen::Matrix4d aug = Eigen::Matrix4d::Zero();
  aug.topLeftCorner<3, 3>() = drift.B;
  aug.topRightCorner<3, 1>() = drift.b;
  const Eigen::Matrix4d e = matrix_exponential<4>(aug, t);
  Propagator p;
  p.duration = t;
  p.M = e.topLeftCorner<3, 3>();
  p.v_inh = e.topRightCorner<3, 1>();
  return p;
}

inline MomentVector propagate_free(const MomentVector& v, const Propagator& prop) {
  return MomentVector::from(prop.M * v.vec() + prop.v_inh);
}

inline KickMap kick_map(double theta) {
  if (!std::isfinite(theta)) throw InvalidArgument("kick_map: theta must be finite");
  KickMap k;
  k.theta = theta;
  k.K << 1.0, 0.0, 0.0,
         -2.0 * theta, 1.0, 0.0,
         4.0 * theta * theta, -4.0 * theta, 1.0;
  return k;
}

inline MomentVector apply_kick(const MomentVector& v, const KickMap& k) {
  return MomentVector::from(k.K * v.vec());
}

inline double spectral_radius(const Mat3& a) {
  const Eigen::EigenSolver<Mat3> es(a, /*computeEigenvectors=*/false);
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

// Kick-then-evolve cycle built from an existing free propagator. The
// propagator does not depend on theta, so callers varying theta per kick can
// reuse it.
inline CycleMap cycle_map(const DriftModel& drift, const Propagator& free,
                          double theta) {
  if (!(free.duration > 0.0)) throw InvalidArgument("cycle_map: tau must be > 0");
  CycleMap c;
  c.drift = drift;
  c.free = free;
  c.kick = kick_map(theta);
  c.tau = free.duration;
  c.theta = theta;
  c.A = free.M * c.kick.K;
  c.v_inh = free.v_inh;
  c.spectral_radius = spectral_radius(c.A);
  return c;
}

inline CycleMap cycle_map(const MechanicalParams& params, double tau, double theta) {
  if (!std::isfinite(tau) || tau <= 0.0) {
    throw InvalidArgument("cycle_map: tau must be finite and > 0");
  }
  const DriftModel drift = build_drift(params);
  return cycle_map(drift, make_propagator(drift, tau), theta);
}

namespace detail {

inline Vec3 advance(const Mat3& a, const Vec3& v_inh, const Vec3& v) {
  return a * v + v_inh;
}

inline void require_finite(const Vec3& v, std::uint64_t kick_index) {
  if (!v.allFinite()) {
    throw NumericalFailure("stroboscopic evolution diverged: non-finite moment",
                           kick_index);
  }
}

}  // namespace detail

/// Runs the stroboscopic map for n_kicks periods, calling
/// visit(kick_index, state) for every state v[0..n_kicks].
template <typename Visitor>
void for_each_kick(const MomentVector& v0, const CycleMap& cycle,
                   std::uint64_t n_kicks, Visitor&& visit) {
  Vec3 v = v0.vec();
  visit(std::uint64_t{0}, v0);
  for (std::uint64_t n = 1; n <= n_kicks; ++n) {
    v = detail::advance(cycle.A, cycle.v_inh, v);
    detail::require_finite(v, n);
    visit(n, MomentVector::from(v));
  }
}

/// Records v[0], every sample_stride-th state, and always v[n_kicks].
inline std::vector<StrobeSample> stroboscopic_evolve(const MomentVector& v0,
                                                     const CycleMap& cycle,
                                                     std::uint64_t n_kicks,
                                                     std::uint64_t sample_stride) {
  if (sample_stride < 1) throw InvalidArgument("sample_stride must be >= 1");
  std::vector<StrobeSample> out;
  out.reserve(static_cast<std::size_t>(n_kicks / sample_stride + 2));
  for_each_kick(v0, cycle, n_kicks, [&](std::uint64_t n, const MomentVector& v) {
    if (n % sample_stride == 0 || n == n_kicks) out.push_back({n, v});
  });
  return out;
}

inline Mat3 matrix_power(Mat3 base, std::uint64_t n) {
  Mat3 result = Mat3::Identity();
  while (n > 0) {
    if (n & 1u) result = result * base;
    base = base * base;
    n >>= 1u;
  }
  return result;
}

/// v[n] = A^n v0 + (I - A)^-1 (I - A^n) v_inh, evaluated directly.
inline MomentVector stroboscopic_closed_form(const MomentVector& v0,
                                             const CycleMap& cycle,
                                             std::uint64_t n) {
  const Mat3 an = matrix_power(cycle.A, n);
  const Mat3 id = Mat3::Identity();
  const Vec3 geometric = (id - cycle.A).partialPivLu().solve((id - an) * cycle.v_inh);
  return MomentVector::from(an * v0.vec() + geometric);
}

inline MomentVector steady_state(const CycleMap& cycle) {
  if (!(cycle.spectral_radius < 1.0)) throw NoStationaryState(cycle.spectral_radius);
  const Mat3 id = Mat3::Identity();
  return MomentVector::from((id - cycle.A).partialPivLu().solve(cycle.v_inh));
}

struct IterationResult {
  MomentVector state;
  std::uint64_t kicks = 0;
  bool converged = false;
};

/// Cross-check for steady_state: iterate until the relative change over one
/// period is at most rel_tol, or max_kicks is reached.
inline IterationResult iterate_to_convergence(const MomentVector& v0,
                                              const CycleMap& cycle,
                                              double rel_tol,
                                              std::uint64_t max_kicks) {
  Vec3 v = v0.vec();
  for (std::uint64_t n = 1; n <= max_kicks; ++n) {
    const Vec3 next = detail::advance(cycle.A, cycle.v_inh, v);
    detail::require_finite(next, n);
    const double change = (next - v).norm();
    v = next;
    if (change <= rel_tol * v.norm()) return {MomentVector::from(v), n, true};
  }
  return {MomentVector::from(v), max_kicks, false};
}

/// Samples the state within one period: M(s) K v + v_inh(s) at
/// s = j tau / (n_samples - 1). The last sample is the next stroboscopic state.
inline std::vector<TraceSample> intra_period_trace(const MomentVector& v_at_kick,
                                                   const CycleMap& cycle,
                                                   std::size_t n_samples) {
  if (n_samples < 2) throw InvalidArgument("intra_period_trace: n_samples must be >= 2");
  const Vec3 kicked = cycle.kick.K * v_at_kick.vec();
  std::vector<TraceSample> out;
  out.reserve(n_samples);
  const double last = static_cast<double>(n_samples - 1);
  for (std::size_t j = 0; j < n_samples; ++j) {
    const double s = j + 1 == n_samples ? cycle.tau
                                        : cycle.tau * (static_cast<double>(j) / last);
    const Propagator p = j + 1 == n_samples ? cycle.free : make_propagator(cycle.drift, s);
    out.push_back({s, MomentVector::from(p.M * kicked + p.v_inh)});
  }
  return out;
}

/// von Neumann entropy (nats) of a single-mode Gaussian state with purity P.
/// Near P = 1 the closed form is 0 * log 0; below eps = 1 - P = 1e-8 the
/// leading-order expansion (eps / 2)(1 + ln(2 / eps)) is used instead.
inline double entropy_from_purity(double purity) {
  const double eps = 1.0 - purity;
  if (eps <= 0.0) return 0.0;
  if (eps < 1e-8) return 0.5 * eps * (1.0 + std::log(2.0 / eps));
  const double p = purity;
  return (1.0 - p) / (2.0 * p) * std::log((1.0 + p) / (1.0 - p)) -
         std::log(2.0 * p / (1.0 + p));
}

inline StateMetrics state_metrics(const MomentVector& v) {
  if (!v.finite() || v.sigma_q <= 0.0 || v.sigma_p <= 0.0) {
    throw InvalidArgument("state_metrics: moments must be finite with positive variances");
  }
  const double det = v.determinant();
  if (det <= 0.0) throw InvalidArgument("state_metrics: non-positive determinant");
  StateMetrics m;
  m.purity = 1.0 / (2.0 * std::sqrt(det));
  if (m.purity > 1.0 + kPurityTolerance) {
    throw InvalidArgument("state_metrics: non-physical state, purity " +
                          std::to_string(m.purity) + " > 1");
  }
  m.entropy = entropy_from_purity(std::min(m.purity, 1.0));

  const double sum = v.sigma_p + v.sigma_q;
  const double diff = v.sigma_p - v.sigma_q;
  const double root = std::sqrt(diff * diff + 4.0 * v.sigma_qp * v.sigma_qp);
  // (sum - root) / 2 rewritten as det / ((sum + root) / 2) to avoid
  // cancellation for strongly squeezed states.
  m.sigma_min = 2.0 * det / (sum + root);
  m.squeezing_db = 10.0 * std::log10(2.0 * m.sigma_min);

  // Isotropic state (diff == 0, sigma_qp == 0) gives atan2(0, 0) = 0.
  const double cross = v.sigma_qp == 0.0 ? 0.0 : -2.0 * v.sigma_qp;
  double phi = 0.5 * std::atan2(cross, diff);
  if (phi <= -std::numbers::pi / 2) phi += std::numbers::pi;
  m.phi_min = phi;

  m.n_eff = 0.5 * (sum - 1.0);
  return m;
}

/// state_metrics for states produced by evolution. A state below the
/// uncertainty bound there means the bath model has left its validity range
/// (cold bath, strong squeezing), so it is reported as a NumericalFailure.
inline StateMetrics checked_metrics(const MomentVector& v, std::uint64_t kick_index) {
  try {
    return state_metrics(v);
  } catch (const InvalidArgument& e) {
    throw NumericalFailure(std::string(e.what()) + "; bath model outside its validity range",
                           kick_index);
  }
}

/// Variance of the rotated quadrature q cos(phi) + p sin(phi).
inline double quadrature_variance(const MomentVector& v, double phi) {
  const double c = std::cos(phi);
  const double s = std::sin(phi);
  return v.sigma_q * c * c + v.sigma_p * s * s + 2.0 * v.sigma_qp * s * c;
}

}  // namespace kicksq
