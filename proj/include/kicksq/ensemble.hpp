#pragma once

// Stroboscopic evolution with a kick strength that fluctuates from kick to
// kick, single runs and seeded ensembles.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <mutex>
#include <random>
#include <thread>
#include <vector>

#include "kicksq/errors.hpp"
#include "kicksq/moments.hpp"

namespace kicksq {

struct KickNoiseModel {
  double mean_theta = 0.0;
  double variance = 0.0;

  void validate() const {
    if (!std::isfinite(mean_theta)) throw InvalidArgument("noise mean_theta must be finite");
    if (!std::isfinite(variance) || variance < 0.0) {
      throw InvalidArgument("noise variance must be finite and >= 0");
    }
  }
};

struct TrajectorySample {
  std::uint64_t kick_index = 0;
  MomentVector state;
  StateMetrics metrics;
};

struct TrajectoryResult {
  std::uint64_t seed = 0;
  std::vector<TrajectorySample> samples;
};

// SplitMix64 finaliser (Steele, Lea, Flood 2014).
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Seed of trajectory `index` in an ensemble:
///   splitmix64(base_seed ^ splitmix64(index)).
/// Depends only on (base_seed, index), never on scheduling.
inline std::uint64_t trajectory_seed(std::uint64_t base_seed, std::uint64_t index) {
  return splitmix64(base_seed ^ splitmix64(index));
}

// Normal(mean, variance) draws from a 64-bit Mersenne Twister.
class KickSampler {
 public:
  KickSampler(const KickNoiseModel& noise, std::uint64_t seed)
      : engine_(seed), normal_(noise.mean_theta, std::sqrt(noise.variance)) {}

  double operator()() { return normal_(engine_); }

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_;
};

/// One run with theta_n ~ Normal(mean, variance) drawn per kick. The free
/// propagator is shared by all kicks; each kick uses A_n = M K(theta_n),
/// built the same way as cycle_map, so a zero-variance run reproduces
/// stroboscopic_evolve bit for bit.
inline TrajectoryResult run_trajectory(const MechanicalParams& params, double tau,
                                       const KickNoiseModel& noise, std::uint64_t n_kicks,
                                       std::uint64_t stride, std::uint64_t seed) {
  params.validate();
  noise.validate();
  if (stride < 1) throw InvalidArgument("stride must be >= 1");
  if (!std::isfinite(tau) || tau <= 0.0) throw InvalidArgument("tau must be > 0");

  const DriftModel drift = build_drift(params);
  const Propagator free = make_propagator(drift, tau);
  KickSampler draw(noise, seed);

  TrajectoryResult out;
  out.seed = seed;
  out.samples.reserve(static_cast<std::size_t>(n_kicks / stride + 2));
  MomentVector v = thermal_state(params);
  out.samples.push_back({0, v, checked_metrics(v, 0)});
  Vec3 x = v.vec();
  for (std::uint64_t n = 1; n <= n_kicks; ++n) {
    const Mat3 a = free.M * kick_map(draw()).K;
    x = detail::advance(a, free.v_inh, x);
    detail::require_finite(x, n);
    if (n % stride == 0 || n == n_kicks) {
      v = MomentVector::from(x);
      out.samples.push_back({n, v, checked_metrics(v, n)});
    }
  }
  return out;
}

// Mean and population standard deviation of one quantity across trajectories.
struct MeanStd {
  double mean = 0.0;
  double std = 0.0;
};

struct EnsemblePoint {
  std::uint64_t kick_index = 0;
  MeanStd sigma_q, sigma_qp, sigma_p;
  MeanStd sigma_min, squeezing_db, phi_min, purity, entropy, n_eff;
  // 10 log10(2 <sigma_min>): variances averaged first, then converted.
  double squeezing_db_of_mean = 0.0;
};

struct EnsembleStats {
  std::size_t trajectories = 0;
  std::vector<EnsemblePoint> points;
  TrajectoryResult first;  // trajectory 0, kept as the single-run example
};

namespace detail {

// Shifted two-pass mean/std in index order. Identical inputs give exactly
// that value and a zero spread.
template <typename Get>
MeanStd mean_std(const std::vector<TrajectoryResult>& runs, std::size_t k, Get get) {
  const double ref = get(runs[0].samples[k]);
  double shift = 0.0;
  for (const auto& r : runs) shift += get(r.samples[k]) - ref;
  const double n = static_cast<double>(runs.size());
  const double mean = ref + shift / n;
  double ss = 0.0;
  for (const auto& r : runs) {
    const double d = get(r.samples[k]) - mean;
    ss += d * d;
  }
  return {mean, std::sqrt(ss / n)};
}

}  // namespace detail

/// Runs n_traj trajectories, trajectory i seeded with trajectory_seed(base, i),
/// on up to `threads` worker threads (0 = hardware concurrency). Aggregation
/// happens afterwards in index order, so results do not depend on threads.
inline EnsembleStats run_ensemble(const MechanicalParams& params, double tau,
                                  const KickNoiseModel& noise, std::uint64_t n_kicks,
                                  std::uint64_t stride, std::size_t n_traj,
                                  std::uint64_t base_seed, unsigned threads = 0) {
  if (n_traj < 1) throw InvalidArgument("run_ensemble: need at least one trajectory");
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, n_traj));

  std::vector<TrajectoryResult> runs(n_traj);
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto worker = [&] {
    for (std::size_t i = next++; i < n_traj; i = next++) {
      try {
        runs[i] = run_trajectory(params, tau, noise, n_kicks, stride,
                                 trajectory_seed(base_seed, i));
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next = n_traj;
      }
    }
  };
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(threads);
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
  }
  if (failure) std::rethrow_exception(failure);

  EnsembleStats stats;
  stats.trajectories = n_traj;
  const std::size_t n_points = runs[0].samples.size();
  stats.points.resize(n_points);
  for (std::size_t k = 0; k < n_points; ++k) {
    using S = TrajectorySample;
    EnsemblePoint& p = stats.points[k];
    p.kick_index = runs[0].samples[k].kick_index;
    p.sigma_q = detail::mean_std(runs, k, [](const S& s) { return s.state.sigma_q; });
    p.sigma_qp = detail::mean_std(runs, k, [](const S& s) { return s.state.sigma_qp; });
    p.sigma_p = detail::mean_std(runs, k, [](const S& s) { return s.state.sigma_p; });
    p.sigma_min = detail::mean_std(runs, k, [](const S& s) { return s.metrics.sigma_min; });
    p.squeezing_db = detail::mean_std(runs, k, [](const S& s) { return s.metrics.squeezing_db; });
    p.phi_min = detail::mean_std(runs, k, [](const S& s) { return s.metrics.phi_min; });
    p.purity = detail::mean_std(runs, k, [](const S& s) { return s.metrics.purity; });
    p.entropy = detail::mean_std(runs, k, [](const S& s) { return s.metrics.entropy; });
    p.n_eff = detail::mean_std(runs, k, [](const S& s) { return s.metrics.n_eff; });
    p.squeezing_db_of_mean = 10.0 * std::log10(2.0 * p.sigma_min.mean);
  }
  stats.first = std::move(runs[0]);
  return stats;
}

}  // namespace kicksq
