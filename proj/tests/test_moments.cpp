#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "kicksq/expm.hpp"
#include "kicksq/moments.hpp"
#include "oracles.hpp"

namespace kicksq {
namespace {

constexpr double kOmega = 5e5;
constexpr double kGamma = 1e2;
constexpr double kTau = 1e-7;

const MechanicalParams kBaseline{kOmega, kGamma, 10.0};

oracle::Moments to_oracle(const MomentVector& v) { return {v.sigma_q, v.sigma_qp, v.sigma_p}; }

template <int N>
double rel_error_vs_taylor(const Eigen::Matrix<double, N, N>& a, double t) {
  oracle::LMat<N> la{};
  for (int i = 0; i < N; ++i)
    for (int j = 0; j < N; ++j) la[i][j] = a(i, j);
  const auto ref = oracle::taylor_exp<N>(la, t);
  const auto got = matrix_exponential<N>(a, t);
  long double diff = 0, norm = 0;
  for (int i = 0; i < N; ++i)
    for (int j = 0; j < N; ++j) {
      diff += (got(i, j) - ref[i][j]) * (got(i, j) - ref[i][j]);
      norm += ref[i][j] * ref[i][j];
    }
  return static_cast<double>(std::sqrt(diff / norm));
}

// ---- matrix exponential ----------------------------------------------------

TEST(MatrixExponential, ZeroTimeIsExactIdentity) {
  Mat3 b;
  b << 1, 2, 3, -4, 5, 6, 7, -8, 9;
  EXPECT_EQ(matrix_exponential<3>(b, 0.0), Mat3::Identity());
}

TEST(MatrixExponential, Diagonal) {
  const Mat3 b = Eigen::Vector3d(-1, -2, -3).asDiagonal();
  const Mat3 e = matrix_exponential<3>(b, 1.0);
  EXPECT_NEAR(e(0, 0), std::exp(-1.0), 1e-15);
  EXPECT_NEAR(e(1, 1), std::exp(-2.0), 1e-15);
  EXPECT_NEAR(e(2, 2), std::exp(-3.0), 1e-15);
  EXPECT_EQ(e(0, 1), 0.0);
  EXPECT_EQ(e(2, 0), 0.0);
}

TEST(MatrixExponential, MatchesTaylorOracle) {
  const DriftModel d = build_drift(kBaseline);
  EXPECT_LE(rel_error_vs_taylor<3>(d.B, kTau), 1e-12);
  EXPECT_LE(rel_error_vs_taylor<3>(d.B, 3e-6), 1e-12);  // needs squaring
  EXPECT_LE(rel_error_vs_taylor<3>(d.B, 2e-5), 1e-12);  // several full turns

  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-2.0, 2.0), ts(0.01, 3.0);
  for (int trial = 0; trial < 50; ++trial) {
    Mat3 a;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) a(i, j) = u(rng);
    EXPECT_LE(rel_error_vs_taylor<3>(a, ts(rng)), 1e-12) << "trial " << trial;
  }
  Eigen::Matrix4d aug = Eigen::Matrix4d::Zero();
  aug.topLeftCorner<3, 3>() = d.B;
  aug.topRightCorner<3, 1>() = d.b;
  EXPECT_LE(rel_error_vs_taylor<4>(aug, kTau), 1e-12);
}

TEST(MatrixExponential, MatchesRk4OnBaselineDrift) {
  const DriftModel d = build_drift({kOmega, kGamma, 10.0});
  oracle::LMat3 lb{};
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) lb[i][j] = d.B(i, j);
  const auto ref = oracle::rk4_matrix(lb, kTau, 10000);  // step 1e-11
  const Mat3 m = matrix_exponential<3>(d.B, kTau);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) EXPECT_NEAR(m(i, j), static_cast<double>(ref[i][j]), 1e-9);
}

TEST(MatrixExponential, RejectsBadInput) {
  Mat3 b = Mat3::Zero();
  EXPECT_THROW(matrix_exponential<3>(b, -1.0), InvalidArgument);
  EXPECT_THROW(matrix_exponential<3>(b, NAN), InvalidArgument);
  b(1, 2) = INFINITY;
  EXPECT_THROW(matrix_exponential<3>(b, 1.0), InvalidArgument);
}

// ---- thermal state and drift -----------------------------------------------

TEST(ThermalState, Values) {
  EXPECT_EQ(thermal_state({1, 0, 0}), (MomentVector{0.5, 0, 0.5}));
  EXPECT_EQ(thermal_state({kOmega, kGamma, 10}), (MomentVector{10.5, 0, 10.5}));
  EXPECT_EQ(thermal_state({kOmega, kGamma, 200}), (MomentVector{200.5, 0, 200.5}));
}

TEST(MechanicalParams, Validation) {
  EXPECT_THROW(thermal_state({0, 1, 1}), InvalidArgument);
  EXPECT_THROW(thermal_state({1, -1, 1}), InvalidArgument);
  EXPECT_THROW(thermal_state({1, 1, -0.1}), InvalidArgument);
  EXPECT_THROW(thermal_state({NAN, 1, 1}), InvalidArgument);
}

TEST(BuildDrift, UndampedUnitFrequency) {
  const DriftModel d = build_drift({1, 0, 0});
  Mat3 expected;
  expected << 0, 2, 0, -1, 0, 1, 0, -2, 0;
  EXPECT_EQ(d.B, expected);
  EXPECT_EQ(d.b, Vec3::Zero());
}

TEST(BuildDrift, Inhomogeneity) {
  EXPECT_EQ(build_drift({5e5, 1e2, 10}).b, Vec3(0, 0, 2100));
}

TEST(BuildDrift, ThermalFixedPoint) {
  for (const MechanicalParams p : {MechanicalParams{1, 0.3, 0}, MechanicalParams{5e5, 1e2, 10},
                                   MechanicalParams{2e3, 7, 123.25}}) {
    const DriftModel d = build_drift(p);
    const Vec3 r = d.B * thermal_state(p).vec() + d.b;
    EXPECT_LE(r.norm(), 1e-12 * d.b.norm() + 1e-300);
  }
}

TEST(BuildDrift, DampedEigenvaluesInLeftHalfPlane) {
  const DriftModel d = build_drift(kBaseline);
  const Eigen::EigenSolver<Mat3> es(d.B);
  for (int i = 0; i < 3; ++i) EXPECT_LT(es.eigenvalues()[i].real(), 0.0);
}

// ---- propagator ------------------------------------------------------------

TEST(Propagator, TwoRoutesForInhomogeneousTermAgree) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> lw(3, 6), lg(-1, 3), nb(0, 300), lt(-9, -5);
  for (int trial = 0; trial < 30; ++trial) {
    const MechanicalParams p{std::pow(10, lw(rng)), std::pow(10, lg(rng)), nb(rng)};
    const double t = std::pow(10, lt(rng));
    const Propagator prop = make_propagator(build_drift(p), t);
    const Vec3 vth = thermal_state(p).vec();
    const Vec3 alt = (Mat3::Identity() - prop.M) * vth;
    // The second route cancels I - M against v_th, so its error scales with |v_th|.
    EXPECT_LE((prop.v_inh - alt).norm(), 1e-12 * vth.norm()) << "trial " << trial;
  }
}

TEST(Propagator, UndampedHasNoInhomogeneity) {
  for (double t : {0.0, 1e-3, 1.0, 17.0}) {
    EXPECT_EQ(make_propagator(build_drift({3, 0, 40}), t).v_inh, Vec3::Zero());
  }
}

TEST(Propagator, RelaxesToThermalEquilibrium) {
  const MechanicalParams p{5e5, 1e2, 10};
  const Propagator prop = make_propagator(build_drift(p), 30.0 / p.gamma_m);
  EXPECT_LE(prop.M.cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_NEAR(prop.v_inh[0], 10.5, 1e-9);
  EXPECT_NEAR(prop.v_inh[1], 0.0, 1e-9);
  EXPECT_NEAR(prop.v_inh[2], 10.5, 1e-9);
}

TEST(Propagator, QuarterTurnSwapsVariances) {
  const MechanicalParams p{2.0, 0, 0};
  const Propagator prop = make_propagator(build_drift(p), std::numbers::pi / 2 / p.omega_m);
  const MomentVector out = propagate_free({3.0, 0.7, 0.9}, prop);
  EXPECT_NEAR(out.sigma_q, 0.9, 1e-14);
  EXPECT_NEAR(out.sigma_qp, -0.7, 1e-14);
  EXPECT_NEAR(out.sigma_p, 3.0, 1e-14);

  const MomentVector rot = propagate_free({2, 0, 0.5}, prop);
  EXPECT_NEAR(rot.sigma_q, 0.5, 1e-14);
  EXPECT_NEAR(rot.sigma_qp, 0.0, 1e-14);
  EXPECT_NEAR(rot.sigma_p, 2.0, 1e-14);
}

TEST(Propagator, FullTurnIsIdentityWithoutDamping) {
  const MechanicalParams p{5e5, 0, 10};
  const Propagator prop = make_propagator(build_drift(p), 2 * std::numbers::pi / p.omega_m);
  EXPECT_LE((prop.M - Mat3::Identity()).cwiseAbs().maxCoeff(), 1e-9);
  const MomentVector v{1.3, -0.4, 2.2};
  const MomentVector w = propagate_free(v, prop);
  EXPECT_NEAR(w.sigma_q, v.sigma_q, 1e-9);
  EXPECT_NEAR(w.sigma_qp, v.sigma_qp, 1e-9);
  EXPECT_NEAR(w.sigma_p, v.sigma_p, 1e-9);
}

TEST(PropagateFree, ThermalStateIsFixed) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> lt(-9, -2);
  for (const MechanicalParams p : {kBaseline, MechanicalParams{5e5, 1e2, 200}, MechanicalParams{1e3, 5, 0}}) {
    const MomentVector th = thermal_state(p);
    for (int i = 0; i < 10; ++i) {
      const MomentVector out = propagate_free(th, make_propagator(build_drift(p), std::pow(10, lt(rng))));
      EXPECT_LE(oracle::rel_diff(to_oracle(out), to_oracle(th)), 1e-10);
    }
  }
}

TEST(PropagateFree, MatchesRk4BaselineParameters) {
  const Propagator prop = make_propagator(build_drift(kBaseline), kTau);
  const MomentVector v{10.5, 0, 10.5};
  const auto ref = oracle::rk4_moments(kOmega, kGamma, 10, {10.5, 0, 10.5}, kTau, 10000);
  EXPECT_LE(oracle::rel_diff(to_oracle(propagate_free(v, prop)), ref), 1e-9);

  // A kicked (strongly squeezed) state exercises every matrix entry.
  const MomentVector kicked = apply_kick(v, kick_map(10));
  const auto ref2 = oracle::rk4_moments(kOmega, kGamma, 10, to_oracle(kicked), kTau, 10000);
  EXPECT_LE(oracle::rel_diff(to_oracle(propagate_free(kicked, prop)), ref2), 1e-9);
}

TEST(PropagateFree, DeterminantRate) {
  // d det / dt = gamma ((2 n_bar + 1) sigma_q - 2 det), from the moment equations.
  const MechanicalParams p{5e5, 1e4, 3};
  std::mt19937_64 rng(5);
  for (int i = 0; i < 50; ++i) {
    const auto o = oracle::random_state(rng);
    const MomentVector v{o.q, o.qp, o.p};
    const double h = 1e-10;
    const double plus = propagate_free(v, make_propagator(build_drift(p), h)).determinant();
    const double minus = propagate_free(v, make_propagator(build_drift(p), 2 * h)).determinant();
    const double d0 = v.determinant();
    const double rate = (-3 * d0 + 4 * plus - minus) / (2 * h);
    const double expected = p.gamma_m * ((2 * p.n_bar + 1) * v.sigma_q - 2 * d0);
    EXPECT_NEAR(rate, expected, 1e-4 * (std::abs(expected) + p.gamma_m * d0)) << "state " << i;
  }
}

// ---- kicks -----------------------------------------------------------------

TEST(KickMap, Matrices) {
  EXPECT_EQ(kick_map(0).K, Mat3::Identity());
  Mat3 expected;
  expected << 1, 0, 0, -20, 1, 0, 400, -40, 1;
  EXPECT_EQ(kick_map(10).K, expected);
  for (double th : {-100.0, -1.0, 0.0, 0.5, 10.0, 100.0}) {
    EXPECT_DOUBLE_EQ(kick_map(th).K.determinant(), 1.0);
  }
  EXPECT_THROW(kick_map(NAN), InvalidArgument);
}

TEST(ApplyKick, Examples) {
  const MomentVector vac = apply_kick({0.5, 0, 0.5}, kick_map(10));
  EXPECT_EQ(vac, (MomentVector{0.5, -10, 200.5}));
  EXPECT_DOUBLE_EQ(vac.determinant(), 0.25);

  const MomentVector v{1, 0.3, 2};
  EXPECT_EQ(apply_kick(v, kick_map(0)), v);
  const MomentVector w = apply_kick(v, kick_map(1));
  EXPECT_DOUBLE_EQ(w.sigma_q, 1.0);
  EXPECT_DOUBLE_EQ(w.sigma_qp, -1.7);
  EXPECT_DOUBLE_EQ(w.sigma_p, 4.8);
}

TEST(ApplyKick, SymplecticProperty) {
  std::mt19937_64 rng(13);
  for (int i = 0; i < 200; ++i) {
    const auto o = oracle::random_state(rng);
    const MomentVector v{o.q, o.qp, o.p};
    for (double th : {-100.0, -1.0, 0.0, 0.5, 10.0, 100.0}) {
      const MomentVector w = apply_kick(v, kick_map(th));
      EXPECT_EQ(w.sigma_q, v.sigma_q);
      const auto hand = oracle::kick_by_hand(o, th);
      EXPECT_LE(oracle::rel_diff(to_oracle(w), hand), 1e-14);
      // The new determinant is a difference of terms of size ~ theta^2 q^2,
      // so compare relative to that scale as well as to det itself.
      const double scale = std::max(v.determinant(), w.sigma_q * w.sigma_p);
      EXPECT_LE(std::abs(w.determinant() - v.determinant()), 1e-12 * scale)
          << "theta " << th;
    }
  }
}

// ---- cycle map ---------------------------------------------------------------

TEST(CycleMap, ZeroKickIsFreeEvolution) {
  const CycleMap c = cycle_map(kBaseline, kTau, 0.0);
  EXPECT_EQ(c.A, c.free.M);
}

TEST(CycleMap, BaselineParametersContract) {
  const CycleMap c = cycle_map(kBaseline, kTau, 10.0);
  EXPECT_LT(c.spectral_radius, 1.0);
  // All three eigenvalues share modulus exp(-gamma tau): det A = exp(-3 gamma tau).
  EXPECT_NEAR(c.spectral_radius, std::exp(-kGamma * kTau), 1e-12);
}

TEST(CycleMap, UndampedRotationIsMarginal) {
  const CycleMap c = cycle_map({kOmega, 0, 10}, kTau, 0.0);
  EXPECT_NEAR(c.spectral_radius, 1.0, 1e-12);
  EXPECT_THROW(cycle_map(kBaseline, 0.0, 1.0), InvalidArgument);
}

// ---- stroboscopic evolution ------------------------------------------------

TEST(StroboscopicEvolve, NoKicksReturnsInitialState) {
  const CycleMap c = cycle_map(kBaseline, kTau, 10);
  const auto s = stroboscopic_evolve({10.5, 0, 10.5}, c, 0, 7);
  ASSERT_EQ(s.size(), 1u);
  EXPECT_EQ(s[0].kick_index, 0u);
  EXPECT_EQ(s[0].state, (MomentVector{10.5, 0, 10.5}));
}

TEST(StroboscopicEvolve, SamplingIncludesFinalState) {
  const CycleMap c = cycle_map(kBaseline, kTau, 10);
  const auto s = stroboscopic_evolve(thermal_state(kBaseline), c, 25, 10);
  std::vector<std::uint64_t> idx;
  for (const auto& x : s) idx.push_back(x.kick_index);
  EXPECT_EQ(idx, (std::vector<std::uint64_t>{0, 10, 20, 25}));
  EXPECT_THROW(stroboscopic_evolve(thermal_state(kBaseline), c, 5, 0), InvalidArgument);
}

TEST(StroboscopicEvolve, NoKickRelaxesToThermal) {
  const MechanicalParams p{5e5, 1e4, 3};
  const CycleMap c = cycle_map(p, 1e-6, 0);
  const auto s = stroboscopic_evolve({40, 5, 2}, c, 10000, 10000);  // gamma t = 100
  EXPECT_LE(oracle::rel_diff(to_oracle(s.back().state), {3.5, 0, 3.5}), 1e-12);
}

TEST(StroboscopicEvolve, MatchesClosedForm) {
  const CycleMap c = cycle_map(kBaseline, kTau, 10);
  const MomentVector v0 = thermal_state(kBaseline);
  const auto s = stroboscopic_evolve(v0, c, 1000, 1);
  for (std::uint64_t n : {1, 10, 100, 1000}) {
    const MomentVector closed = stroboscopic_closed_form(v0, c, n);
    EXPECT_LE(oracle::rel_diff(to_oracle(s[n].state), to_oracle(closed)), 1e-8) << "n " << n;
  }
}

TEST(StroboscopicEvolve, DivergenceReportsKickIndex) {
  CycleMap c = cycle_map(kBaseline, kTau, 10);
  c.A *= 1e100;  // artificially unstable map
  try {
    stroboscopic_evolve(thermal_state(kBaseline), c, 100, 1);
    FAIL() << "expected NumericalFailure";
  } catch (const NumericalFailure& e) {
    EXPECT_EQ(e.kick_index(), 4u);
    EXPECT_NE(std::string(e.what()).find("kick 4"), std::string::npos);
  }
}

TEST(StroboscopicEvolve, UncertaintyHeldAlongTrajectory) {
  // The bound needs a warm bath: at n_bar = 0 a q-squeezed state loses
  // determinant at rate gamma (1/2 - sigma_q).
  for (const double nbar : {10.0, 200.0}) {
    const MechanicalParams p{kOmega, kGamma, nbar};
    for (const double th : {0.5, 10.0, 30.0}) {
      const CycleMap c = cycle_map(p, kTau, th);
      double worst = INFINITY;
      for_each_kick(thermal_state(p), c, 200000, [&](std::uint64_t, const MomentVector& v) {
        worst = std::min(worst, v.determinant());
      });
      EXPECT_GE(worst, 0.25 - kUncertaintyTolerance) << "nbar " << nbar << " theta " << th;
    }
  }
}

// ---- intra-period trace ------------------------------------------------------

TEST(IntraPeriodTrace, TwoSamplesAreEndpoints) {
  const CycleMap c = cycle_map(kBaseline, kTau, 10);
  const MomentVector v{3, 0.2, 7};
  const auto t = intra_period_trace(v, c, 2);
  ASSERT_EQ(t.size(), 2u);
  EXPECT_EQ(t[0].offset, 0.0);
  EXPECT_EQ(t[0].state, apply_kick(v, c.kick));
  EXPECT_EQ(t[1].offset, kTau);
  const MomentVector next = MomentVector::from(c.A * v.vec() + c.v_inh);
  EXPECT_LE(oracle::rel_diff(to_oracle(t[1].state), to_oracle(next)), 1e-10);
  EXPECT_THROW(intra_period_trace(v, c, 1), InvalidArgument);
}

TEST(IntraPeriodTrace, EndpointIsNextStroboscopicState) {
  const CycleMap c = cycle_map(kBaseline, kTau, 10);
  const auto strobe = stroboscopic_evolve(thermal_state(kBaseline), c, 5000, 5000);
  const auto trace = intra_period_trace(strobe.front().state, c, 101);
  const auto one = stroboscopic_evolve(strobe.front().state, c, 1, 1);
  EXPECT_LE(oracle::rel_diff(to_oracle(trace.back().state), to_oracle(one.back().state)), 1e-10);
}

TEST(IntraPeriodTrace, UndampedRotationConservesEnergy) {
  const CycleMap c = cycle_map({kOmega, 0, 5}, 4e-6, 0);
  const MomentVector v{9, 1.5, 0.4};
  for (const auto& s : intra_period_trace(v, c, 200)) {
    EXPECT_NEAR(s.state.sigma_q + s.state.sigma_p, 9.4, 1e-12);
  }
}

TEST(IntraPeriodTrace, PositionVarianceOscillatesAtTwiceMechanicalFrequency) {
  // Over one period sigma_q(s) must be a + b cos(w s) + c sin(w s) with
  // w = 2 omega_m (up to damping ~ gamma tau = 1e-5). Least-squares fit with
  // candidate frequencies; only 2 omega_m leaves a negligible residual.
  const CycleMap c = cycle_map(kBaseline, kTau, 10);
  const MomentVector ss = steady_state(c);
  const auto trace = intra_period_trace(ss, c, 401);
  auto residual = [&](double w) {
    Eigen::MatrixXd a(trace.size(), 3);
    Eigen::VectorXd y(trace.size());
    for (std::size_t i = 0; i < trace.size(); ++i) {
      a(i, 0) = 1;
      a(i, 1) = std::cos(w * trace[i].offset);
      a(i, 2) = std::sin(w * trace[i].offset);
      y(i) = trace[i].state.sigma_q;
    }
    const Eigen::VectorXd coef = a.colPivHouseholderQr().solve(y);
    return (a * coef - y).norm() / y.norm();
  };
  const double at_2w = residual(2 * kOmega);
  EXPECT_LE(at_2w, 1e-4);
  EXPECT_GT(residual(kOmega), 20 * at_2w);
  EXPECT_GT(residual(4 * kOmega), 20 * at_2w);
}

// ---- steady state ------------------------------------------------------------

TEST(SteadyState, NoKickIsThermal) {
  const CycleMap c = cycle_map(kBaseline, kTau, 0);
  EXPECT_LE(oracle::rel_diff(to_oracle(steady_state(c)), {10.5, 0, 10.5}), 1e-9);
}

TEST(SteadyState, FixedPointResidual) {
  for (const double nbar : {0.0, 10.0, 200.0}) {
    for (const double th : {0.5, 3.0, 10.0, 30.0}) {  // 40 is past the stability edge
      const CycleMap c = cycle_map({kOmega, kGamma, nbar}, kTau, th);
      const Vec3 x = steady_state(c).vec();
      EXPECT_LE((c.A * x + c.v_inh - x).norm(), 1e-10 * x.norm());
    }
  }
}

TEST(SteadyState, AgreesWithIterationToConvergence) {
  const CycleMap c = cycle_map(kBaseline, kTau, 10);
  const MomentVector ss = steady_state(c);
  const IterationResult it = iterate_to_convergence(thermal_state(kBaseline), c, 1e-12, 20000000);
  ASSERT_TRUE(it.converged);
  EXPECT_LE(oracle::rel_diff(to_oracle(it.state), to_oracle(ss)), 1e-8);
}

TEST(SteadyState, BaselineValues) {
  EXPECT_LE(state_metrics(steady_state(cycle_map(kBaseline, kTau, 10))).squeezing_db, -13.0);
  const double db200 =
      state_metrics(steady_state(cycle_map({kOmega, kGamma, 200}, kTau, 10))).squeezing_db;
  EXPECT_NEAR(db200, -0.8, 0.2);
}

TEST(SteadyState, RejectsNonContractingMap) {
  EXPECT_THROW(steady_state(cycle_map({kOmega, 0, 10}, kTau, 10)), NoStationaryState);
}

TEST(SteadyState, SqueezingImprovesWithKickStrength) {
  double prev = INFINITY;
  for (int i = 0; i <= 20; ++i) {
    const double th = 0.5 * i;
    const double smin = state_metrics(steady_state(cycle_map(kBaseline, kTau, th))).sigma_min;
    EXPECT_LE(smin, prev) << "theta " << th;
    prev = smin;
  }
}

// ---- metrics -----------------------------------------------------------------

TEST(StateMetrics, Vacuum) {
  const StateMetrics m = state_metrics({0.5, 0, 0.5});
  EXPECT_EQ(m.sigma_min, 0.5);
  EXPECT_EQ(m.squeezing_db, 0.0);
  EXPECT_EQ(m.purity, 1.0);
  EXPECT_EQ(m.entropy, 0.0);
  EXPECT_EQ(m.n_eff, 0.0);
  EXPECT_EQ(m.phi_min, 0.0);
}

TEST(StateMetrics, ThermalFormulas) {
  for (double nbar : {0.01, 0.5, 1.0, 10.0, 200.0, 1e4}) {
    const StateMetrics m = state_metrics({nbar + 0.5, 0, nbar + 0.5});
    EXPECT_NEAR(m.purity, 1.0 / (2 * nbar + 1), 1e-15);
    const double s = (nbar + 1) * std::log(nbar + 1) - nbar * std::log(nbar);
    EXPECT_NEAR(m.entropy, s, 1e-11 * std::max(1.0, s)) << "nbar " << nbar;
    EXPECT_NEAR(m.n_eff, nbar, 1e-12 * std::max(1.0, nbar));
  }
}

TEST(StateMetrics, EntropyNearPureStateIsFiniteAndSmall) {
  for (double eps : {0.0, 1e-16, 1e-12, 1e-9, 2e-8, 1e-6}) {
    const double s = entropy_from_purity(1.0 - eps);
    EXPECT_TRUE(std::isfinite(s));
    EXPECT_GE(s, 0.0);
    if (eps == 0.0) {
      EXPECT_EQ(s, 0.0);
    }
  }
  // Both sides of the series switch agree with the closed form.
  const double below = entropy_from_purity(1.0 - 0.99e-8);
  const double above = entropy_from_purity(1.0 - 1.01e-8);
  EXPECT_NEAR(below / above, 0.99 * (1 + std::log(2 / 0.99e-8)) / (1.01 * (1 + std::log(2 / 1.01e-8))), 1e-6);
}

TEST(StateMetrics, PhaseScanMatchesClosedForm) {
  std::mt19937_64 rng(17);
  for (int i = 0; i < 40; ++i) {
    const auto o = oracle::random_state(rng);
    const MomentVector v{o.q, o.qp, o.p};
    const StateMetrics m = state_metrics(v);
    double best = INFINITY;
    double best_phi = 0;
    constexpr int kScan = 10000;
    for (int k = 0; k < kScan; ++k) {
      const double phi = -std::numbers::pi / 2 + std::numbers::pi * (k + 1) / kScan;
      const double var = quadrature_variance(v, phi);
      if (var < best) {
        best = var;
        best_phi = phi;
      }
    }
    // Refine around the best grid point by golden-section search.
    double lo = best_phi - std::numbers::pi / kScan, hi = best_phi + std::numbers::pi / kScan;
    for (int it = 0; it < 200; ++it) {
      const double a = lo + (hi - lo) * 0.381966, b = lo + (hi - lo) * 0.618034;
      if (quadrature_variance(v, a) < quadrature_variance(v, b)) hi = b; else lo = a;
    }
    best = std::min(best, quadrature_variance(v, 0.5 * (lo + hi)));
    EXPECT_NEAR(m.sigma_min, best, 1e-9);
    EXPECT_NEAR(quadrature_variance(v, m.phi_min), m.sigma_min, 1e-9);
    EXPECT_GT(m.phi_min, -std::numbers::pi / 2);
    EXPECT_LE(m.phi_min, std::numbers::pi / 2);
    EXPECT_LE(m.sigma_min, std::min(v.sigma_q, v.sigma_p) + 1e-15);
  }
}

TEST(StateMetrics, PhaseBranchEdges) {
  EXPECT_EQ(state_metrics({2, 0, 2}).phi_min, 0.0);
  EXPECT_EQ(state_metrics({3, 0, 1}).phi_min, std::numbers::pi / 2);
  EXPECT_EQ(state_metrics({3, -0.0, 1}).phi_min, std::numbers::pi / 2);
  EXPECT_EQ(state_metrics({1, 0, 3}).phi_min, 0.0);
}

TEST(StateMetrics, RejectsNonPhysical) {
  EXPECT_THROW(state_metrics({0.1, 0, 0.1}), InvalidArgument);
  EXPECT_THROW(state_metrics({-1, 0, 1}), InvalidArgument);
  EXPECT_THROW(state_metrics({1, 2, 1}), InvalidArgument);
  EXPECT_NO_THROW(state_metrics({0.5, 0, 0.5 * (1 - 1e-10)}));
}

TEST(StateMetrics, PurityAndEntropyConsistency) {
  std::mt19937_64 rng(19);
  for (int i = 0; i < 100; ++i) {
    const auto o = oracle::random_state(rng);
    const StateMetrics m = state_metrics({o.q, o.qp, o.p});
    EXPECT_LE(m.purity, 1.0 + kPurityTolerance);
    EXPECT_GE(m.entropy, 0.0);
    EXPECT_GE(m.n_eff, -1e-9);
    if (m.entropy <= 1e-9) {
      EXPECT_NEAR(m.purity, 1.0, 1e-9);
    }
  }
}

}  // namespace
}  // namespace kicksq
