#include "sme.hpp"

#include <cmath>
#include <complex>
#include <cstdint>
#include <vector>

#include "doctest.h"
#include "error.hpp"
#include "qubit_ops.hpp"
#include "rng.hpp"

using namespace omtsim;

namespace {

// Bare-coefficient configuration; tau = 1 so Gamma passes through unchanged.
SmeConfig bare_config(double gamma_minus, double gamma_1, double gamma_2,
                      double Gamma, double eta, double T) {
  SmeRates s;
  s.gamma_minus = gamma_minus;
  s.gamma_1 = gamma_1;
  s.gamma_2 = gamma_2;
  s.Gamma = Gamma;
  s.eta = eta;
  SmeConfig cfg;
  cfg.rates = rates_from_sme(s);
  cfg.T = T;
  return cfg;
}

Mat4c ground() {
  Mat4c rho = Mat4c::Zero();
  rho(0, 0) = 1.0;
  return rho;
}

}  // namespace

TEST_CASE("equation coefficients collect the physical decoherence channels") {
  EffectiveRates r;
  r.gamma_meas = 2.0;
  r.gamma_mech_1 = 0.3;
  r.gamma_mech_2 = 0.2;
  r.gamma_loss_1 = 0.5;
  r.gamma_relax = 0.1;
  r.gamma_phi = 0.4;
  r.eta = 0.8;
  r.tau = 0.25;
  const SmeRates s = sme_rates(r);
  CHECK(s.gamma_minus == 0.1);
  CHECK(s.gamma_1 == doctest::Approx(0.4 + 0.5 + 0.3).epsilon(1e-15));
  CHECK(s.gamma_2 == doctest::Approx(0.4 + 0.2).epsilon(1e-15));
  CHECK(s.Gamma == doctest::Approx(0.25 * 2.0).epsilon(1e-15));
  CHECK(s.eta == 0.8);
}

TEST_CASE("bare coefficients survive the round trip through the embedding") {
  SmeRates s;
  s.gamma_minus = 0.17;
  s.gamma_1 = 0.29;
  s.gamma_2 = 0.05;
  s.Gamma = 1.3;
  s.eta = 0.6;
  const SmeRates back = sme_rates(rates_from_sme(s));
  CHECK(back.gamma_minus == s.gamma_minus);
  CHECK(back.gamma_1 == s.gamma_1);
  CHECK(back.gamma_2 == s.gamma_2);
  CHECK(back.Gamma == s.Gamma);
  CHECK(back.eta == s.eta);
}

TEST_CASE("negative rates and out-of-range efficiency are rejected") {
  SmeRates s;
  s.Gamma = -1.0;
  CHECK_THROWS_AS(s.validate(), Error);
  s.Gamma = 1.0;
  s.eta = 1.5;
  CHECK_THROWS_AS(s.validate(), Error);
  s.eta = 1.0;
  CHECK_NOTHROW(s.validate());
}

TEST_CASE("automatic step keeps the stiffest coefficient at one permille") {
  SmeConfig cfg = bare_config(0.4, 0.3, 0.2, 1.5, 1.0, 1.0);
  const double stiff = 2 * 0.4 + 0.3 + 0.2 + 4 * 1.5;
  CHECK(cfg.resolve_dt() == doctest::Approx(1e-3 / stiff).epsilon(1e-15));

  cfg.dt = 1.0;  // dt * total = 2.4, far beyond the guard
  CHECK_THROWS_AS(cfg.resolve_dt(), Error);
  cfg.dt = 1e-3;
  CHECK(cfg.resolve_dt() == 1e-3);

  SmeConfig dead = bare_config(0, 0, 0, 0, 1.0, 1.0);
  CHECK_THROWS_AS(dead.resolve_dt(), Error);  // no scale to infer a step from
  dead.dt = 0.01;
  CHECK(dead.resolve_dt() == 0.01);
}

TEST_CASE("configuration validation catches bad horizons and snapshots") {
  SmeConfig cfg = bare_config(0, 0, 0, 1.0, 1.0, 2.0);
  CHECK_NOTHROW(cfg.validate());
  cfg.n_traj = 0;
  CHECK_THROWS_AS(cfg.validate(), Error);
  cfg.n_traj = 1;
  cfg.snapshot_times = {2.5};  // beyond T
  CHECK_THROWS_AS(cfg.validate(), Error);
  cfg.snapshot_times = {-0.1};
  CHECK_THROWS_AS(cfg.validate(), Error);
  cfg.snapshot_times.clear();
  cfg.T = -1.0;
  CHECK_THROWS_AS(cfg.validate(), Error);
}

TEST_CASE("both qubits up is a fixed point with a deterministic current") {
  SmeConfig cfg = bare_config(0, 0, 0, 1.0, 0.49, 1.0);
  cfg.dt = 2e-3;
  const Mat4c rho = ground();
  const double dW = 0.0137;
  const auto [next, i_dt] = step(rho, cfg, dW);
  // <S> = 2, so I dt = 2 sqrt(eta Gamma) * 2 * dt + dW = 2.8e-3 + dW
  CHECK(i_dt == doctest::Approx(4.0 * 0.7 * 2e-3 + dW).epsilon(1e-14));
  CHECK((next - rho).norm() == 0.0);
}

TEST_CASE("signal and noise correlate as a Wiener increment squared") {
  SmeConfig cfg = bare_config(0, 0, 0, 1.0, 1.0, 1.0);
  cfg.dt = 1e-3;
  const Mat4c rho = ground();
  NormalRng rng(derive_stream(2024, 0));
  const int n = 20000;
  double acc = 0;
  for (int i = 0; i < n; ++i) {
    const double dW = std::sqrt(cfg.dt) * rng.gaussian();
    acc += dW * step(rho, cfg, dW).second;
  }
  // E[dW I] = E[dW^2] = dt; the relative scatter of the mean is sqrt(2/n)
  CHECK(acc / n == doctest::Approx(cfg.dt).epsilon(0.05));
}

TEST_CASE("pure dephasing damps single-qubit coherences at twice the rate") {
  const double g1 = 0.3, T = 1.0;
  SmeConfig cfg = bare_config(0, g1, 0, 0, 1.0, T);
  const TrajectoryRecord rec = run_trajectory(plus_plus_state(), cfg, 0);
  REQUIRE(rec.states.size() == 1);
  const double dt = rec.dt;
  const long n = std::lround(T / dt);
  const double discrete = std::pow(1.0 - 2.0 * g1 * dt, n);
  const double got = std::real(rec.states[0](0, 2)) / 0.25;
  // the realized product of Euler factors, which converges to exp(-2 g1 T)
  CHECK(got == doctest::Approx(discrete).epsilon(1e-10));
  CHECK(got == doctest::Approx(std::exp(-2.0 * g1 * T)).epsilon(2e-3));
  // qubit-2 coherences are untouched when only qubit 1 dephases
  CHECK(std::real(rec.states[0](0, 1)) == doctest::Approx(0.25).epsilon(1e-12));
}

TEST_CASE("the spin-zero Bell state is dark under collective measurement") {
  SmeConfig cfg = bare_config(0, 0, 0, 1.0, 1.0, 2.0);
  cfg.seed = 7;
  cfg.snapshot_times = {1.0, 2.0};
  const TrajectoryRecord rec = run_trajectory(psi_plus_state(), cfg, 0);
  REQUIRE(rec.states.size() == 2);
  for (const auto& st : rec.states)
    CHECK((st - psi_plus_state()).norm() < 1e-12);
}

TEST_CASE("identical seeds give identical trajectories, new indices fresh ones") {
  SmeConfig cfg = bare_config(0.2, 0.1, 0.1, 1.0, 0.8, 1.0);
  cfg.seed = 99;
  cfg.snapshot_times = {0.5, 1.0};
  const TrajectoryRecord a = run_trajectory(plus_plus_state(), cfg, 3);
  const TrajectoryRecord b = run_trajectory(plus_plus_state(), cfg, 3);
  REQUIRE(a.J.size() == b.J.size());
  for (std::size_t k = 0; k < a.J.size(); ++k) {
    CHECK(a.J[k] == b.J[k]);
    CHECK(a.current[k] == b.current[k]);
    CHECK((a.states[k] - b.states[k]).norm() == 0.0);
  }
  CHECK(a.dW_stream_id == b.dW_stream_id);

  const TrajectoryRecord c = run_trajectory(plus_plus_state(), cfg, 4);
  CHECK(c.dW_stream_id != a.dW_stream_id);
  CHECK(c.J.back() != a.J.back());
}

TEST_CASE("ensemble members match their individually integrated counterparts") {
  SmeConfig cfg = bare_config(0.1, 0.05, 0.05, 0.8, 1.0, 0.5);
  cfg.seed = 11;
  cfg.n_traj = 7;
  const std::vector<TrajectoryRecord> ens =
      run_ensemble(plus_plus_state(), cfg);
  REQUIRE(ens.size() == 7);
  for (int i = 0; i < 7; ++i) {
    const TrajectoryRecord solo =
        run_trajectory(plus_plus_state(), cfg, static_cast<uint64_t>(i));
    CHECK(ens[i].J.back() == solo.J.back());
    CHECK((ens[i].states.back() - solo.states.back()).norm() == 0.0);
  }
}

TEST_CASE("accumulated signal variance is never below the Wiener floor") {
  // no measurement: J(T) is a plain Wiener path with Var = T
  SmeConfig pure = bare_config(0, 0, 0, 0, 1.0, 1.0);
  pure.dt = 0.01;
  pure.seed = 5;
  pure.n_traj = 400;
  double mean = 0, var = 0;
  std::vector<TrajectoryRecord> recs = run_ensemble(ground(), pure);
  for (const auto& r : recs) mean += r.J.back();
  mean /= pure.n_traj;
  for (const auto& r : recs) var += (r.J.back() - mean) * (r.J.back() - mean);
  var /= (pure.n_traj - 1);
  CHECK(var > 0.79 * pure.T);  // 3 sigma below the chi-squared mean
  CHECK(var < 1.25 * pure.T);

  // with a signal the branch separation dominates the variance
  SmeConfig meas = bare_config(0, 0, 0, 1.0, 0.5, 2.0);
  meas.seed = 6;
  meas.n_traj = 200;
  recs = run_ensemble(plus_plus_state(), meas);
  mean = 0;
  for (const auto& r : recs) mean += r.J.back();
  mean /= meas.n_traj;
  var = 0;
  for (const auto& r : recs) var += (r.J.back() - mean) * (r.J.back() - mean);
  var /= (meas.n_traj - 1);
  CHECK(var > meas.T);
}

TEST_CASE("subspace populations are conserved on average without relaxation") {
  SmeConfig cfg = bare_config(0, 0.2, 0.2, 1.0, 0.6, 2.0);
  cfg.seed = 21;
  cfg.n_traj = 400;
  const std::vector<TrajectoryRecord> recs =
      run_ensemble(plus_plus_state(), cfg);
  double p_top = 0, p_mid = 0, p_bot = 0;
  for (const auto& r : recs) {
    const auto& st = r.states.back();
    p_top += std::real(st(0, 0));
    p_mid += std::real(st(1, 1) + st(2, 2));
    p_bot += std::real(st(3, 3));
  }
  p_top /= cfg.n_traj;
  p_mid /= cfg.n_traj;
  p_bot /= cfg.n_traj;
  // initial weights (1/4, 1/2, 1/4); bounds sit at roughly 3 standard errors
  CHECK(std::abs(p_top - 0.25) < 0.075);
  CHECK(std::abs(p_mid - 0.50) < 0.075);
  CHECK(std::abs(p_bot - 0.25) < 0.075);
}

TEST_CASE("difference readout is a relabeling of the sum readout") {
  // flipping qubit 2 maps S_1 + S_2 onto S_1 - S_2; without relaxation the
  // two integrations see identical noise and must agree under conjugation
  SmeConfig sum_cfg = bare_config(0, 0.15, 0.25, 0.8, 0.7, 1.5);
  sum_cfg.seed = 31;
  sum_cfg.snapshot_times = {0.75, 1.5};
  SmeConfig diff_cfg = sum_cfg;
  diff_cfg.sign_mode = SignMode::SpinDifference;

  const Mat4c x2 = kron2(Mat2c::Identity(), pauli_x());
  const Mat4c rho0 = werner_state(0.7);
  const TrajectoryRecord a =
      run_trajectory(Mat4c(x2 * rho0 * x2.adjoint()), sum_cfg, 0);
  const TrajectoryRecord b = run_trajectory(rho0, diff_cfg, 0);
  REQUIRE(a.states.size() == b.states.size());
  for (std::size_t k = 0; k < a.states.size(); ++k) {
    const Mat4c mapped = x2 * Mat4c(a.states[k]) * x2.adjoint();
    CHECK((mapped - Mat4c(b.states[k])).norm() < 1e-9);
  }
  CHECK(std::abs(a.J.back() - b.J.back()) < 1e-9);
}

TEST_CASE("single-qubit readout pins the ground state and its current") {
  SmeRates s;
  s.Gamma = 1.0;
  Mat2c up = Mat2c::Zero();
  up(0, 0) = 1.0;
  double mean_rate = 0;
  const int n = 100;
  for (int i = 0; i < n; ++i) {
    const TrajectoryRecord rec =
        single_qubit_mode(up, s, 1.0, 1e-3, 17, {}, static_cast<uint64_t>(i));
    const auto& st = rec.states.back();
    CHECK((st - up).norm() < 1e-12);
    mean_rate += rec.J.back() / 1.0;
  }
  mean_rate /= n;
  // J(T)/T concentrates on 2 sqrt(Gamma) <sigma_z> = 2
  CHECK(mean_rate == doctest::Approx(2.0).epsilon(0.2));
}

TEST_CASE("single-qubit superpositions collapse onto measurement outcomes") {
  SmeRates s;
  s.Gamma = 1.0;
  Mat2c plus;
  plus << 0.5, 0.5, 0.5, 0.5;
  int ups = 0;
  const int n = 40;
  for (int i = 0; i < n; ++i) {
    const TrajectoryRecord rec =
        single_qubit_mode(plus, s, 12.0, 1e-3, 23, {}, static_cast<uint64_t>(i));
    const auto& st = rec.states.back();
    const double z = std::real(st(0, 0) - st(1, 1));
    CHECK(std::abs(std::abs(z) - 1.0) < 1e-2);
    const double pur = std::real((st * st).trace());
    CHECK(pur <= 1.0 + 1e-9);
    if (z > 0) ++ups;
  }
  // outcomes split evenly; 3 sigma of a fair binomial at n = 40 is about 9.5
  CHECK(ups > 8);
  CHECK(ups < 32);
}

TEST_CASE("single-qubit mode refuses a second dephasing channel") {
  SmeRates s;
  s.Gamma = 1.0;
  s.gamma_2 = 0.1;
  Mat2c up = Mat2c::Zero();
  up(0, 0) = 1.0;
  CHECK_THROWS_AS(single_qubit_mode(up, s, 1.0, 1e-3, 0), Error);
}

TEST_CASE("reported snapshots are positive, unit-trace and hermitian") {
  SmeConfig cfg = bare_config(0.3, 0.1, 0.1, 1.0, 1.0, 3.0);
  cfg.seed = 42;
  cfg.n_traj = 60;
  cfg.snapshot_times = {1.0, 2.0, 3.0};
  const std::vector<TrajectoryRecord> recs =
      run_ensemble(plus_plus_state(), cfg);
  for (const auto& r : recs)
    for (const auto& st : r.states) {
      const Mat4c rho = st;
      CHECK((rho - rho.adjoint()).norm() < 1e-12);
      CHECK(std::abs(rho.trace().real() - 1.0) < 1e-9);
      CHECK(std::abs(rho.trace().imag()) < 1e-12);
      const Eigen::SelfAdjointEigenSolver<Mat4c> es(rho);
      CHECK(es.eigenvalues().minCoeff() >
            -1e-8 * es.eigenvalues().maxCoeff());
      CHECK(purity(rho) <= 1.0 + 1e-9);
    }
}

TEST_CASE("snapshots land on the nearest step and remember the step size") {
  SmeConfig cfg = bare_config(0.1, 0.1, 0.1, 0.7, 1.0, 1.0);
  cfg.snapshot_times = {0.333, 0.666, 1.0};
  const TrajectoryRecord rec = run_trajectory(plus_plus_state(), cfg, 0);
  CHECK(rec.dt == doctest::Approx(cfg.resolve_dt()).epsilon(1e-15));
  REQUIRE(rec.times.size() == 3);
  for (std::size_t k = 0; k < rec.times.size(); ++k) {
    const double requested = cfg.snapshot_times[k];
    CHECK(std::abs(rec.times[k] - requested) <= 0.5 * rec.dt * (1 + 1e-9));
    const double steps = rec.times[k] / rec.dt;
    CHECK(std::abs(steps - std::lround(steps)) < 1e-9);
  }
}

TEST_CASE("a leading zero snapshot returns the initial state with no signal") {
  SmeConfig cfg = bare_config(0, 0, 0, 1.0, 1.0, 1.0);
  cfg.snapshot_times = {0.0, 1.0};
  const TrajectoryRecord rec = run_trajectory(werner_state(0.4), cfg, 0);
  REQUIRE(rec.times.size() == 2);
  CHECK(rec.times[0] == 0.0);
  CHECK(rec.current[0] == 0.0);
  CHECK(rec.J[0] == 0.0);
  CHECK((Mat4c(rec.states[0]) - werner_state(0.4)).norm() < 1e-12);
}

TEST_CASE("state storage can be switched off to save memory") {
  SmeConfig cfg = bare_config(0, 0, 0, 1.0, 1.0, 1.0);
  cfg.store_states = false;
  cfg.snapshot_times = {0.5, 1.0};
  const TrajectoryRecord rec = run_trajectory(plus_plus_state(), cfg, 0);
  CHECK(rec.states.empty());
  CHECK(rec.J.size() == 2);
  CHECK(rec.current.size() == 2);
}

TEST_CASE("halving the step tightens agreement along a fixed noise path") {
  // integrate shared Brownian paths at dt, dt/2 and dt/4 through the public
  // single-step interface; the mean distance to the finest run must shrink
  // (per path the error constant fluctuates, so only the average is ordered)
  const double T = 1.0, dt = 2e-3;
  SmeConfig coarse = bare_config(0.2, 0.1, 0.1, 1.0, 1.0, T);
  SmeConfig mid = coarse, fine = coarse;
  coarse.dt = dt;
  mid.dt = dt / 2;
  fine.dt = dt / 4;

  const int n_fine = static_cast<int>(std::lround(T / fine.dt));
  std::vector<double> dw_fine(n_fine);

  auto integrate_with = [&](const SmeConfig& cfg, int lump) {
    Mat4c rho = plus_plus_state();
    for (int i = 0; i + lump <= n_fine; i += lump) {
      double dW = 0;
      for (int j = 0; j < lump; ++j) dW += dw_fine[i + j];
      rho = step(rho, cfg, dW).first;
    }
    return rho;
  };

  double d1 = 0, d2 = 0;
  const int paths = 40;
  for (int p = 0; p < paths; ++p) {
    NormalRng rng(derive_stream(77, static_cast<uint64_t>(p)));
    for (double& w : dw_fine) w = std::sqrt(fine.dt) * rng.gaussian();
    const Mat4c r4 = integrate_with(fine, 1);
    d1 += (integrate_with(coarse, 4) - r4).norm();
    d2 += (integrate_with(mid, 2) - r4).norm();
  }
  d1 /= paths;
  d2 /= paths;
  CHECK(d2 < d1);
  CHECK(d1 < 0.05);
}
