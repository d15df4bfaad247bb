#include "postselect.hpp"

#include <cmath>
#include <limits>
#include <vector>

#include "doctest.h"
#include "error.hpp"
#include "qubit_ops.hpp"
#include "sme.hpp"

using namespace omtsim;

namespace {

const double inf = std::numeric_limits<double>::infinity();

// Probability mass of |x| <= nu under the three-branch signal model,
// integrated numerically instead of through the error function.
double mixture_mass_quadrature(double nu, double Gamma, double eta, double T) {
  const double mu = 4.0 * std::sqrt(eta * Gamma) * T;
  auto density = [&](double x) {
    auto normal = [&](double m) {
      return std::exp(-(x - m) * (x - m) / (2.0 * T)) /
             std::sqrt(2.0 * M_PI * T);
    };
    return 0.25 * normal(mu) + 0.5 * normal(0.0) + 0.25 * normal(-mu);
  };
  const int n = 40000;  // Simpson rule, even count
  const double h = 2.0 * nu / n;
  double acc = density(-nu) + density(nu);
  for (int i = 1; i < n; ++i)
    acc += density(-nu + i * h) * (i % 2 ? 4.0 : 2.0);
  return acc * h / 3.0;
}

TrajectoryRecord make_record(double T, double J, const Mat4c& state) {
  TrajectoryRecord rec;
  rec.times = {T};
  rec.current = {0.0};
  rec.J = {J};
  rec.states = {state};
  rec.dt = 1e-3;
  return rec;
}

// Root of erf(x / sqrt(2 T)) = p by bisection, for the no-signal limit.
double gaussian_window_quantile(double p, double T) {
  double lo = 0, hi = 20.0 * std::sqrt(T);
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (std::erf(mid / std::sqrt(2.0 * T)) < p)
      lo = mid;
    else
      hi = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace

TEST_CASE("signal-model success probability matches direct integration") {
  struct Case {
    double nu, Gamma, eta, T;
  };
  for (const Case& c : {Case{1.0, 1.0, 1.0, 1.0}, Case{3.0, 0.5, 0.8, 2.0},
                        Case{0.3, 2.0, 0.6, 0.5}, Case{8.0, 1.0, 1.0, 4.0}}) {
    CHECK(mixture_success_probability(c.nu, c.Gamma, c.eta, c.T) ==
          doctest::Approx(mixture_mass_quadrature(c.nu, c.Gamma, c.eta, c.T))
              .epsilon(1e-8));
  }
}

TEST_CASE("success probability grows with the window and saturates at one") {
  double prev = -1.0;
  for (double nu : {0.0, 0.5, 1.0, 2.0, 5.0, 20.0, 60.0}) {
    const double p = mixture_success_probability(nu, 1.0, 1.0, 2.0);
    CHECK(p >= prev);
    prev = p;
  }
  CHECK(mixture_success_probability(0.0, 1.0, 1.0, 2.0) == 0.0);
  CHECK(mixture_success_probability(inf, 1.0, 1.0, 2.0) == 1.0);
  CHECK(prev == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("cutoff calibration inverts the signal model") {
  const double nu = calibrate_cutoff(0.3, 2.0, 1.5, 0.8, 0.5);
  // the lossy joint rate tau * Gamma_eff enters the branch separation
  CHECK(mixture_success_probability(nu, 0.5 * 2.0, 0.8, 1.5) ==
        doctest::Approx(0.3).epsilon(1e-10));

  CHECK(std::isinf(calibrate_cutoff(1.0, 2.0, 1.5, 0.8, 0.5)));

  // with no signal the model collapses to a single Gaussian quantile
  const double T = 2.0;
  const double nu0 = calibrate_cutoff(0.4, 0.0, T, 1.0, 1.0);
  CHECK(nu0 == doctest::Approx(gaussian_window_quantile(0.4, T)).epsilon(1e-9));

  CHECK_THROWS_AS(calibrate_cutoff(0.0, 1.0, 1.0, 1.0, 1.0), Error);
  CHECK_THROWS_AS(calibrate_cutoff(1.2, 1.0, 1.0, 1.0, 1.0), Error);
  CHECK_THROWS_AS(calibrate_cutoff(0.5, 1.0, -1.0, 1.0, 1.0), Error);
  CHECK_THROWS_AS(calibrate_cutoff(0.5, 1.0, 1.0, 0.0, 1.0), Error);
}

TEST_CASE("selection keeps windowed records including the boundary") {
  std::vector<TrajectoryRecord> recs;
  recs.push_back(make_record(1.0, 0.5, psi_plus_state()));
  recs.push_back(make_record(1.0, -1.0, werner_state(0.8)));  // boundary
  recs.push_back(make_record(1.0, 1.0001, werner_state(1.0)));
  recs.push_back(make_record(1.0, 3.0, psi_plus_state()));

  PostselectionConfig cfg;
  cfg.mode = SelectionMode::FixedCutoff;
  cfg.nu = 1.0;
  cfg.T = 1.0;
  const PostselectionReport rep = select(recs, cfg);
  CHECK(rep.n_total == 4);
  CHECK(rep.n_kept == 2);
  CHECK(rep.kept_fraction == 0.5);
  CHECK_FALSE(rep.empty);
  // werner(0.8) carries concurrence (3 * 0.8 - 1) / 2 = 0.7
  CHECK(rep.mean_concurrence == doctest::Approx(0.85).epsilon(1e-9));
  CHECK(rep.concurrence_of_mean <= rep.mean_concurrence + 1e-9);
  CHECK(rep.concurrence_of_mean > 0.0);
  CHECK(std::abs(rep.mean_state.trace().real() - 1.0) < 1e-12);
  CHECK(rep.se_concurrence > 0.0);
  CHECK(rep.nu == 1.0);
}

TEST_CASE("an infinite window keeps everything, a zero window almost nothing") {
  std::vector<TrajectoryRecord> recs;
  recs.push_back(make_record(1.0, 0.7, werner_state(0.9)));
  recs.push_back(make_record(1.0, -12.0, werner_state(0.9)));

  PostselectionConfig cfg;
  cfg.mode = SelectionMode::FixedCutoff;
  cfg.nu = inf;
  cfg.T = 1.0;
  CHECK(select(recs, cfg).kept_fraction == 1.0);

  cfg.nu = 0.0;
  const PostselectionReport none = select(recs, cfg);
  CHECK(none.n_kept == 0);
  CHECK(none.kept_fraction == 0.0);
  CHECK(none.empty);

  // an exact zero crossing still counts: |J| <= 0 keeps J = 0
  recs.push_back(make_record(1.0, 0.0, psi_plus_state()));
  const PostselectionReport one = select(recs, cfg);
  CHECK(one.n_kept == 1);
  CHECK(one.mean_concurrence == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("target-success mode applies the calibrated cutoff") {
  std::vector<TrajectoryRecord> recs;
  recs.push_back(make_record(2.0, 0.3, werner_state(0.5)));

  PostselectionConfig cfg;
  cfg.mode = SelectionMode::TargetSuccess;
  cfg.p_succ_target = 0.25;
  cfg.T = 2.0;
  cfg.Gamma_eff = 1.0;
  cfg.eta = 0.9;
  cfg.tau = 0.8;
  const PostselectionReport rep = select(recs, cfg);
  CHECK(rep.nu ==
        doctest::Approx(calibrate_cutoff(0.25, 1.0, 2.0, 0.9, 0.8))
            .epsilon(1e-12));
}

TEST_CASE("selection rejects malformed requests") {
  std::vector<TrajectoryRecord> recs;
  recs.push_back(make_record(2.0, 0.3, werner_state(0.5)));

  PostselectionConfig cfg;
  cfg.mode = SelectionMode::FixedCutoff;
  cfg.nu = 1.0;
  cfg.T = 1.7;  // nearest snapshot is 2.0, far beyond dt / 2
  CHECK_THROWS_AS(select(recs, cfg), Error);

  cfg.T = -1.0;
  CHECK_THROWS_AS(cfg.validate(), Error);
  cfg.T = 2.0;
  cfg.nu = -0.5;
  CHECK_THROWS_AS(cfg.validate(), Error);

  cfg.nu = 1.0;
  CHECK_THROWS_AS(select({}, cfg), Error);

  cfg.mode = SelectionMode::TargetSuccess;
  cfg.p_succ_target = 0.0;
  CHECK_THROWS_AS(cfg.validate(), Error);

  // kept trajectories must carry state snapshots
  TrajectoryRecord bare;
  bare.times = {2.0};
  bare.current = {0.0};
  bare.J = {0.1};
  bare.dt = 1e-3;
  cfg.mode = SelectionMode::FixedCutoff;
  cfg.nu = 1.0;
  cfg.p_succ_target = 0.5;
  CHECK_THROWS_AS(select({bare}, cfg), Error);
}

TEST_CASE("single survivors report no scatter estimate") {
  std::vector<TrajectoryRecord> recs;
  recs.push_back(make_record(1.0, 0.1, werner_state(0.9)));
  recs.push_back(make_record(1.0, 5.0, werner_state(0.2)));
  PostselectionConfig cfg;
  cfg.mode = SelectionMode::FixedCutoff;
  cfg.nu = 1.0;
  cfg.T = 1.0;
  const PostselectionReport rep = select(recs, cfg);
  CHECK(rep.n_kept == 1);
  CHECK(rep.se_concurrence == 0.0);
  CHECK(rep.concurrence_of_mean ==
        doctest::Approx(rep.mean_concurrence).epsilon(1e-12));
}

TEST_CASE("kept fraction tracks the target under pure collective measurement") {
  SmeRates s;
  s.Gamma = 1.0;
  TimeSweepConfig sweep;
  sweep.sme.rates = rates_from_sme(s);
  sweep.sme.seed = 314;
  sweep.sme.n_traj = 400;
  sweep.T_grid = {1.0};
  sweep.p_succ_target = 0.3;
  const std::vector<CurvePoint> curve =
      concurrence_vs_time(plus_plus_state(), sweep);
  REQUIRE(curve.size() == 1);
  // the diagonal is untouched by collective dephasing, so the signal model is
  // exact and the spread is binomial: 3 sigma at n = 400 is 0.069
  CHECK(std::abs(curve[0].kept_fraction - 0.3) < 0.08);
  CHECK(curve[0].n_kept ==
        static_cast<int>(std::lround(curve[0].kept_fraction * 400)));
  CHECK(curve[0].nu > 0.0);
  CHECK(std::isfinite(curve[0].nu));
}

TEST_CASE("entanglement rises and falls along the selection-time curve") {
  SmeRates s;
  s.gamma_1 = 0.1;
  s.gamma_2 = 0.1;
  s.Gamma = 1.0;
  TimeSweepConfig sweep;
  sweep.sme.rates = rates_from_sme(s);
  sweep.sme.seed = 2718;
  sweep.sme.n_traj = 200;
  sweep.T_grid = {0.05, 0.5, 1.0, 2.0, 4.0};
  sweep.p_succ_target = 0.2;
  const std::vector<CurvePoint> curve =
      concurrence_vs_time(plus_plus_state(), sweep);
  REQUIRE(curve.size() == 5);
  for (std::size_t i = 0; i < curve.size(); ++i) {
    CHECK(std::abs(curve[i].T - sweep.T_grid[i]) < 1e-3);
    CHECK(curve[i].C_mean >= 0.0);
    CHECK(curve[i].C_mean <= 1.0);
    CHECK(curve[i].C_of_mean <= curve[i].C_mean + 1e-9);
  }
  const auto [T_opt, C_opt] = pick_optimum(curve);
  CHECK(C_opt > curve.front().C_mean);   // too early: nothing purified yet
  CHECK(C_opt > curve.back().C_mean);    // too late: dephasing won
  CHECK(T_opt > sweep.T_grid.front());
  CHECK(T_opt < sweep.T_grid.back());
}

TEST_CASE("optimum picking breaks ties toward earlier times") {
  std::vector<CurvePoint> curve(3);
  curve[0].T = 1.0;
  curve[0].C_mean = 0.3;
  curve[1].T = 2.0;
  curve[1].C_mean = 0.3;
  curve[2].T = 3.0;
  curve[2].C_mean = 0.1;
  const auto [T_opt, C_opt] = pick_optimum(curve);
  CHECK(T_opt == 1.0);
  CHECK(C_opt == 0.3);
  CHECK_THROWS_AS(pick_optimum({}), Error);
}

TEST_CASE("a single-point grid reduces the sweep to one selection") {
  SmeRates s;
  s.Gamma = 0.8;
  TimeSweepConfig sweep;
  sweep.sme.rates = rates_from_sme(s);
  sweep.sme.seed = 99;
  sweep.sme.n_traj = 50;
  sweep.T_grid = {0.7};
  sweep.p_succ_target = 0.5;
  const auto [T_opt, C_opt] = optimize_over_time(plus_plus_state(), sweep);
  CHECK(std::abs(T_opt - 0.7) < 1e-3);
  CHECK(C_opt >= 0.0);

  sweep.T_grid = {1.0, 0.5};  // not increasing
  CHECK_THROWS_AS(concurrence_vs_time(plus_plus_state(), sweep), Error);
  sweep.T_grid.clear();
  CHECK_THROWS_AS(concurrence_vs_time(plus_plus_state(), sweep), Error);
}
