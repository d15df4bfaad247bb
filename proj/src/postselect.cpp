#include "postselect.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "error.hpp"

namespace omtsim {

void PostselectionConfig::validate() const {
  require(T > 0 && std::isfinite(T), ErrorCode::InvalidArgument,
          "selection time must be positive");
  if (mode == SelectionMode::FixedCutoff) {
    require(nu >= 0, ErrorCode::InvalidArgument, "nu must be >= 0");
  } else {
    require(p_succ_target > 0 && p_succ_target <= 1, ErrorCode::InvalidArgument,
            "p_succ_target must be in (0, 1]");
    require(Gamma_eff >= 0 && eta > 0 && eta <= 1 && tau > 0 && tau <= 1,
            ErrorCode::InvalidArgument, "invalid signal-model parameters");
  }
}

namespace {

// P(|J| <= nu) for J ~ Normal(mean, T).
double window_mass(double nu, double mean, double T) {
  const double w = std::sqrt(2.0 * T);
  return 0.5 * (std::erf((nu - mean) / w) + std::erf((nu + mean) / w));
}

// Index of the snapshot at time t, matched within half a snapshot spacing.
std::size_t snapshot_index(const TrajectoryRecord& rec, double t) {
  require(!rec.times.empty(), ErrorCode::InvalidArgument,
          "trajectory record has no snapshots");
  std::size_t best = 0;
  double best_err = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < rec.times.size(); ++i) {
    const double err = std::abs(rec.times[i] - t);
    if (err < best_err) {
      best_err = err;
      best = i;
    }
  }
  // Snapshots land on step multiples, so a requested time can sit up to dt/2
  // from the nearest stored one; anything worse is a config mistake.
  const double scale =
      std::max({1e-12, 1e-6 * std::max(std::abs(t), rec.times.back()),
                0.5 * rec.dt * (1.0 + 1e-9)});
  require(best_err <= scale, ErrorCode::InvalidArgument,
          "no snapshot stored at the requested selection time");
  return best;
}

}  // namespace

double mixture_success_probability(double nu, double Gamma, double eta,
                                   double T) {
  if (std::isinf(nu)) return 1.0;
  const double mu_j = 4.0 * std::sqrt(eta * Gamma) * T;
  return 0.5 * window_mass(nu, mu_j, T) + 0.5 * window_mass(nu, 0.0, T);
}

double calibrate_cutoff(double p_succ_target, double Gamma_eff, double T,
                        double eta, double tau) {
  require(p_succ_target > 0 && p_succ_target <= 1, ErrorCode::InvalidArgument,
          "p_succ_target must be in (0, 1]");
  require(T > 0, ErrorCode::InvalidArgument, "T must be positive");
  require(Gamma_eff >= 0 && eta > 0 && eta <= 1 && tau > 0 && tau <= 1,
          ErrorCode::InvalidArgument, "invalid signal-model parameters");
  if (p_succ_target == 1.0) return std::numeric_limits<double>::infinity();

  const double Gamma = tau * Gamma_eff;
  auto mass = [&](double nu) {
    return mixture_success_probability(nu, Gamma, eta, T);
  };
  double lo = 0.0;
  double hi = 4.0 * std::sqrt(eta * Gamma) * T + 10.0 * std::sqrt(T);
  for (int i = 0; i < 200 && mass(hi) < p_succ_target; ++i) hi *= 2.0;
  require(mass(hi) >= p_succ_target, ErrorCode::SolverFailure,
          "cutoff calibration target unreachable");
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (mass(mid) < p_succ_target)
      lo = mid;
    else
      hi = mid;
    if (hi - lo <= 1e-14 * std::max(1.0, hi)) break;
  }
  return 0.5 * (lo + hi);
}

PostselectionReport select(const std::vector<TrajectoryRecord>& records,
                           const PostselectionConfig& cfg) {
  cfg.validate();
  require(!records.empty(), ErrorCode::InvalidArgument, "empty ensemble");

  const double nu = cfg.mode == SelectionMode::FixedCutoff
                        ? cfg.nu
                        : calibrate_cutoff(cfg.p_succ_target, cfg.Gamma_eff,
                                           cfg.T, cfg.eta, cfg.tau);

  PostselectionReport rep;
  rep.T = cfg.T;
  rep.nu = nu;
  rep.n_total = static_cast<int>(records.size());

  Mat4c sum = Mat4c::Zero();
  double c_sum = 0, c_sq = 0;
  for (const auto& rec : records) {
    const std::size_t i = snapshot_index(rec, cfg.T);
    if (std::abs(rec.J[i]) > nu) continue;
    require(i < rec.states.size(), ErrorCode::InvalidArgument,
            "trajectory record lacks state snapshots");
    const Mat4c rho = rec.states[i];
    sum += rho;
    const double c = concurrence(rho);
    c_sum += c;
    c_sq += c * c;
    ++rep.n_kept;
  }
  rep.kept_fraction = static_cast<double>(rep.n_kept) / rep.n_total;
  if (rep.n_kept == 0) {
    rep.empty = true;
    return rep;
  }
  rep.empty = false;
  rep.mean_state = hermitize(sum / static_cast<double>(rep.n_kept));
  rep.mean_concurrence = c_sum / rep.n_kept;
  rep.concurrence_of_mean = concurrence(rep.mean_state);
  if (rep.n_kept > 1) {
    const double var =
        (c_sq - rep.n_kept * rep.mean_concurrence * rep.mean_concurrence) /
        (rep.n_kept - 1);
    rep.se_concurrence = std::sqrt(std::max(0.0, var) / rep.n_kept);
  }
  return rep;
}

std::vector<CurvePoint> concurrence_vs_time(const Mat4c& rho0,
                                            const TimeSweepConfig& cfg) {
  require(!cfg.T_grid.empty(), ErrorCode::InvalidArgument, "empty time grid");
  require(std::is_sorted(cfg.T_grid.begin(), cfg.T_grid.end()),
          ErrorCode::InvalidArgument, "time grid must be increasing");

  SmeConfig sme = cfg.sme;
  sme.T = cfg.T_grid.back();
  sme.snapshot_times = cfg.T_grid;
  sme.store_states = true;
  const std::vector<TrajectoryRecord> ensemble = run_ensemble(rho0, sme);

  const SmeRates rates = sme_rates(sme.rates);
  std::vector<CurvePoint> curve;
  curve.reserve(cfg.T_grid.size());
  for (std::size_t i = 0; i < ensemble[0].times.size(); ++i) {
    PostselectionConfig sel;
    sel.mode = SelectionMode::TargetSuccess;
    sel.p_succ_target = cfg.p_succ_target;
    sel.T = ensemble[0].times[i];
    sel.Gamma_eff = rates.Gamma;  // already the lossy joint rate
    sel.eta = rates.eta;
    sel.tau = 1.0;
    const PostselectionReport rep = select(ensemble, sel);
    CurvePoint pt;
    pt.T = rep.T;
    pt.C_mean = rep.mean_concurrence;
    pt.C_of_mean = rep.concurrence_of_mean;
    pt.kept_fraction = rep.kept_fraction;
    pt.nu = rep.nu;
    pt.se_C_mean = rep.se_concurrence;
    pt.n_kept = rep.n_kept;
    curve.push_back(pt);
  }
  return curve;
}

std::pair<double, double> pick_optimum(const std::vector<CurvePoint>& curve) {
  require(!curve.empty(), ErrorCode::InvalidArgument, "empty curve");
  std::size_t best = 0;
  for (std::size_t i = 1; i < curve.size(); ++i)
    if (curve[i].C_mean > curve[best].C_mean) best = i;
  return {curve[best].T, curve[best].C_mean};
}

std::pair<double, double> optimize_over_time(const Mat4c& rho0,
                                             const TimeSweepConfig& cfg) {
  return pick_optimum(concurrence_vs_time(rho0, cfg));
}

}  // namespace omtsim
