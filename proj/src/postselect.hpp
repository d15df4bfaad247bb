#pragma once

#include <utility>
#include <vector>

#include "qubit_ops.hpp"
#include "sme.hpp"

namespace omtsim {

enum class SelectionMode { FixedCutoff, TargetSuccess };

struct PostselectionConfig {
  SelectionMode mode = SelectionMode::FixedCutoff;
  double nu = 0;             // cutoff in J units (FixedCutoff)
  double p_succ_target = 0;  // (0, 1] (TargetSuccess)
  double T = 0;              // selection time
  // Signal-model inputs for TargetSuccess calibration.
  double Gamma_eff = 0;  // pre-loss joint measurement rate
  double eta = 1.0;
  double tau = 1.0;

  void validate() const;
};

struct PostselectionReport {
  double kept_fraction = 0;
  Mat4c mean_state = Mat4c::Zero();  // meaningless when empty is set
  double mean_concurrence = 0;       // average of per-trajectory concurrences
  double concurrence_of_mean = 0;    // concurrence of mean_state
  double se_concurrence = 0;         // standard error of mean_concurrence
  int n_kept = 0;
  int n_total = 0;
  double T = 0;
  double nu = 0;      // cutoff actually applied (J units)
  bool empty = true;  // no trajectory survived the window
};

// Keeps trajectories with |J(T)| <= nu (boundary kept) and aggregates the
// survivors. Records must contain a snapshot at cfg.T.
PostselectionReport select(const std::vector<TrajectoryRecord>& records,
                           const PostselectionConfig& cfg);

// Success probability of the window |J| <= nu under the three-Gaussian signal
// model: branch means 4 sqrt(eta Gamma) <S_z> T with <S_z> in {+1, 0, -1},
// weights (1/4, 1/2, 1/4) for the |+>|+> initial state, variance T.
double mixture_success_probability(double nu, double Gamma, double eta,
                                   double T);

// Inverts the mixture model for the cutoff reaching p_succ_target; the lossy
// joint rate is tau * Gamma_eff. target = 1 returns +infinity.
double calibrate_cutoff(double p_succ_target, double Gamma_eff, double T,
                        double eta, double tau);

struct CurvePoint {
  double T = 0;
  double C_mean = 0;     // per-trajectory figure of merit
  double C_of_mean = 0;  // concurrence of the averaged kept state
  double kept_fraction = 0;
  double nu = 0;  // J units
  double se_C_mean = 0;
  int n_kept = 0;
};

struct TimeSweepConfig {
  SmeConfig sme;                // T and snapshot_times filled from T_grid
  std::vector<double> T_grid;   // monotone increasing
  double p_succ_target = 0.1;
};

// Runs one ensemble to max(T_grid) and evaluates selection at every grid time
// post hoc (the conditional dynamics is causal, so early snapshots are
// unaffected by later integration).
std::vector<CurvePoint> concurrence_vs_time(const Mat4c& rho0,
                                            const TimeSweepConfig& cfg);

// Argmax of C_mean over the grid; ties break toward smaller T.
std::pair<double, double> optimize_over_time(const Mat4c& rho0,
                                             const TimeSweepConfig& cfg);

std::pair<double, double> pick_optimum(const std::vector<CurvePoint>& curve);

}  // namespace omtsim
