#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "params.hpp"
#include "qubit_ops.hpp"

namespace omtsim {

// Coefficients of the conditional two-qubit master equation, already reduced
// to the qubit subspace:
//   d rho = gamma_minus (D[sm1] + D[sm2]) rho dt
//         + gamma_1 D[sz1] rho dt + gamma_2 D[sz2] rho dt
//         + Gamma D[S] rho dt + sqrt(eta Gamma) H[S] rho dW,
// with S the measured collective spin and I dt = 2 sqrt(eta Gamma) <S> dt + dW.
struct SmeRates {
  double gamma_minus = 0;
  double gamma_1 = 0;
  double gamma_2 = 0;
  double Gamma = 0;
  double eta = 1.0;

  void validate() const;
  double total() const { return gamma_minus + gamma_1 + gamma_2 + Gamma; }
};

// Physical chain -> equation coefficients. Loss feeds unrecorded measurement
// back-action into qubit 1; node 2 runs tau-matched.
SmeRates sme_rates(const EffectiveRates& r);

// Embeds bare equation coefficients as an EffectiveRates bundle (tau = 1,
// dephasing carried by the mechanical slots); sme_rates inverts it exactly.
EffectiveRates rates_from_sme(const SmeRates& r);

struct SmeConfig {
  EffectiveRates rates;
  SignMode sign_mode = SignMode::TotalSpin;
  double dt = 0;    // <= 0 selects the stability step automatically
  double T = 0;     // total integration time
  uint64_t seed = 0;
  int n_traj = 1;
  std::vector<double> snapshot_times;  // empty means {T}
  bool store_states = true;

  double resolve_dt() const;
  void validate() const;
};

struct TrajectoryRecord {
  std::vector<double> times;    // realized snapshot times (multiples of dt)
  std::vector<double> current;  // I of the step ending at times[k]; 0 at t=0
  std::vector<double> J;        // accumulated signal, sum of I dt over all steps
  std::vector<Eigen::MatrixXcd> states;  // empty when store_states is off
  uint64_t dW_stream_id = 0;
  double dt = 0;  // realized integration step; snapshot lookups tolerate dt/2
};

// One Euler-Maruyama update with a caller-supplied Wiener increment; returns
// the renormalized state and the current increment I dt sharing that dW.
std::pair<Mat4c, double> step(const Mat4c& rho, const SmeConfig& cfg,
                              double dW);

// Integrates one trajectory; deterministic given (cfg.seed, traj_index).
TrajectoryRecord run_trajectory(const Mat4c& rho0, const SmeConfig& cfg,
                                uint64_t traj_index);

std::vector<TrajectoryRecord> run_ensemble(const Mat4c& rho0,
                                           const SmeConfig& cfg);

// Same machinery for one qubit with S = sigma_z; gamma_2 must be zero.
TrajectoryRecord single_qubit_mode(const Mat2c& rho0, const SmeRates& rates,
                                   double T, double dt, uint64_t seed,
                                   std::vector<double> snapshot_times = {},
                                   uint64_t traj_index = 0);

}  // namespace omtsim
