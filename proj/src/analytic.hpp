#pragma once

#include <utility>
#include <vector>

#include "postselect.hpp"
#include "qubit_ops.hpp"
#include "sme.hpp"

namespace omtsim {

// Deterministic counterpart of the conditioned dynamics plus the Gaussian
// pointer picture of the accumulated signal: the record J maps onto a pointer
// coordinate x = J / (2 sqrt(T)); each total-spin (or spin-difference)
// eigenvalue S displaces the pointer by mu S / 2 with mu = 2 sqrt(eta Gamma T).

// 16x16 generator of the unconditional master equation, column-major
// vectorization: vec(A rho B) = (B^T (x) A) vec(rho).
Eigen::Matrix<std::complex<double>, 16, 16> build_liouvillian(
    const SmeRates& rates, SignMode mode = SignMode::TotalSpin);

// rho(T) = expm(L T) applied to rho0.
Mat4c propagate_unconditional(const Mat4c& rho0, const SmeRates& rates,
                              double T, SignMode mode = SignMode::TotalSpin);

struct PointerModel {
  double mu = 0;           // 2 sqrt(eta Gamma T)
  Eigen::Vector4d a;       // per-basis-state displacement, mu S / 2
  SignMode mode = SignMode::TotalSpin;
};

PointerModel make_pointer_model(double Gamma, double eta, double T,
                                SignMode mode = SignMode::TotalSpin);

// Unnormalized D(x) rho D(x) with D(x) = (2/pi)^{1/4} diag[exp(-(x - a_j)^2)];
// integrating its trace over all x gives 1.
Mat4c pointer_project(const Mat4c& rho_T, const PointerModel& pm, double x);

// Closed-form window integral of pointer_project over x in [-nu_x, nu_x]:
// element (j,k) of rho_T is scaled by
//   exp(-(a_j - a_k)^2 / 2) * (erf(sqrt(2)(nu_x - abar)) +
//                              erf(sqrt(2)(nu_x + abar))) / 2,
// abar = (a_j + a_k)/2. nu_x may be +infinity.
Eigen::Matrix4d window_weights(const PointerModel& pm, double nu_x);

// Normalized postselected state and success probability for the window
// |x| <= nu_x. P_succ below 1e-12 is reported as degenerate (empty flag).
struct AnalyticSelection {
  Mat4c state = Mat4c::Zero();
  double p_succ = 0;
  bool degenerate = false;
};
AnalyticSelection postselected_state(const Mat4c& rho_T, const PointerModel& pm,
                                     double nu_x);

// How the cutoff is chosen when a curve targets a success probability.
// Mixture: invert the three-Gaussian signal model (weights 1/4, 1/2, 1/4).
// WindowedTrace: invert the model's own success probability
// sum_j rho_jj(T) W_jj(nu) exactly.
enum class CalibrationMode { Mixture, WindowedTrace };

// Exact inversion of P_succ(nu_x) = target for a given propagated state.
double calibrate_cutoff_exact(const Mat4c& rho_T, const PointerModel& pm,
                              double target);

struct AnalyticCurveOptions {
  SignMode sign_mode = SignMode::TotalSpin;
  CalibrationMode calibration = CalibrationMode::Mixture;
};

// Per grid time: propagate, build the pointer model, calibrate the window to
// p_succ_target, and report the concurrence of the postselected state. Curve
// points reuse the trajectory-curve schema; nu is reported in J units
// (nu_J = 2 sqrt(T) nu_x).
std::vector<CurvePoint> analytic_curve(const Mat4c& rho0, const SmeRates& rates,
                                       double p_succ_target,
                                       const std::vector<double>& T_grid,
                                       const AnalyticCurveOptions& opt = {});

// Same pipeline measuring sigma_z1 - sigma_z2 (targets (|00>+|11>)/sqrt(2)).
std::vector<CurvePoint> spin_difference_variant(
    const Mat4c& rho0, const SmeRates& rates, double p_succ_target,
    const std::vector<double>& T_grid,
    CalibrationMode calibration = CalibrationMode::Mixture);

}  // namespace omtsim
