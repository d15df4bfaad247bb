#pragma once

#include <optional>
#include <string>

namespace omtsim {

enum class SignMode { TotalSpin, SpinDifference };

SignMode sign_mode_from_string(const std::string& s);
std::string to_string(SignMode m);

// Physical parameters of one transducer node. All rates angular (rad/s).
struct PhysicalParams {
  double chi = 0;      // qubit-mechanical coupling
  double omega_m = 0;  // mechanical frequency
  double gamma = 0;    // mechanical linewidth
  double n_bar = 0;    // mean thermal occupation
  double g = 0;        // driven optomechanical coupling
  double kappa = 0;    // optical linewidth
  double T1 = 0;       // qubit relaxation lifetime (s)
  double T2 = 0;       // qubit dephasing lifetime (s)
  std::optional<double> g0;          // bare optomechanical coupling
  std::optional<double> lambda_opt;  // optical wavelength (m)
  std::optional<double> m_eff;       // effective mass (kg)
  std::optional<double> x_zpf;       // zero-point fluctuation (m)

  // Throws on non-positive rates/lifetimes, negative n_bar, or an
  // inconsistent (m_eff, x_zpf) pair (x_zpf must match sqrt(hbar/2 m w) to 1%).
  void validate() const;

  // x_zpf if given, else derived from m_eff; throws if neither is available.
  double zero_point_fluctuation() const;
};

struct ChannelParams {
  double tau = 1.0;  // transmission between nodes, (0, 1]
  double eta = 1.0;  // detection efficiency, (0, 1]
  double phi = 1.5707963267948966;  // local oscillator phase (phase quadrature)
  SignMode sign_mode = SignMode::TotalSpin;

  void validate() const;
};

// How a quoted T2 maps onto the sigma_z dephasing coefficient.
// FaceValue: the equation of motion carries (1/T2) D[sigma_z] literally.
// CoherenceTime: T2 is the total coherence time, so the pure-dephasing
// coefficient is (1/T2 - 1/(2 T1))/2 (D[sigma_z] damps coherences at twice
// its coefficient, and relaxation contributes 1/(2 T1)).
enum class T2Convention { FaceValue, CoherenceTime };

// Effective rates of the two-node measurement chain, node 2 already matched
// (chi_2 = sqrt(tau) chi_1). Angular units throughout.
struct EffectiveRates {
  double gamma_meas = 0;    // per-node measurement rate of node 1
  double gamma_mech_1 = 0;  // mechanical dephasing, node 1
  double gamma_mech_2 = 0;  // mechanical dephasing, node 2 (tau-scaled)
  double gamma_loss_1 = 0;  // loss-induced extra dephasing on node 1
  double gamma_relax = 0;   // 1/T1
  double gamma_phi = 0;     // sigma_z coefficient from T2
  double eta = 1.0;
  double tau = 1.0;

  // Coefficient of the joint D[sz1 + sz2] term.
  double joint_rate() const { return tau * gamma_meas; }
};

EffectiveRates derive_rates(const PhysicalParams& p, const ChannelParams& ch,
                            T2Convention conv = T2Convention::FaceValue);

double measurement_time(const PhysicalParams& p);     // 1/Gamma_meas (s)
double cooperativity(const PhysicalParams& p);        // 4 g^2 / (kappa gamma n_bar)
double driving_power(const PhysicalParams& p);        // W; needs g0 (+ lambda, default 1550 nm)
double force_sensitivity(const PhysicalParams& p);    // N/sqrt(Hz) at omega << omega_m
double position_sensitivity(const PhysicalParams& p); // m/sqrt(Hz), force over spring constant

// Coupling-rate calculators. E_C is angular (energy/hbar); geometric inputs SI.
double chi_parallel_plate(double E_C, double C_g, double V_g, double d,
                          double x_zpf);
double chi_flux(double B0, double I_p, double l_eff, double x_zpf);

// chi_2 = sqrt(tau) chi_1 equalizes the per-node measurement rates.
double match_coupling(double chi_1, double tau);

}  // namespace omtsim
