#include "params.hpp"

#include <cmath>

#include "error.hpp"
#include "units.hpp"

namespace omtsim {

SignMode sign_mode_from_string(const std::string& s) {
  if (s == "total_spin" || s == "sum") return SignMode::TotalSpin;
  if (s == "spin_difference" || s == "difference") return SignMode::SpinDifference;
  fail(ErrorCode::InvalidArgument, "unknown sign mode: " + s);
}

std::string to_string(SignMode m) {
  return m == SignMode::TotalSpin ? "total_spin" : "spin_difference";
}

void PhysicalParams::validate() const {
  require(chi > 0, ErrorCode::InvalidArgument, "chi must be positive");
  require(omega_m > 0, ErrorCode::InvalidArgument, "omega_m must be positive");
  require(gamma > 0, ErrorCode::InvalidArgument, "gamma must be positive");
  require(n_bar >= 0, ErrorCode::InvalidArgument, "n_bar must be non-negative");
  require(g > 0, ErrorCode::InvalidArgument, "g must be positive");
  require(kappa > 0, ErrorCode::InvalidArgument, "kappa must be positive");
  require(T1 > 0, ErrorCode::InvalidArgument, "T1 must be positive");
  require(T2 > 0, ErrorCode::InvalidArgument, "T2 must be positive");
  if (g0) require(*g0 > 0, ErrorCode::InvalidArgument, "g0 must be positive");
  if (lambda_opt)
    require(*lambda_opt > 0, ErrorCode::InvalidArgument, "lambda_opt must be positive");
  if (m_eff) require(*m_eff > 0, ErrorCode::InvalidArgument, "m_eff must be positive");
  if (x_zpf) require(*x_zpf > 0, ErrorCode::InvalidArgument, "x_zpf must be positive");
  if (m_eff && x_zpf) {
    const double ref = std::sqrt(hbar / (2.0 * *m_eff * omega_m));
    require(std::abs(*x_zpf - ref) <= 0.01 * ref, ErrorCode::InvalidArgument,
            "x_zpf inconsistent with m_eff and omega_m");
  }
}

double PhysicalParams::zero_point_fluctuation() const {
  if (x_zpf) return *x_zpf;
  if (m_eff) return std::sqrt(hbar / (2.0 * *m_eff * omega_m));
  fail(ErrorCode::InvalidArgument, "need x_zpf or m_eff to get zero-point motion");
}

void ChannelParams::validate() const {
  require(tau > 0 && tau <= 1.0, ErrorCode::InvalidArgument, "tau must be in (0, 1]");
  require(eta > 0 && eta <= 1.0, ErrorCode::InvalidArgument, "eta must be in (0, 1]");
  require(std::isfinite(phi), ErrorCode::InvalidArgument, "phi must be finite");
}

namespace {

double gamma_meas_of(const PhysicalParams& p) {
  return 16.0 * p.chi * p.chi * p.g * p.g / (p.kappa * p.omega_m * p.omega_m);
}

double gamma_mech_of(const PhysicalParams& p) {
  return p.chi * p.chi * p.gamma * (2.0 * p.n_bar + 1.0) / (p.omega_m * p.omega_m);
}

}  // namespace

EffectiveRates derive_rates(const PhysicalParams& p, const ChannelParams& ch,
                            T2Convention conv) {
  p.validate();
  ch.validate();
  EffectiveRates r;
  r.gamma_meas = gamma_meas_of(p);
  r.gamma_mech_1 = gamma_mech_of(p);
  // Node 2 runs at chi_2 = sqrt(tau) chi_1 so its measurement record has the
  // same weight as what survives the lossy link from node 1; its mechanical
  // dephasing scales down by tau accordingly.
  r.gamma_mech_2 = ch.tau * r.gamma_mech_1;
  r.gamma_loss_1 = (1.0 - ch.tau) * r.gamma_meas;
  r.gamma_relax = 1.0 / p.T1;
  switch (conv) {
    case T2Convention::FaceValue:
      r.gamma_phi = 1.0 / p.T2;
      break;
    case T2Convention::CoherenceTime: {
      const double rate = 1.0 / p.T2 - 0.5 / p.T1;
      require(rate >= 0, ErrorCode::InvalidArgument,
              "T2 exceeds 2 T1; no non-negative dephasing rate exists");
      r.gamma_phi = 0.5 * rate;
      break;
    }
  }
  r.eta = ch.eta;
  r.tau = ch.tau;
  return r;
}

double measurement_time(const PhysicalParams& p) {
  p.validate();
  return 1.0 / gamma_meas_of(p);
}

double cooperativity(const PhysicalParams& p) {
  p.validate();
  require(p.n_bar > 0, ErrorCode::InvalidArgument,
          "cooperativity undefined at zero thermal occupation");
  return 4.0 * p.g * p.g / (p.kappa * p.gamma * p.n_bar);
}

double driving_power(const PhysicalParams& p) {
  p.validate();
  require(p.g0.has_value(), ErrorCode::InvalidArgument, "driving power needs g0");
  const double lambda = p.lambda_opt.value_or(1550e-9);
  const double omega_l = two_pi * speed_of_light / lambda;
  const double n_cav = (p.g / *p.g0) * (p.g / *p.g0);
  return 0.5 * hbar * omega_l * p.kappa * n_cav;
}

double force_sensitivity(const PhysicalParams& p) {
  p.validate();
  // Force resolvable in the measurement time: S_F = F sqrt(tau_meas) with
  // F = hbar chi / (sqrt(2) x_zpf) the sigma_z-dependent force on the mirror.
  const double x0 = p.zero_point_fluctuation();
  const double force = hbar * p.chi / (std::sqrt(2.0) * x0);
  return force * std::sqrt(1.0 / gamma_meas_of(p));
}

double position_sensitivity(const PhysicalParams& p) {
  // Static displacement producing the same force through the spring constant
  // m omega_m^2; needs the effective mass.
  require(p.m_eff.has_value(), ErrorCode::InvalidArgument,
          "position sensitivity needs m_eff");
  return force_sensitivity(p) / (*p.m_eff * p.omega_m * p.omega_m);
}

double chi_parallel_plate(double E_C, double C_g, double V_g, double d,
                          double x_zpf) {
  require(E_C > 0 && C_g > 0 && d > 0 && x_zpf > 0, ErrorCode::InvalidArgument,
          "parallel-plate coupling needs positive E_C, C_g, d, x_zpf");
  return 2.0 * E_C * (C_g * V_g / elementary_charge) * (x_zpf / d);
}

double chi_flux(double B0, double I_p, double l_eff, double x_zpf) {
  require(l_eff > 0 && x_zpf > 0, ErrorCode::InvalidArgument,
          "flux coupling needs positive l_eff and x_zpf");
  return B0 * I_p * l_eff * x_zpf / hbar;
}

double match_coupling(double chi_1, double tau) {
  require(chi_1 > 0, ErrorCode::InvalidArgument, "chi_1 must be positive");
  require(tau > 0 && tau <= 1.0, ErrorCode::InvalidArgument, "tau must be in (0, 1]");
  return std::sqrt(tau) * chi_1;
}

}  // namespace omtsim
