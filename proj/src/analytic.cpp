#include "analytic.hpp"

#include <cmath>
#include <limits>

#include <unsupported/Eigen/KroneckerProduct>
#include <unsupported/Eigen/MatrixFunctions>

#include "error.hpp"

namespace omtsim {

namespace {

using Mat16c = Eigen::Matrix<std::complex<double>, 16, 16>;
using Vec16c = Eigen::Matrix<std::complex<double>, 16, 1>;

Mat16c dissipator(const Mat4c& L) {
  const Mat4c LdL = L.adjoint() * L;
  return Eigen::kroneckerProduct(L.conjugate(), L).eval() -
         0.5 * Eigen::kroneckerProduct(Mat4c::Identity(), LdL).eval() -
         0.5 * Eigen::kroneckerProduct(LdL.transpose(), Mat4c::Identity()).eval();
}

Mat4c sigma_minus_1() {
  Mat2c sm;
  sm << 0, 1, 0, 0;  // lowers |1> (the -1 eigenstate of sigma_z) to |0>
  return kron2(sm, Mat2c::Identity());
}

Mat4c sigma_minus_2() {
  Mat2c sm;
  sm << 0, 1, 0, 0;
  return kron2(Mat2c::Identity(), sm);
}

}  // namespace

Mat16c build_liouvillian(const SmeRates& rates, SignMode mode) {
  rates.validate();
  const Eigen::Vector4d S =
      mode == SignMode::TotalSpin ? spin_sum_diag() : spin_diff_diag();
  Mat16c L = Mat16c::Zero();
  L += rates.gamma_minus * dissipator(sigma_minus_1());
  L += rates.gamma_minus * dissipator(sigma_minus_2());
  L += rates.gamma_1 * dissipator(sz1_diag().cast<std::complex<double>>().asDiagonal());
  L += rates.gamma_2 * dissipator(sz2_diag().cast<std::complex<double>>().asDiagonal());
  L += rates.Gamma * dissipator(S.cast<std::complex<double>>().asDiagonal());
  return L;
}

Mat4c propagate_unconditional(const Mat4c& rho0, const SmeRates& rates,
                              double T, SignMode mode) {
  require(T >= 0 && std::isfinite(T), ErrorCode::InvalidArgument,
          "propagation time must be finite and >= 0");
  if (T == 0) return rho0;
  const Mat16c P = (build_liouvillian(rates, mode) * T).exp();
  const Vec16c v = P * Eigen::Map<const Vec16c>(rho0.data());
  Mat4c rho = Eigen::Map<const Mat4c>(v.data());
  return hermitize(rho);
}

PointerModel make_pointer_model(double Gamma, double eta, double T,
                                SignMode mode) {
  require(Gamma >= 0 && T >= 0, ErrorCode::InvalidArgument,
          "Gamma and T must be >= 0");
  require(eta >= 0 && eta <= 1, ErrorCode::InvalidArgument,
          "eta must be in [0, 1]");
  PointerModel pm;
  pm.mode = mode;
  pm.mu = 2.0 * std::sqrt(eta * Gamma * T);
  const Eigen::Vector4d S =
      mode == SignMode::TotalSpin ? spin_sum_diag() : spin_diff_diag();
  pm.a = 0.5 * pm.mu * S;
  return pm;
}

Mat4c pointer_project(const Mat4c& rho_T, const PointerModel& pm, double x) {
  const double pref = std::sqrt(std::sqrt(2.0 / M_PI));  // (2/pi)^{1/4}
  Eigen::Vector4d d;
  for (int j = 0; j < 4; ++j)
    d(j) = pref * std::exp(-(x - pm.a(j)) * (x - pm.a(j)));
  return d.asDiagonal() * rho_T * d.asDiagonal();
}

Eigen::Matrix4d window_weights(const PointerModel& pm, double nu_x) {
  require(nu_x >= 0, ErrorCode::InvalidArgument, "nu must be >= 0");
  Eigen::Matrix4d W;
  for (int j = 0; j < 4; ++j)
    for (int k = 0; k < 4; ++k) {
      const double diff = pm.a(j) - pm.a(k);
      const double abar = 0.5 * (pm.a(j) + pm.a(k));
      double mass;
      if (std::isinf(nu_x)) {
        mass = 1.0;
      } else {
        const double r2 = std::sqrt(2.0);
        mass = 0.5 * (std::erf(r2 * (nu_x - abar)) + std::erf(r2 * (nu_x + abar)));
      }
      W(j, k) = std::exp(-0.5 * diff * diff) * mass;
    }
  return W;
}

AnalyticSelection postselected_state(const Mat4c& rho_T, const PointerModel& pm,
                                     double nu_x) {
  const Eigen::Matrix4d W = window_weights(pm, nu_x);
  Mat4c raw = rho_T.cwiseProduct(W.cast<std::complex<double>>());
  AnalyticSelection out;
  out.p_succ = raw.real().trace();
  if (out.p_succ < 1e-12) {
    out.degenerate = true;
    return out;
  }
  out.state = hermitize(raw / out.p_succ);
  return out;
}

double calibrate_cutoff_exact(const Mat4c& rho_T, const PointerModel& pm,
                              double target) {
  require(target > 0 && target <= 1, ErrorCode::InvalidArgument,
          "target must be in (0, 1]");
  if (target == 1.0) return std::numeric_limits<double>::infinity();
  auto mass = [&](double nu_x) {
    double p = 0;
    for (int j = 0; j < 4; ++j) {
      const double r2 = std::sqrt(2.0);
      p += rho_T(j, j).real() * 0.5 *
           (std::erf(r2 * (nu_x - pm.a(j))) + std::erf(r2 * (nu_x + pm.a(j))));
    }
    return p;
  };
  double lo = 0.0;
  double hi = std::abs(pm.mu) + 10.0;
  for (int i = 0; i < 200 && mass(hi) < target; ++i) hi *= 2.0;
  require(mass(hi) >= target, ErrorCode::SolverFailure,
          "window calibration target unreachable");
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (mass(mid) < target)
      lo = mid;
    else
      hi = mid;
    if (hi - lo <= 1e-15 * std::max(1.0, hi)) break;
  }
  return 0.5 * (lo + hi);
}

std::vector<CurvePoint> analytic_curve(const Mat4c& rho0, const SmeRates& rates,
                                       double p_succ_target,
                                       const std::vector<double>& T_grid,
                                       const AnalyticCurveOptions& opt) {
  require(!T_grid.empty(), ErrorCode::InvalidArgument, "empty time grid");
  require(p_succ_target > 0 && p_succ_target <= 1, ErrorCode::InvalidArgument,
          "p_succ_target must be in (0, 1]");
  std::vector<CurvePoint> curve;
  curve.reserve(T_grid.size());
  for (double T : T_grid) {
    require(T > 0, ErrorCode::InvalidArgument, "grid times must be positive");
    const Mat4c rho_T = propagate_unconditional(rho0, rates, T, opt.sign_mode);
    const PointerModel pm =
        make_pointer_model(rates.Gamma, rates.eta, T, opt.sign_mode);

    double nu_x;
    if (opt.calibration == CalibrationMode::Mixture) {
      // The trajectory pipeline calibrates in J units; x = J / (2 sqrt(T)).
      const double nu_j =
          calibrate_cutoff(p_succ_target, rates.Gamma, T, rates.eta, 1.0);
      nu_x = std::isinf(nu_j) ? nu_j : nu_j / (2.0 * std::sqrt(T));
    } else {
      nu_x = calibrate_cutoff_exact(rho_T, pm, p_succ_target);
    }

    const AnalyticSelection sel = postselected_state(rho_T, pm, nu_x);
    CurvePoint pt;
    pt.T = T;
    pt.nu = std::isinf(nu_x) ? nu_x : 2.0 * std::sqrt(T) * nu_x;
    pt.kept_fraction = sel.p_succ;
    if (!sel.degenerate) {
      const double c = concurrence(sel.state);
      pt.C_mean = c;
      pt.C_of_mean = c;
    }
    curve.push_back(pt);
  }
  return curve;
}

std::vector<CurvePoint> spin_difference_variant(
    const Mat4c& rho0, const SmeRates& rates, double p_succ_target,
    const std::vector<double>& T_grid, CalibrationMode calibration) {
  AnalyticCurveOptions opt;
  opt.sign_mode = SignMode::SpinDifference;
  opt.calibration = calibration;
  return analytic_curve(rho0, rates, p_succ_target, T_grid, opt);
}

}  // namespace omtsim
