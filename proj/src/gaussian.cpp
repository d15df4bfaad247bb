#include "gaussian.hpp"

#include <cmath>

#include <Eigen/Eigenvalues>
#include <unsupported/Eigen/KroneckerProduct>

#include "error.hpp"

namespace omtsim {

namespace {

using Eigen::Matrix4d;
using Eigen::Vector4d;

// Solves M X + X M^T = -RHS by vectorization; column-major stacking matches
// Eigen's storage, so vec(M X) = (I (x) M) vec(X) and vec(X M^T) = (M (x) I) vec(X).
Matrix4d solve_sylvester_symmetric(const Matrix4d& M, const Matrix4d& rhs) {
  Eigen::Matrix<double, 16, 16> K =
      Eigen::kroneckerProduct(Eigen::Matrix4d::Identity(), M) +
      Eigen::kroneckerProduct(M, Eigen::Matrix4d::Identity());
  Eigen::Matrix<double, 16, 1> b =
      -Eigen::Map<const Eigen::Matrix<double, 16, 1>>(rhs.data());
  Eigen::PartialPivLU<Eigen::Matrix<double, 16, 16>> lu(K);
  Eigen::Matrix<double, 16, 1> x = lu.solve(b);
  require(x.allFinite(), ErrorCode::SolverFailure,
          "singular Kronecker system in Lyapunov solve");
  Matrix4d X = Eigen::Map<Matrix4d>(x.data());
  return 0.5 * (X + X.transpose());
}

Matrix4d riccati_rhs(const TransducerSystem& sys, const Matrix4d& G) {
  const Vector4d k = G * sys.c - sys.sigma * sys.m;
  return sys.A * G + G * sys.A.transpose() + 2.0 * sys.N - 2.0 * k * k.transpose();
}

Matrix4d lyapunov_rhs(const TransducerSystem& sys, const Matrix4d& G) {
  return sys.A * G + G * sys.A.transpose() + 2.0 * sys.N;
}

double spectral_radius(const Matrix4d& A) {
  Eigen::EigenSolver<Matrix4d> es(A, /*computeEigenvectors=*/false);
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

}  // namespace

TransducerSystem build_system(const PhysicalParams& p, double phi) {
  p.validate();
  TransducerSystem sys;
  const double kap = p.kappa, g = p.g, wm = p.omega_m, gam = p.gamma;

  sys.A << -kap / 2, 0, 0, 0,
            0, -kap / 2, -2 * g, 0,
            0, 0, -gam / 2, wm,
           -2 * g, 0, -wm, -gam / 2;

  sys.N = Matrix4d::Zero();
  sys.N(0, 0) = sys.N(1, 1) = kap / 2;
  sys.N(2, 2) = sys.N(3, 3) = gam * (p.n_bar + 0.5);

  // Output coupling carries sqrt(kappa); with the components of c expressed in
  // the quadrature basis this leaves sqrt(kappa/2) in front.
  const double pref = std::sqrt(kap / 2.0);
  sys.c << pref * std::cos(phi), -pref * std::sin(phi), 0, 0;
  sys.m << pref * std::sin(phi), pref * std::cos(phi), 0, 0;

  sys.sigma = Matrix4d::Zero();
  sys.sigma(0, 1) = sys.sigma(2, 3) = 1;
  sys.sigma(1, 0) = sys.sigma(3, 2) = -1;

  sys.s << 0, 0, std::sqrt(2.0) * p.chi, 0;
  return sys;
}

Eigen::Matrix4d solve_lyapunov_steady(const Matrix4d& A, const Matrix4d& N) {
  return solve_sylvester_symmetric(A, 2.0 * N);
}

Eigen::Matrix4d propagate_covariance(const TransducerSystem& sys,
                                     const Matrix4d& Gamma0, double t,
                                     bool conditional, double dt) {
  require(t >= 0, ErrorCode::InvalidArgument, "propagation time must be >= 0");
  if (t == 0) return Gamma0;
  if (dt <= 0) dt = 0.1 / spectral_radius(sys.A);
  const long n = static_cast<long>(std::ceil(t / dt));
  dt = t / static_cast<double>(n);

  auto rhs = [&](const Matrix4d& G) {
    return conditional ? riccati_rhs(sys, G) : lyapunov_rhs(sys, G);
  };
  Matrix4d G = Gamma0;
  for (long i = 0; i < n; ++i) {
    const Matrix4d k1 = rhs(G);
    const Matrix4d k2 = rhs(G + 0.5 * dt * k1);
    const Matrix4d k3 = rhs(G + 0.5 * dt * k2);
    const Matrix4d k4 = rhs(G + dt * k3);
    G += (dt / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4);
    G = 0.5 * (G + G.transpose()).eval();
  }
  require(G.allFinite(), ErrorCode::SolverFailure,
          "covariance propagation diverged");
  return G;
}

Eigen::Matrix4d solve_riccati_steady(const TransducerSystem& sys, double tol) {
  const double scale = std::max(1.0, (2.0 * sys.N).norm());
  auto residual = [&](const Matrix4d& G) {
    return riccati_rhs(sys, G).norm() / scale;
  };

  Matrix4d G = solve_lyapunov_steady(sys.A, sys.N);
  // Newton step: the correction D solves Q D + D Q^T = -F(G) with
  // Q = A - 2 (G c - sigma m) c^T, the closed-loop drift at the current iterate.
  auto newton = [&](Matrix4d& X) -> bool {
    double prev = residual(X);
    for (int it = 0; it < 60; ++it) {
      if (prev <= tol) return true;
      const Vector4d k = X * sys.c - sys.sigma * sys.m;
      const Matrix4d Q = sys.A - 2.0 * k * sys.c.transpose();
      Matrix4d D;
      try {
        D = solve_sylvester_symmetric(Q, riccati_rhs(sys, X));
      } catch (const Error&) {
        return false;
      }
      X = (0.5 * ((X + D) + (X + D).transpose())).eval();
      const double cur = residual(X);
      if (!std::isfinite(cur) || cur > 10.0 * prev + tol) return false;
      prev = cur;
    }
    return prev <= tol;
  };

  if (newton(G)) return G;

  // Stalled Newton: relax toward the attracting solution in pseudo-time, then
  // polish again.
  G = solve_lyapunov_steady(sys.A, sys.N);
  const double horizon = 50.0 / std::min({sys.A.diagonal().cwiseAbs().minCoeff(),
                                          spectral_radius(sys.A)});
  G = propagate_covariance(sys, G, horizon, /*conditional=*/true);
  require(newton(G), ErrorCode::SolverFailure,
          "Riccati iteration failed to converge");
  return G;
}

EliminationResult eliminate(const PhysicalParams& p, double phi) {
  const TransducerSystem sys = build_system(p, phi);
  EliminationResult out;
  out.cov_unconditional = solve_lyapunov_steady(sys.A, sys.N);
  out.cov_conditional = solve_riccati_steady(sys);

  Eigen::PartialPivLU<Matrix4d> luA(sys.A);
  const Vector4d k = out.cov_conditional * sys.c - sys.sigma * sys.m;
  // Lambda = (G_c - i sigma) Q^{-T} c + A^{-1}(G_c c - sigma m)
  const Matrix4d Q = sys.A - 2.0 * k * sys.c.transpose();
  const Vector4d x = Q.transpose().partialPivLu().solve(sys.c);
  const Vector4d lam_re = out.cov_conditional * x + luA.solve(k);
  const Vector4d lam_im = -sys.sigma * x;
  out.lambda = lam_re + std::complex<double>(0, 1) * lam_im;

  // Measurement operator is (i Lambda^T s) sigma_z; its squared magnitude is
  // the conditioning rate.
  const std::complex<double> lam_dot_s(lam_re.dot(sys.s), lam_im.dot(sys.s));
  out.amplitude = std::complex<double>(0, 1) * lam_dot_s;
  out.gamma_meas = std::norm(out.amplitude);

  // The deterministic double-commutator term carries -s^T A^{-1} G_u s in
  // front of the sigma_z dissipator; the anticommutator part vanishes for a
  // qubit because sigma_z^2 = 1.
  out.gamma_total = -sys.s.dot(luA.solve(out.cov_unconditional * sys.s));
  out.gamma_excess = out.gamma_total - out.gamma_meas;
  require(out.gamma_meas >= 0 && out.gamma_total >= 0, ErrorCode::SolverFailure,
          "negative rate from elimination");
  return out;
}

}  // namespace omtsim
