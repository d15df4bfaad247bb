#pragma once

#include <complex>

#include <Eigen/Dense>

#include "params.hpp"

namespace omtsim {

// Quadrature-space description of one transducer (optical mode + mechanical
// mode), ordering r = (X_opt, Y_opt, X_mech, Y_mech) with X = (a + a^dag)/sqrt(2).
// Covariances use Gamma_ij = <{dr_i, dr_j}>, so vacuum is the identity.
struct TransducerSystem {
  Eigen::Matrix4d A;      // drift
  Eigen::Matrix4d N;      // diffusion; Lyapunov form uses 2N
  Eigen::Vector4d c;      // homodyne measurement vector
  Eigen::Vector4d m;      // conjugate measurement vector
  Eigen::Matrix4d sigma;  // symplectic form
  Eigen::Vector4d s;      // qubit-coupling vector
};

TransducerSystem build_system(const PhysicalParams& p,
                              double phi = 1.5707963267948966);

// Steady state of dX = AX + XA^T + 2N. Solved exactly through the 16x16
// Kronecker system; A must be Hurwitz.
Eigen::Matrix4d solve_lyapunov_steady(const Eigen::Matrix4d& A,
                                      const Eigen::Matrix4d& N);

// Steady state of the conditional covariance under continuous homodyne
// detection. Newton iteration started from the unconditional steady state,
// with a pseudo-time integration fallback if Newton stalls.
Eigen::Matrix4d solve_riccati_steady(const TransducerSystem& sys,
                                     double tol = 1e-12);

// Integrates the covariance ODE from Gamma0 for time t. With conditional set,
// includes the measurement back-action (Riccati) term. dt <= 0 picks a step
// from the spectral radius of A.
Eigen::Matrix4d propagate_covariance(const TransducerSystem& sys,
                                     const Eigen::Matrix4d& Gamma0, double t,
                                     bool conditional, double dt = 0.0);

struct EliminationResult {
  double gamma_meas = 0;    // rate in front of the conditioning term
  double gamma_total = 0;   // full qubit dephasing induced by the transducer
  double gamma_excess = 0;  // gamma_total - gamma_meas
  std::complex<double> amplitude;  // scalar of the measurement operator
  Eigen::Vector4cd lambda;         // effective measurement vector
  Eigen::Matrix4d cov_unconditional;
  Eigen::Matrix4d cov_conditional;
};

// Reduces the transducer to an effective qubit measurement: dephasing rate
// from the unconditional covariance, measurement amplitude from the
// conditional one.
EliminationResult eliminate(const PhysicalParams& p,
                            double phi = 1.5707963267948966);

}  // namespace omtsim
