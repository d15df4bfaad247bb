#pragma once

#include <algorithm>
#include <cmath>
#include <complex>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include "error.hpp"

// Two-qubit operator helpers. Basis ordering is |00>, |01>, |10>, |11> with
// the first label on qubit 1, and sigma_z|0> = +|0>.
namespace omtsim {

using Mat2c = Eigen::Matrix2cd;
using Mat4c = Eigen::Matrix4cd;

inline Eigen::Vector4d sz1_diag() { return {1, 1, -1, -1}; }
inline Eigen::Vector4d sz2_diag() { return {1, -1, 1, -1}; }
inline Eigen::Vector4d spin_sum_diag() { return {2, 0, 0, -2}; }
inline Eigen::Vector4d spin_diff_diag() { return {0, 2, -2, 0}; }

inline Mat4c kron2(const Mat2c& a, const Mat2c& b) {
  Mat4c out;
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j)
      out.block<2, 2>(2 * i, 2 * j) = a(i, j) * b;
  return out;
}

inline Mat2c pauli_x() {
  Mat2c m;
  m << 0, 1, 1, 0;
  return m;
}

inline Mat2c pauli_y() {
  Mat2c m;
  m << 0, std::complex<double>(0, -1), std::complex<double>(0, 1), 0;
  return m;
}

inline Mat2c pauli_z() {
  Mat2c m;
  m << 1, 0, 0, -1;
  return m;
}

inline Mat4c plus_plus_state() { return Mat4c::Constant(0.25); }

// (|01> + |10>)/sqrt(2), the maximally entangled target of the joint
// total-spin measurement.
inline Mat4c psi_plus_state() {
  Mat4c rho = Mat4c::Zero();
  rho(1, 1) = rho(1, 2) = rho(2, 1) = rho(2, 2) = 0.5;
  return rho;
}

// p |Psi-><Psi-| + (1-p)/4 I with |Psi-> = (|01> - |10>)/sqrt(2).
inline Mat4c werner_state(double p) {
  require(p >= 0 && p <= 1, ErrorCode::InvalidArgument, "werner p not in [0,1]");
  Mat4c rho = (1.0 - p) / 4.0 * Mat4c::Identity();
  rho(1, 1) += p / 2.0;
  rho(2, 2) += p / 2.0;
  rho(1, 2) -= p / 2.0;
  rho(2, 1) -= p / 2.0;
  return rho;
}

inline Mat4c hermitize(const Mat4c& rho) { return 0.5 * (rho + rho.adjoint()); }

inline double trace_distance(const Mat4c& a, const Mat4c& b) {
  const Mat4c d = hermitize(a - b);
  Eigen::SelfAdjointEigenSolver<Mat4c> es(d);
  return 0.5 * es.eigenvalues().cwiseAbs().sum();
}

inline double purity(const Mat4c& rho) {
  return (rho * rho).trace().real();
}

// Entanglement of formation measure for two qubits: the spin-flipped overlap
// spectrum lambda_1 >= ... >= lambda_4 gives max(0, l1 - l2 - l3 - l4).
// Rejects inputs that are not density matrices; the tolerances admit the
// slightly non-positive snapshots an explicit stochastic integrator produces.
inline double concurrence(const Mat4c& rho) {
  require((rho - rho.adjoint()).cwiseAbs().maxCoeff() < 1e-8,
          ErrorCode::InvalidArgument, "concurrence input is not Hermitian");
  require(std::abs(rho.trace().real() - 1.0) < 1e-6 &&
              std::abs(rho.trace().imag()) < 1e-9,
          ErrorCode::InvalidArgument, "concurrence input is not unit trace");
  const Eigen::SelfAdjointEigenSolver<Mat4c> es(hermitize(rho));
  require(es.info() == Eigen::Success && es.eigenvalues().minCoeff() > -1e-7,
          ErrorCode::InvalidArgument,
          "concurrence input is not positive semidefinite");
  // The overlap spectrum of rho * rho_tilde matches the Hermitian product
  // sqrt(rho) rho_tilde sqrt(rho), which is stable to diagonalize even for
  // collapsed near-pure states where the non-normal form is nilpotent.
  const Eigen::Vector4d sq = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  const Mat4c root =
      es.eigenvectors() * sq.asDiagonal() * es.eigenvectors().adjoint();
  const Mat4c yy = kron2(pauli_y(), pauli_y());
  const Mat4c rho_tilde = yy * rho.conjugate() * yy;
  const Eigen::SelfAdjointEigenSolver<Mat4c> ps(
      hermitize(root * rho_tilde * root));
  require(ps.info() == Eigen::Success, ErrorCode::SolverFailure,
          "eigen decomposition failed in concurrence");
  const Eigen::Vector4d lam = ps.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return std::max(0.0, 2.0 * lam(3) - lam.sum());
}

}  // namespace omtsim
