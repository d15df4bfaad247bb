#include "qubit_ops.hpp"

#include <cmath>
#include <complex>

#include "doctest.h"
#include "error.hpp"
#include "rng.hpp"

using namespace omtsim;

namespace {

using std::complex;

// Random single-qubit unitary from the QR factorization of a Gaussian matrix.
Mat2c random_unitary(NormalRng& rng) {
  Mat2c g;
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j)
      g(i, j) = complex<double>(rng.gaussian(), rng.gaussian());
  Eigen::HouseholderQR<Mat2c> qr(g);
  Mat2c q = qr.householderQ();
  // fix the phase convention so Q is unique (not that it matters here)
  Mat2c r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (int j = 0; j < 2; ++j)
    if (std::real(r(j, j)) < 0) q.col(j) *= -1.0;
  return q;
}

Mat4c random_density(NormalRng& rng) {
  Mat4c g;
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j)
      g(i, j) = complex<double>(rng.gaussian(), rng.gaussian());
  Mat4c rho = g * g.adjoint();
  return rho / rho.trace();
}

}  // namespace

TEST_CASE("werner states cross the entanglement threshold at p = 1/3") {
  CHECK(concurrence(werner_state(0.0)) == doctest::Approx(0.0).epsilon(1e-10));
  CHECK(std::abs(concurrence(werner_state(1.0 / 3.0))) < 1e-10);
  CHECK(concurrence(werner_state(0.6)) ==
        doctest::Approx(0.4).epsilon(1e-10));
  CHECK(concurrence(werner_state(1.0)) ==
        doctest::Approx(1.0).epsilon(1e-10));
  // below threshold the formula max(0, (3p-1)/2) clamps at zero
  CHECK(concurrence(werner_state(0.2)) == 0.0);
}

TEST_CASE("bell states are maximally entangled and product states are not") {
  CHECK(concurrence(psi_plus_state()) == doctest::Approx(1.0).epsilon(1e-12));
  // exact zeros come back as the square root of eigenvalue noise, so the
  // practical floor is around 1e-9
  CHECK(concurrence(plus_plus_state()) < 1e-8);
  Mat4c ground = Mat4c::Zero();
  ground(0, 0) = 1.0;
  CHECK(concurrence(ground) < 1e-12);
}

TEST_CASE("an equal-magnitude quarter matrix carries no entanglement") {
  // populations on the spin-0 pair {01, 10} with full cross coherence look
  // entangled, but adding the same weight on 00 and 11 without coherence
  // disentangles the mixture exactly
  Mat4c rho = Mat4c::Zero();
  rho(0, 0) = rho(3, 3) = 0.25;
  rho(1, 1) = rho(2, 2) = 0.25;
  rho(1, 2) = rho(2, 1) = 0.25;
  CHECK(concurrence(rho) < 1e-12);
}

TEST_CASE("concurrence is invariant under local unitaries") {
  NormalRng rng(derive_stream(123, 0));
  const Mat4c base = werner_state(0.7);
  const double c0 = concurrence(base);
  for (int trial = 0; trial < 100; ++trial) {
    const Mat2c u1 = random_unitary(rng);
    const Mat2c u2 = random_unitary(rng);
    const Mat4c u = kron2(u1, u2);
    CHECK(std::abs(concurrence(u * base * u.adjoint()) - c0) < 1e-9);
  }
}

TEST_CASE("concurrence stays within the unit interval on random states") {
  NormalRng rng(derive_stream(456, 0));
  for (int trial = 0; trial < 50; ++trial) {
    const double c = concurrence(random_density(rng));
    CHECK(c >= 0.0);
    CHECK(c <= 1.0 + 1e-12);
  }
}

TEST_CASE("concurrence rejects unphysical inputs") {
  Mat4c rho = werner_state(0.5);
  rho(0, 1) = complex<double>(0.3, 0.0);  // makes it non-Hermitian
  CHECK_THROWS_AS(concurrence(rho), Error);

  CHECK_THROWS_AS(concurrence(Mat4c(2.0 * werner_state(0.5))), Error);

  Mat4c indefinite = Mat4c::Zero();
  indefinite(0, 0) = 1.5;
  indefinite(1, 1) = -0.5;
  CHECK_THROWS_AS(concurrence(indefinite), Error);
}

TEST_CASE("pauli matrices and kron behave as expected") {
  CHECK((pauli_x() * pauli_x() - Mat2c::Identity()).norm() == 0.0);
  CHECK((pauli_y() * pauli_y() - Mat2c::Identity()).norm() == 0.0);
  CHECK((pauli_z() * pauli_z() - Mat2c::Identity()).norm() == 0.0);
  const Mat4c zz = kron2(pauli_z(), pauli_z());
  const Eigen::Vector4d s1 = sz1_diag(), s2 = sz2_diag();
  for (int j = 0; j < 4; ++j) {
    CHECK(std::real(zz(j, j)) == s1(j) * s2(j));
    CHECK(spin_sum_diag()(j) == s1(j) + s2(j));
    CHECK(spin_diff_diag()(j) == s1(j) - s2(j));
  }
}

TEST_CASE("trace distance separates orthogonal states and vanishes on equals") {
  const Mat4c a = psi_plus_state();
  CHECK(trace_distance(a, a) < 1e-15);
  Mat4c b = Mat4c::Zero();
  b(0, 0) = 1.0;
  CHECK(trace_distance(a, b) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(trace_distance(a, werner_state(0.5)) > 0.0);
}

TEST_CASE("purity distinguishes pure states from the maximal mixture") {
  CHECK(purity(psi_plus_state()) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(purity(werner_state(0.0)) == doctest::Approx(0.25).epsilon(1e-12));
  NormalRng rng(derive_stream(789, 0));
  for (int trial = 0; trial < 20; ++trial) {
    const double p = purity(random_density(rng));
    CHECK(p <= 1.0 + 1e-12);
    CHECK(p >= 0.25 - 1e-12);
  }
}
