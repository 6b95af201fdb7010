#include <catch2/catch_amalgamated.hpp>

#include "qns/hilbert.hpp"
#include "qns/rng.hpp"

using namespace qns;

namespace {
ComplexMatrix random_matrix(Rng& rng, int d) {
  ComplexMatrix m(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j)
      m(i, j) = cxd(rng.normal(), rng.normal());
  return m;
}
} // namespace

TEST_CASE("spin-1/2 operators satisfy the Pauli algebra") {
  const auto s = spin_half_ops();
  // [Ix, Iy] = i Iz
  REQUIRE((commutator(s.Ix, s.Iy) - cxd(0, 1) * s.Iz).cwiseAbs().maxCoeff() <=
          tol::algebraic);
  // traceless generators
  REQUIRE(std::abs(s.Iz.trace()) <= tol::algebraic);
  REQUIRE(std::abs(s.Ix.trace()) <= tol::algebraic);
  // Casimir: Ix^2 + Iy^2 + Iz^2 = (3/4) I
  const ComplexMatrix casimir = s.Ix * s.Ix + s.Iy * s.Iy + s.Iz * s.Iz;
  REQUIRE((casimir - 0.75 * ComplexMatrix::Identity(2, 2))
              .cwiseAbs()
              .maxCoeff() <= tol::algebraic);
  // eigenvalues +-1/2
  Eigen::SelfAdjointEigenSolver<ComplexMatrix> es(s.Iz);
  REQUIRE(es.eigenvalues().minCoeff() == Catch::Approx(-0.5));
  REQUIRE(es.eigenvalues().maxCoeff() == Catch::Approx(0.5));
  // anticommutator of orthogonal spin-1/2 components vanishes
  REQUIRE(anticommutator(s.Ix, s.Iy).cwiseAbs().maxCoeff() <= tol::algebraic);
  // commutator of anything with itself vanishes
  Rng rng(3);
  const ComplexMatrix a = random_matrix(rng, 4);
  REQUIRE(commutator(a, a).cwiseAbs().maxCoeff() <= tol::algebraic);
}

TEST_CASE("kron: identities, diagonals, trace multiplicativity") {
  const ComplexMatrix i2 = ComplexMatrix::Identity(2, 2);
  REQUIRE((kron(i2, i2) - ComplexMatrix::Identity(4, 4)).cwiseAbs().maxCoeff() ==
          0.0);

  ComplexMatrix dz(2, 2);
  dz << 1, 0, 0, -1;
  const ComplexMatrix k = kron(dz, i2);
  ComplexMatrix want(4, 4);
  want.setZero();
  want(0, 0) = 1;
  want(1, 1) = 1;
  want(2, 2) = -1;
  want(3, 3) = -1;
  REQUIRE((k - want).cwiseAbs().maxCoeff() == 0.0);

  Rng rng(7);
  const ComplexMatrix a = random_matrix(rng, 3);
  const ComplexMatrix b = random_matrix(rng, 4);
  REQUIRE(std::abs(kron(a, b).trace() - a.trace() * b.trace()) <= 1e-12 * 10);

  // associativity on random 2x2 inputs
  const ComplexMatrix u = random_matrix(rng, 2), v = random_matrix(rng, 2),
                      w = random_matrix(rng, 2);
  REQUIRE(
      (kron(kron(u, v), w) - kron(u, kron(v, w))).cwiseAbs().maxCoeff() <=
      tol::algebraic);
}

TEST_CASE("kron rejects dimensions beyond the sensor + 6 spin space") {
  const ComplexMatrix big = ComplexMatrix::Identity(64, 64);
  const ComplexMatrix i4 = ComplexMatrix::Identity(4, 4);
  REQUIRE_THROWS_AS(kron(big, i4), std::invalid_argument);
  REQUIRE_NOTHROW(kron(big, ComplexMatrix::Identity(2, 2)));
}

TEST_CASE("herm_expm basics") {
  const ComplexMatrix z = ComplexMatrix::Zero(4, 4);
  REQUIRE((herm_expm(z, 2.7) - ComplexMatrix::Identity(4, 4))
              .cwiseAbs()
              .maxCoeff() <= tol::decomposed);

  // spinor 2pi rotation: exp(-2 pi i Iz) = -I
  const auto s = spin_half_ops();
  const ComplexMatrix u = herm_expm(s.Iz, -2.0 * std::numbers::pi);
  REQUIRE((u + ComplexMatrix::Identity(2, 2)).cwiseAbs().maxCoeff() <=
          tol::decomposed);

  Rng rng(11);
  ComplexMatrix h = random_matrix(rng, 8);
  h = 0.5 * (h + h.adjoint()).eval();
  const ComplexMatrix a = herm_expm(h, 0.83);
  const ComplexMatrix b = herm_expm(h, -0.83);
  REQUIRE((a * b - ComplexMatrix::Identity(8, 8)).cwiseAbs().maxCoeff() <=
          tol::decomposed);
  // unitarity
  REQUIRE((a * a.adjoint() - ComplexMatrix::Identity(8, 8))
              .cwiseAbs()
              .maxCoeff() <= tol::decomposed);
  // trace preservation under conjugation
  ComplexMatrix rho = random_matrix(rng, 8);
  rho = (rho * rho.adjoint()).eval();
  rho /= rho.trace();
  REQUIRE(std::abs((a * rho * a.adjoint()).trace() - rho.trace()) <=
          tol::decomposed);

  // non-Hermitian input is a contract violation
  ComplexMatrix bad = random_matrix(rng, 3);
  bad(0, 1) += cxd(1.0, 1.0);
  REQUIRE_THROWS_AS(herm_expm(bad, 1.0), std::invalid_argument);
}

TEST_CASE("density checks") {
  ComplexMatrix rho = ComplexMatrix::Identity(4, 4) / 4.0;
  REQUIRE(check_density(rho).ok);
  rho(0, 0) = 0.5; // trace now 1.25
  REQUIRE_FALSE(check_density(rho).ok);

  ComplexMatrix neg = ComplexMatrix::Identity(2, 2);
  neg(1, 1) = -0.01;
  neg(0, 0) = 1.01;
  REQUIRE_FALSE(check_density(neg).ok);
  REQUIRE_THROWS_AS(require_density(neg, "test"), std::runtime_error);
}

TEST_CASE("partial trace over the sensor factor") {
  Rng rng(5);
  ComplexMatrix a = random_matrix(rng, 2);
  ComplexMatrix b = random_matrix(rng, 4);
  const ComplexMatrix full = kron(a, b);
  REQUIRE((partial_trace_first(full, 2) - a.trace() * b).cwiseAbs().maxCoeff() <=
          1e-12 * 10);
}
