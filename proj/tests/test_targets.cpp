#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <numbers>

#include "qns/correlations.hpp"
#include "qns/targets.hpp"

using namespace qns;

TEST_CASE("model validation") {
  REQUIRE_THROWS_AS(TargetModel::gaussian(0.0, 1.0), std::invalid_argument);
  REQUIRE_THROWS_AS(TargetModel::gaussian(1.0, -1.0), std::invalid_argument);
  REQUIRE_THROWS_AS(TargetModel::random_phase_ac(1.0, 0.0),
                    std::invalid_argument);
  REQUIRE_THROWS_AS(TargetModel::quantum_spins(1.0, 7, 1.0),
                    std::invalid_argument);
  REQUIRE_THROWS_AS(TargetModel::quantum_spins(1.0, 1, 1.0, -0.1),
                    std::invalid_argument);
  // a_perp = 2 a_x / pi wiring
  const auto m = TargetModel::quantum_spins_from_ax(1.0, 1, 3.0);
  REQUIRE(m.a_perp == Catch::Approx(2.0 * 3.0 / std::numbers::pi));
}

TEST_CASE("sample_classical basics") {
  Rng rng(42);
  std::vector<double> times{0.0, 1.0, 2.0, 3.0};

  SECTION("AC with zero-size amplitude rejected, tiny amplitude gives tiny field") {
    auto m = TargetModel::random_phase_ac(1.3, 1e-300);
    const auto tr = sample_classical(m, times, rng);
    for (double v : tr.values)
      REQUIRE(std::abs(v) <= 1e-299);
  }
  SECTION("non-ascending times rejected") {
    auto m = TargetModel::gaussian(1.0, 1.0);
    std::vector<double> bad{0.0, 2.0, 1.0};
    REQUIRE_THROWS_AS(sample_classical(m, bad, rng), std::invalid_argument);
  }
  SECTION("quantum variant rejected") {
    auto m = TargetModel::quantum_spins(1.0, 1, 1.0);
    REQUIRE_THROWS_AS(sample_classical(m, times, rng), std::invalid_argument);
  }
}

TEST_CASE("gaussian static quadratures reproduce the cosine covariance") {
  // oracle: <B_i B_j> = sigma^2 cos(nu0 (t_i - t_j)) for the two-quadrature
  // construction with gamma = 0
  const double nu0 = 1.7, sigma = 0.8;
  auto m = TargetModel::gaussian(nu0, sigma);
  Rng rng(1234);
  std::vector<double> times{0.3, 1.1, 2.6};
  const int n = 100000;
  double c01 = 0.0, c02 = 0.0, c00 = 0.0;
  for (int k = 0; k < n; ++k) {
    const auto tr = sample_classical(m, times, rng);
    c01 += tr.values[0] * tr.values[1];
    c02 += tr.values[0] * tr.values[2];
    c00 += tr.values[0] * tr.values[0];
  }
  c01 /= n;
  c02 /= n;
  c00 /= n;
  // standard error of a product of two unit-variance-ish gaussians
  const double se = 3.0 * sigma * sigma * 2.0 / std::sqrt(double(n));
  REQUIRE(std::abs(c01 - sigma * sigma * std::cos(nu0 * (1.1 - 0.3))) <= se);
  REQUIRE(std::abs(c02 - sigma * sigma * std::cos(nu0 * (2.6 - 0.3))) <= se);
  REQUIRE(std::abs(c00 - sigma * sigma) <= se);
}

TEST_CASE("gaussian OU quadratures decay at gamma") {
  const double nu0 = 2.1, sigma = 1.1, gamma = 0.25;
  auto m = TargetModel::gaussian(nu0, sigma, gamma);
  Rng rng(99);
  std::vector<double> times{0.0, 2.0};
  const int n = 200000;
  double c = 0.0;
  for (int k = 0; k < n; ++k) {
    const auto tr = sample_classical(m, times, rng);
    c += tr.values[0] * tr.values[1];
  }
  c /= n;
  const double want =
      sigma * sigma * std::cos(nu0 * 2.0) * std::exp(-gamma * 2.0);
  REQUIRE(std::abs(c - want) <= 3.0 * sigma * sigma * 2.0 / std::sqrt(n));
}

TEST_CASE("AC fourth moment equals half the gaussian pairing sum") {
  // oracle: closed-form phase average of cos products; matches the paper's
  // factor-1/2 statement. Checked against the sampled estimate.
  const double nu0 = 1.9, b0 = 1.3;
  auto m = TargetModel::random_phase_ac(nu0, b0);
  Rng rng(7);
  std::vector<double> times{0.2, 0.9, 1.7, 3.0};
  const long n = 1000000;
  double m4 = 0.0, m4sq = 0.0;
  for (long k = 0; k < n; ++k) {
    const auto tr = sample_classical(m, times, rng);
    const double v =
        tr.values[0] * tr.values[1] * tr.values[2] * tr.values[3];
    m4 += v;
    m4sq += v * v;
  }
  m4 /= double(n);
  m4sq /= double(n);
  const double se = std::sqrt((m4sq - m4 * m4) / double(n));
  auto c2 = [&](int i, int j) {
    return 0.5 * b0 * b0 * std::cos(nu0 * (times[j] - times[i]));
  };
  const double gaussian_sum =
      c2(0, 1) * c2(2, 3) + c2(0, 2) * c2(1, 3) + c2(0, 3) * c2(1, 2);
  REQUIRE(std::abs(m4 - 0.5 * gaussian_sum) <= 3.0 * se);
}

TEST_CASE("quantum_field structure") {
  const double a = 0.7, nu0 = 1.3;
  auto m1 = TargetModel::quantum_spins(nu0, 1, a);
  const auto ops = spin_half_ops();

  // t = 0: B = a Ix
  REQUIRE((quantum_field(m1, 0.0) - a * ops.Ix).cwiseAbs().maxCoeff() <=
          tol::algebraic);

  // B(t)^2 = a^2/4 for one spin; matrix-product oracle
  for (double t : {0.3, 1.9, 4.4}) {
    const ComplexMatrix b = quantum_field(m1, t);
    REQUIRE((b * b - 0.25 * a * a * ComplexMatrix::Identity(2, 2))
                .cwiseAbs()
                .maxCoeff() <= tol::algebraic);
    REQUIRE(is_hermitian(b, tol::algebraic));
    REQUIRE(std::abs(b.trace()) <= tol::algebraic);
    Eigen::SelfAdjointEigenSolver<ComplexMatrix> es(b);
    REQUIRE(es.eigenvalues().maxCoeff() == Catch::Approx(0.5 * a));
    REQUIRE(es.eigenvalues().minCoeff() == Catch::Approx(-0.5 * a));
  }

  // trace against the maximally mixed state vanishes (traceless sum)
  auto m3 = TargetModel::quantum_spins(nu0, 3, a);
  const ComplexMatrix rho = initial_target_state(m3);
  for (double t : {0.0, 0.7, 2.2})
    REQUIRE(std::abs((quantum_field(m3, t) * rho).trace()) <= tol::algebraic);

  REQUIRE_THROWS_AS(quantum_field(TargetModel::gaussian(1.0, 1.0), 0.0),
                    std::invalid_argument);
}

TEST_CASE("initial target state is maximally mixed") {
  auto m1 = TargetModel::quantum_spins(1.0, 1, 1.0);
  const ComplexMatrix r1 = initial_target_state(m1);
  REQUIRE((r1 - 0.5 * ComplexMatrix::Identity(2, 2)).cwiseAbs().maxCoeff() ==
          0.0);
  auto m2 = TargetModel::quantum_spins(1.0, 2, 1.0);
  const ComplexMatrix r2 = initial_target_state(m2);
  REQUIRE((r2 - 0.25 * ComplexMatrix::Identity(4, 4)).cwiseAbs().maxCoeff() ==
          0.0);
  // purity 2^-N
  for (int n : {1, 2, 3, 4}) {
    auto m = TargetModel::quantum_spins(1.0, n, 1.0);
    const ComplexMatrix r = initial_target_state(m);
    REQUIRE(std::abs((r * r).trace().real() - std::pow(2.0, -n)) <=
            tol::algebraic);
  }
}

TEST_CASE("apply_dephasing") {
  auto mk = [](double gex) {
    return TargetModel::quantum_spins(1.0, 1, 1.0, 0.0, gex);
  };
  const auto ops = spin_half_ops();
  const ComplexMatrix plus_x =
      0.5 * ComplexMatrix::Identity(2, 2) + ops.Ix; // |+x><+x|

  SECTION("no-ops") {
    REQUIRE((apply_dephasing(plus_x, mk(0.0), 1.0) - plus_x)
                .cwiseAbs()
                .maxCoeff() == 0.0);
    REQUIRE((apply_dephasing(plus_x, mk(0.5), 0.0) - plus_x)
                .cwiseAbs()
                .maxCoeff() == 0.0);
  }
  SECTION("half-life halves the x component, z unchanged") {
    const double gex = std::log(2.0);
    ComplexMatrix mixed = 0.4 * 2.0 * ops.Ix + ComplexMatrix::Identity(2, 2) * 0.5;
    mixed(0, 0) = 0.7;
    mixed(1, 1) = 0.3;
    const ComplexMatrix out = apply_dephasing(mixed, mk(gex), 1.0);
    REQUIRE(std::abs((out * (2.0 * ops.Ix)).trace().real() -
                     0.5 * (mixed * (2.0 * ops.Ix)).trace().real()) <=
            tol::algebraic);
    REQUIRE(std::abs((out * (2.0 * ops.Iz)).trace().real() -
                     (mixed * (2.0 * ops.Iz)).trace().real()) <=
            tol::algebraic);
  }
  SECTION("trace and positivity preserved") {
    auto m2 = TargetModel::quantum_spins(1.0, 2, 1.0, 0.0, 0.8);
    Rng rng(3);
    ComplexMatrix x(4, 4);
    for (int i = 0; i < 4; ++i)
      for (int j = 0; j < 4; ++j)
        x(i, j) = cxd(rng.normal(), rng.normal());
    ComplexMatrix rho = x * x.adjoint();
    rho /= rho.trace();
    const ComplexMatrix out = apply_dephasing(rho, m2, 0.7);
    REQUIRE(check_density(out).ok);
  }
  SECTION("invalid density rejected") {
    ComplexMatrix bad = ComplexMatrix::Identity(2, 2); // trace 2
    REQUIRE_THROWS_AS(apply_dephasing(bad, mk(0.1), 1.0), std::runtime_error);
  }
}
