// Target models: classical Gaussian-quadrature noise, random-phased AC
// field, and N uniformly coupled nuclear spins under dynamical decoupling.
// All frequencies/rates here are angular (rad/s); the config loader owns
// the Hz boundary.
#pragma once

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <vector>

#include "qns/hilbert.hpp"
#include "qns/rng.hpp"

namespace qns {

enum class TargetKind { gaussian_quadrature, random_phase_ac, quantum_spins };

struct TargetModel {
  TargetKind kind = TargetKind::quantum_spins;
  double nu0 = 0.0;   // target oscillation frequency (rad/s)
  double gamma = 0.0; // correlation decay rate (1/s), closed forms only

  // gaussian_quadrature
  double sigma_q = 0.0; // field std per quadrature (rad/s)

  // random_phase_ac
  double b0 = 0.0; // AC amplitude (rad/s)

  // quantum_spins
  int n_spins = 0;
  double a_perp = 0.0;      // effective transverse coupling (rad/s)
  double a_x = 0.0;         // raw hyperfine; 0 when a_perp given directly
  double gamma_extra = 0.0; // additional environmental dephasing (1/s)

  static TargetModel gaussian(double nu0, double sigma_q, double gamma = 0.0) {
    TargetModel m;
    m.kind = TargetKind::gaussian_quadrature;
    m.nu0 = nu0;
    m.sigma_q = sigma_q;
    m.gamma = gamma;
    m.validate();
    return m;
  }

  static TargetModel random_phase_ac(double nu0, double b0) {
    TargetModel m;
    m.kind = TargetKind::random_phase_ac;
    m.nu0 = nu0;
    m.b0 = b0;
    m.validate();
    return m;
  }

  static TargetModel quantum_spins(double nu0, int n_spins, double a_perp,
                                   double gamma = 0.0,
                                   double gamma_extra = 0.0) {
    TargetModel m;
    m.kind = TargetKind::quantum_spins;
    m.nu0 = nu0;
    m.n_spins = n_spins;
    m.a_perp = a_perp;
    m.gamma = gamma;
    m.gamma_extra = gamma_extra;
    m.validate();
    return m;
  }

  // From the raw hyperfine component: A_perp = 2 Ax / pi.
  static TargetModel quantum_spins_from_ax(double nu0, int n_spins,
                                           double a_x, double gamma = 0.0,
                                           double gamma_extra = 0.0) {
    TargetModel m = quantum_spins(nu0, n_spins,
                                  2.0 * a_x / std::numbers::pi, gamma,
                                  gamma_extra);
    m.a_x = a_x;
    return m;
  }

  bool is_classical() const { return kind != TargetKind::quantum_spins; }

  void validate() const {
    if (!(nu0 > 0.0))
      throw std::invalid_argument("TargetModel: nu0 must be > 0");
    if (gamma < 0.0)
      throw std::invalid_argument("TargetModel: gamma must be >= 0");
    switch (kind) {
    case TargetKind::gaussian_quadrature:
      if (!(sigma_q > 0.0))
        throw std::invalid_argument("TargetModel: sigma_q must be > 0");
      break;
    case TargetKind::random_phase_ac:
      if (!(b0 > 0.0))
        throw std::invalid_argument("TargetModel: b0 must be > 0");
      break;
    case TargetKind::quantum_spins:
      if (n_spins < 1 || n_spins > 6)
        throw std::invalid_argument("TargetModel: n_spins must be in 1..6");
      if (!(a_perp > 0.0))
        throw std::invalid_argument("TargetModel: a_perp must be > 0");
      if (a_x != 0.0 &&
          std::abs(a_perp - 2.0 * a_x / std::numbers::pi) > 1e-12 * a_x)
        throw std::invalid_argument("TargetModel: a_perp != 2*a_x/pi");
      if (gamma_extra < 0.0)
        throw std::invalid_argument("TargetModel: gamma_extra must be >= 0");
      break;
    }
  }

  int target_dim() const {
    return kind == TargetKind::quantum_spins ? (1 << n_spins) : 0;
  }
};

struct ClassicalTrajectory {
  std::vector<double> times;
  std::vector<double> values;
};

// One realization of the classical field at the given times.
//   random_phase_ac:       B_j = b0 cos(nu0 t_j + phi), phi ~ U[0, 2pi)
//   gaussian_quadrature:   B_j = X_j cos(nu0 t_j) + Y_j sin(nu0 t_j) with
//                          X, Y independent OU processes (stationary
//                          variance sigma_q^2, relaxation gamma); gamma = 0
//                          degenerates to static quadratures.
inline ClassicalTrajectory sample_classical(const TargetModel& model,
                                            const std::vector<double>& times,
                                            Rng& rng) {
  if (!model.is_classical())
    throw std::invalid_argument("sample_classical: quantum model");
  for (std::size_t i = 1; i < times.size(); ++i)
    if (!(times[i] > times[i - 1]))
      throw std::invalid_argument("sample_classical: times not ascending");

  ClassicalTrajectory tr;
  tr.times = times;
  tr.values.resize(times.size());

  if (model.kind == TargetKind::random_phase_ac) {
    const double phi = rng.uniform(0.0, 2.0 * std::numbers::pi);
    for (std::size_t i = 0; i < times.size(); ++i)
      tr.values[i] = model.b0 * std::cos(model.nu0 * times[i] + phi);
    return tr;
  }

  double x = model.sigma_q * rng.normal();
  double y = model.sigma_q * rng.normal();
  for (std::size_t i = 0; i < times.size(); ++i) {
    if (i > 0 && model.gamma > 0.0) {
      // exact OU update between consecutive sample times
      const double dt = times[i] - times[i - 1];
      const double f = std::exp(-model.gamma * dt);
      const double s = model.sigma_q * std::sqrt(1.0 - f * f);
      x = f * x + s * rng.normal();
      y = f * y + s * rng.normal();
    }
    tr.values[i] = x * std::cos(model.nu0 * times[i]) +
                   y * std::sin(model.nu0 * times[i]);
  }
  return tr;
}

// B(t) = A_perp sum_n [ I_nx cos(nu0 t) - I_ny sin(nu0 t) ]  (main-text sign)
inline ComplexMatrix quantum_field(const TargetModel& model, double t) {
  if (model.is_classical())
    throw std::invalid_argument("quantum_field: classical model");
  const SpinOps ops = spin_half_ops();
  const double c = std::cos(model.nu0 * t);
  const double s = std::sin(model.nu0 * t);
  const ComplexMatrix single = model.a_perp * (c * ops.Ix - s * ops.Iy);
  const int d = model.target_dim();
  ComplexMatrix out = ComplexMatrix::Zero(d, d);
  for (int n = 0; n < model.n_spins; ++n)
    out += embed_spin_op(single, n, model.n_spins);
  return out;
}

// rho_B = 2^-N, N nuclear spins at high temperature.
inline ComplexMatrix initial_target_state(const TargetModel& model) {
  if (model.is_classical())
    throw std::invalid_argument("initial_target_state: classical model");
  const int d = model.target_dim();
  return ComplexMatrix::Identity(d, d) / double(d);
}

// Independent z-axis dephasing on each nuclear spin, coherence factor
// exp(-gamma_extra * dt). Models environmental decay only; measurement
// back-action decay emerges from the trajectory itself.
inline ComplexMatrix apply_dephasing(const ComplexMatrix& rho,
                                     const TargetModel& model, double dt) {
  if (model.is_classical())
    throw std::invalid_argument("apply_dephasing: classical model");
  if (dt < 0.0)
    throw std::invalid_argument("apply_dephasing: negative dt");
  require_density(rho, "apply_dephasing");
  if (model.gamma_extra == 0.0 || dt == 0.0)
    return rho;
  const double f = std::exp(-model.gamma_extra * dt);
  const int n = model.n_spins;
  const int d = model.target_dim();
  ComplexMatrix out = rho;
  // entry (r,c) picks up one factor f per spin whose z-bit differs
  for (int r = 0; r < d; ++r)
    for (int c = 0; c < d; ++c) {
      const int diff = r ^ c;
      int bits = 0;
      for (int k = 0; k < n; ++k)
        bits += (diff >> k) & 1;
      if (bits > 0)
        out(r, c) *= std::pow(f, bits);
    }
  return out;
}

} // namespace qns
