// Analytic correlation engine: nested B+/B- superoperator correlations,
// variant-specific second/fourth-order classical correlations, perturbative
// moment predictions, the N=1 closed forms, and the exhaustive enumeration
// oracle for short measurement sequences.
#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "qns/hilbert.hpp"
#include "qns/measurement.hpp"
#include "qns/targets.hpp"

namespace qns {

enum class SuperopSign { plus, minus };

struct SuperopLetter {
  double t = 0.0;
  SuperopSign sign = SuperopSign::plus;
};

using SuperopWord = std::vector<SuperopLetter>;

// Tr[ B_K ... B_1 rho_B ] with the earliest letter applied to rho first
// (innermost). B+ X = (BX + XB)/2, B- X = (BX - XB)/(2i). Evaluated at
// gamma = 0; decay factors belong to the closed forms, not to this
// evaluation.
inline double superop_corr(const TargetModel& model, const SuperopWord& word) {
  if (model.is_classical())
    throw std::invalid_argument("superop_corr: classical model");
  if (word.size() > 8)
    throw std::invalid_argument("superop_corr: word length > 8");
  for (std::size_t i = 1; i < word.size(); ++i)
    if (word[i].t < word[i - 1].t - 1e-15)
      throw std::invalid_argument("superop_corr: letters not time-ordered");

  ComplexMatrix rho = initial_target_state(model);
  const cxd half_i = cxd(0.0, -0.5); // 1/(2i)
  for (const auto& letter : word) {
    const ComplexMatrix B = quantum_field(model, letter.t);
    if (letter.sign == SuperopSign::plus)
      rho = 0.5 * (B * rho + rho * B);
    else
      rho = half_i * (B * rho - rho * B);
  }
  const cxd tr = rho.trace();
  if (std::abs(tr.imag()) > tol::decomposed)
    throw std::runtime_error("superop_corr: residual imaginary part " +
                             std::to_string(tr.imag()));
  return tr.real();
}

// C^C_12 = <B_1 B_2> per variant, decay included where the model defines it.
inline double classical_corr2(const TargetModel& model, double t1, double t2) {
  const double dt = t2 - t1;
  const double osc = std::cos(model.nu0 * dt);
  switch (model.kind) {
  case TargetKind::gaussian_quadrature:
    return model.sigma_q * model.sigma_q * osc *
           std::exp(-model.gamma * std::abs(dt));
  case TargetKind::random_phase_ac:
    return 0.5 * model.b0 * model.b0 * osc; // fixed-amplitude AC: no decay
  case TargetKind::quantum_spins:
    return 0.25 * model.n_spins * model.a_perp * model.a_perp * osc *
           std::exp(-model.gamma * std::abs(dt));
  }
  throw std::logic_error("classical_corr2: unreachable");
}

// Fourth-order classical correlation, times non-decreasing.
//   gaussian:       all three pairings
//   random AC:      half the pairing sum
//   quantum spins:  C12 C34 + (N-1)/N (C13 C24 + C14 C23)
inline double classical_corr4(const TargetModel& model, double t1, double t2,
                              double t3, double t4) {
  const std::array<double, 4> t{t1, t2, t3, t4};
  for (int i = 1; i < 4; ++i)
    if (t[i] < t[i - 1] - 1e-15)
      throw std::invalid_argument("classical_corr4: decreasing times");
  const double p12_34 = classical_corr2(model, t1, t2) *
                        classical_corr2(model, t3, t4);
  const double p13_24 = classical_corr2(model, t1, t3) *
                        classical_corr2(model, t2, t4);
  const double p14_23 = classical_corr2(model, t1, t4) *
                        classical_corr2(model, t2, t3);
  switch (model.kind) {
  case TargetKind::gaussian_quadrature:
    return p12_34 + p13_24 + p14_23;
  case TargetKind::random_phase_ac:
    return 0.5 * (p12_34 + p13_24 + p14_23);
  case TargetKind::quantum_spins: {
    const double w = double(model.n_spins - 1) / double(model.n_spins);
    return p12_34 + w * (p13_24 + p14_23);
  }
  }
  throw std::logic_error("classical_corr4: unreachable");
}

// C^Q_ijjk = Tr(Bk+ Bj- Bj- Bi+ rho_B) closed form with decay:
// (N A^4 / 16) sin(nu0 d1) sin(nu0 d2) exp(-gamma (d1 + d2)).
inline double quantum_corr_ijjk(const TargetModel& model, double ti, double tj,
                                double tk) {
  if (model.is_classical())
    return 0.0;
  const double d1 = std::abs(tj - ti);
  const double d2 = std::abs(tk - tj);
  const double a2 = model.a_perp * model.a_perp;
  return (model.n_spins * a2 * a2 / 16.0) * std::sin(model.nu0 * d1) *
         std::sin(model.nu0 * d2) * std::exp(-model.gamma * (d1 + d2));
}

struct MomentPrediction {
  int order = 0;
  double value = 0.0;
  double classical_part = 0.0;
  double quantum_part = 0.0;
};

// Perturbative statistical moments of the measurement record:
//   order 1: S_j   = cos(theta) (1 - tau^2 C_jj / 2)
//   order 2: S_jk  = tau^2 sin^2(theta) C^C_jk
//   order 3: S_ijk = -(tau^4 cos sin^2 / 2) (C_iijk - C_ii C_jk
//                    + C_ijjk - C_ik C_jj + C_ijkk - C_ij C_kk + C^Q_ijjk)
// Lags are shot indices (times t0 + lag * t_c), non-decreasing.
inline MomentPrediction moment_predict(const TargetModel& model,
                                       const ShotConfig& cfg,
                                       const std::vector<long>& lags) {
  if (lags.size() < 1 || lags.size() > 3)
    throw std::invalid_argument("moment_predict: order must be 1, 2 or 3");
  for (std::size_t i = 1; i < lags.size(); ++i)
    if (lags[i] < lags[i - 1])
      throw std::invalid_argument("moment_predict: lags not ordered");

  MomentPrediction out;
  out.order = int(lags.size());
  const double tau2 = cfg.tau * cfg.tau;
  const double s2 = std::sin(cfg.theta) * std::sin(cfg.theta);
  const double c1 = std::cos(cfg.theta);

  if (out.order == 1) {
    const double tj = cfg.shot_time(lags[0]);
    out.classical_part = c1 * (1.0 - 0.5 * tau2 * classical_corr2(model, tj, tj));
    out.value = out.classical_part;
    return out;
  }
  if (out.order == 2) {
    const double tj = cfg.shot_time(lags[0]);
    const double tk = cfg.shot_time(lags[1]);
    out.classical_part = tau2 * s2 * classical_corr2(model, tj, tk);
    out.value = out.classical_part;
    return out;
  }
  const double ti = cfg.shot_time(lags[0]);
  const double tj = cfg.shot_time(lags[1]);
  const double tk = cfg.shot_time(lags[2]);
  auto C = [&](double a, double b) { return classical_corr2(model, a, b); };
  const double bracket_c =
      classical_corr4(model, ti, ti, tj, tk) - C(ti, ti) * C(tj, tk) +
      classical_corr4(model, ti, tj, tj, tk) - C(ti, tk) * C(tj, tj) +
      classical_corr4(model, ti, tj, tk, tk) - C(ti, tj) * C(tk, tk);
  const double pref = -0.5 * tau2 * tau2 * c1 * s2;
  out.classical_part = pref * bracket_c;
  out.quantum_part = pref * quantum_corr_ijjk(model, ti, tj, tk);
  out.value = out.classical_part + out.quantum_part;
  return out;
}

struct ClosedFormMoments {
  double c0 = 0.0; // tau^2 A_perp^2 / 4 (per spin)
  double s2 = 0.0; // S(p)
  double s3 = 0.0; // S(p,q)
};

// N = 1 closed forms: S_jk = c0 sin^2 cos(nu0 t_c p) e^{-gamma t_c p},
// S_ijk = -r c0^2 sin^2 cos sin(nu0 t_c p) sin(nu0 t_c q)
//         e^{-gamma t_c (p+q)} with r = 1.
inline ClosedFormMoments closed_form_moments(const TargetModel& model,
                                             const ShotConfig& cfg, long p,
                                             long q, double r = 1.0) {
  if (model.kind != TargetKind::quantum_spins || model.n_spins != 1)
    throw std::invalid_argument("closed_form_moments: requires N = 1");
  ClosedFormMoments out;
  const double s2th = std::sin(cfg.theta) * std::sin(cfg.theta);
  const double cth = std::cos(cfg.theta);
  out.c0 = cfg.tau * cfg.tau * model.a_perp * model.a_perp / 4.0;
  const double dp = double(p) * cfg.t_c;
  const double dq = double(q) * cfg.t_c;
  out.s2 = out.c0 * s2th * std::cos(model.nu0 * dp) *
           std::exp(-model.gamma * dp);
  out.s3 = -r * out.c0 * out.c0 * s2th * cth * std::sin(model.nu0 * dp) *
           std::sin(model.nu0 * dq) * std::exp(-model.gamma * (dp + dq));
  return out;
}

struct ExactMoments {
  std::vector<double> mean;                      // <sigma_j>
  std::vector<std::vector<double>> second;       // <d sigma_i d sigma_j>
  std::vector<std::vector<std::vector<double>>> third;
  double prob_sum = 0.0; // completeness check
};

// Exhaustive enumeration of all outcome sequences with exact conditional
// states and branch probabilities (no sampling, no perturbative truncation).
inline ExactMoments enumerate_exact_moments(const TargetModel& model,
                                            const ShotConfig& cfg,
                                            Backaction mode = Backaction::full) {
  if (model.kind != TargetKind::quantum_spins)
    throw std::invalid_argument("enumerate_exact_moments: quantum model only");
  if (cfg.n_shots > 4)
    throw std::invalid_argument("enumerate_exact_moments: n_shots > 4");
  if (model.n_spins > 2)
    throw std::invalid_argument("enumerate_exact_moments: n_spins > 2");

  QuantumShotKernel kernel(model, cfg, mode);
  const long n = cfg.n_shots;

  struct Node {
    double prob;
    ComplexMatrix rho;
    std::array<int, 4> hist;
  };
  std::vector<Node> branches{{1.0, kernel.initial_state(), {0, 0, 0, 0}}};
  for (long j = 0; j < n; ++j) {
    std::vector<Node> next;
    next.reserve(branches.size() * 2);
    for (const auto& node : branches) {
      ComplexMatrix rho_in =
          mode == Backaction::none ? kernel.initial_state() : node.rho;
      const auto br = kernel.branch(rho_in, cfg.shot_time(j));
      Node up = node;
      up.prob *= br.p_plus;
      up.rho = br.rho_plus;
      up.hist[j] = +1;
      Node dn = node;
      dn.prob *= br.p_minus;
      dn.rho = br.rho_minus;
      dn.hist[j] = -1;
      next.push_back(std::move(up));
      next.push_back(std::move(dn));
    }
    branches = std::move(next);
  }

  ExactMoments out;
  out.mean.assign(n, 0.0);
  for (const auto& b : branches) {
    out.prob_sum += b.prob;
    for (long j = 0; j < n; ++j)
      out.mean[j] += b.prob * b.hist[j];
  }
  out.second.assign(n, std::vector<double>(n, 0.0));
  out.third.assign(
      n, std::vector<std::vector<double>>(n, std::vector<double>(n, 0.0)));
  for (const auto& b : branches) {
    for (long i = 0; i < n; ++i)
      for (long j = 0; j < n; ++j) {
        const double di = b.hist[i] - out.mean[i];
        const double dj = b.hist[j] - out.mean[j];
        out.second[i][j] += b.prob * di * dj;
        for (long k = 0; k < n; ++k)
          out.third[i][j][k] += b.prob * di * dj * (b.hist[k] - out.mean[k]);
      }
  }
  return out;
}

} // namespace qns
