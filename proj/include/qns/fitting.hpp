// Two-stage quantumness fit. Stage 1: nonlinear least squares of S(p)
// against A cos(nu p t_c) e^{-gamma p t_c} (Levenberg-Marquardt, multistart
// over the S(p) DFT peak). Stage 2: with stage-1 parameters frozen, r is
// the closed-form least-squares amplitude of S(p,q) against the third-
// moment kernel. The fit runs in per-shot units internally (nu t_c,
// gamma t_c) so gradient thresholds are scale-free.
#pragma once

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <string>
#include <vector>

#include "qns/moments.hpp"

namespace qns {

struct FitResult {
  double c0 = 0.0;
  double nu0_fit = 0.0;   // rad/s
  double gamma_fit = 0.0; // 1/s
  double r = 0.0;
  double r_std = 0.0;
  // diagnostics
  int iterations = 0;
  double grad_norm = 0.0;
  double chi2 = 0.0;
};

class FitError : public std::runtime_error {
public:
  explicit FitError(const std::string& what, const FitResult& diag)
      : std::runtime_error(what), diagnostics(diag) {}
  FitResult diagnostics;
};

namespace detail {

struct Stage1 {
  double amp = 0.0, nu = 0.0, g = 0.0; // per-shot units
  double chi2 = 0.0, grad = 0.0;
  int iters = 0;
  bool converged = false;
};

inline Stage1 lm_cos_decay(const std::vector<double>& y, double amp0,
                           double nu0, double g0, int max_iter = 500) {
  const int n = int(y.size());
  double a = amp0, nu = nu0, g = std::max(0.0, g0);
  auto chi2_of = [&](double aa, double nn, double gg) {
    double c = 0.0;
    for (int p = 1; p <= n; ++p) {
      const double m = aa * std::cos(nn * p) * std::exp(-gg * p);
      const double r = m - y[p - 1];
      c += r * r;
    }
    return c;
  };
  double chi2 = chi2_of(a, nu, g);
  double lambda = 1e-3;
  Stage1 out;
  int it = 0;
  for (; it < max_iter; ++it) {
    // J^T J and J^T r
    double h[3][3] = {};
    double grad[3] = {};
    for (int p = 1; p <= n; ++p) {
      const double e = std::exp(-g * p);
      const double cs = std::cos(nu * p), sn = std::sin(nu * p);
      const double m = a * cs * e;
      const double r = m - y[p - 1];
      const double j[3] = {cs * e, -a * double(p) * sn * e,
                           -double(p) * m};
      for (int u = 0; u < 3; ++u) {
        grad[u] += 2.0 * j[u] * r;
        for (int v = 0; v < 3; ++v)
          h[u][v] += j[u] * j[v];
      }
    }
    double gnorm = 0.0;
    for (double v : grad)
      gnorm = std::max(gnorm, std::abs(v));
    out.grad = gnorm;
    if (gnorm <= 1e-8) {
      out.converged = true;
      break;
    }
    // solve (H + lambda diag(H)) d = -grad/2
    bool stepped = false;
    for (int tries = 0; tries < 25 && !stepped; ++tries) {
      double m3[3][3];
      for (int u = 0; u < 3; ++u)
        for (int v = 0; v < 3; ++v)
          m3[u][v] = h[u][v] + (u == v ? lambda * std::max(h[u][u], 1e-30) : 0.0);
      // Cramer 3x3
      const double det =
          m3[0][0] * (m3[1][1] * m3[2][2] - m3[1][2] * m3[2][1]) -
          m3[0][1] * (m3[1][0] * m3[2][2] - m3[1][2] * m3[2][0]) +
          m3[0][2] * (m3[1][0] * m3[2][1] - m3[1][1] * m3[2][0]);
      if (det == 0.0 || !std::isfinite(det)) {
        lambda *= 10.0;
        continue;
      }
      const double b[3] = {-0.5 * grad[0], -0.5 * grad[1], -0.5 * grad[2]};
      auto det3 = [&](int col) {
        double t[3][3];
        for (int u = 0; u < 3; ++u)
          for (int v = 0; v < 3; ++v)
            t[u][v] = (v == col) ? b[u] : m3[u][v];
        return t[0][0] * (t[1][1] * t[2][2] - t[1][2] * t[2][1]) -
               t[0][1] * (t[1][0] * t[2][2] - t[1][2] * t[2][0]) +
               t[0][2] * (t[1][0] * t[2][1] - t[1][1] * t[2][0]);
      };
      const double da = det3(0) / det, dnu = det3(1) / det,
                   dg = det3(2) / det;
      const double c2 = chi2_of(a + da, nu + dnu, g + dg);
      if (c2 < chi2) {
        a += da;
        nu += dnu;
        g += dg;
        chi2 = c2;
        lambda = std::max(lambda * 0.3, 1e-12);
        stepped = true;
      } else {
        lambda *= 10.0;
      }
    }
    if (!stepped)
      break; // stuck; gradient check decides convergence
  }
  out.amp = a;
  out.nu = nu;
  out.g = g;
  out.chi2 = chi2;
  out.iters = it;
  return out;
}

} // namespace detail

// theta is the readout angle the record was taken at.
inline FitResult fit_moments(const MomentTable& table, double theta) {
  const int P = table.max_p, Q = table.max_q;
  if (P < 3)
    throw std::invalid_argument("fit_moments: need max_p >= 3");
  const double s2t = std::sin(theta) * std::sin(theta);
  const double ct = std::cos(theta);

  // nu start candidates from the 1D DFT peak of S(p), +-2 native bins
  const int F = 64 * P;
  int kbest = 1;
  double best = -1.0;
  for (int k = 1; k < F / 2; ++k) {
    cxd acc(0, 0);
    for (int p = 1; p <= P; ++p)
      acc += table.s2[p - 1] *
             std::polar(1.0, -2.0 * std::numbers::pi * double(k) * p / F);
    if (std::abs(acc) > best) {
      best = std::abs(acc);
      kbest = k;
    }
  }
  const double nu_peak = 2.0 * std::numbers::pi * double(kbest) / double(F);
  const double bin = 2.0 * std::numbers::pi / double(P); // native bin

  detail::Stage1 s1best;
  bool have = false;
  for (int dk = -2; dk <= 2; ++dk) {
    const double nu_try = nu_peak + dk * 0.5 * bin;
    if (nu_try <= 0.0 || nu_try >= std::numbers::pi)
      continue;
    // amplitude start: match first lag
    const double a0 = table.s2[0] / std::cos(nu_try);
    auto s1 = detail::lm_cos_decay(table.s2, a0, nu_try, 0.01);
    if (!have || s1.chi2 < s1best.chi2) {
      s1best = s1;
      have = true;
    }
  }
  FitResult res;
  res.iterations = s1best.iters;
  res.grad_norm = s1best.grad;
  res.chi2 = s1best.chi2;
  if (!have || !s1best.converged)
    throw FitError("fit_moments: stage-1 gradient norm " +
                       std::to_string(s1best.grad) +
                       " above 1e-8 after " +
                       std::to_string(s1best.iters) + " iterations",
                   res);

  // canonicalize nu into (0, pi) (aliased branch); clamp tiny negative g
  double amp = s1best.amp, nu = s1best.nu, g = s1best.g;
  nu = std::abs(std::fmod(nu, 2.0 * std::numbers::pi));
  if (nu > std::numbers::pi)
    nu = 2.0 * std::numbers::pi - nu;
  if (g < 0.0 && g > -1e-10)
    g = 0.0;

  res.c0 = std::abs(amp) / s2t;
  res.nu0_fit = nu / table.t_c;
  res.gamma_fit = g / table.t_c;

  // Stage 2: closed-form amplitude of S(p,q) on the kernel
  // K = -c0^2 sin^2 cos sin(nu p) sin(nu q) e^{-g (p+q)}.
  const double k0 = -res.c0 * res.c0 * s2t * ct;
  double num = 0.0, den = 0.0;
  for (int p = 1; p <= P; ++p)
    for (int q = 1; q <= Q; ++q) {
      const double K = k0 * std::sin(nu * p) * std::sin(nu * q) *
                       std::exp(-g * (p + q));
      num += K * table.s3_at(p, q);
      den += K * K;
    }
  if (den == 0.0)
    throw FitError("fit_moments: degenerate stage-2 kernel", res);
  res.r = num / den;

  // residual-based standard error (record bootstrap replaces this when
  // records are available)
  double ss = 0.0;
  for (int p = 1; p <= P; ++p)
    for (int q = 1; q <= Q; ++q) {
      const double K = k0 * std::sin(nu * p) * std::sin(nu * q) *
                       std::exp(-g * (p + q));
      const double rres = table.s3_at(p, q) - res.r * K;
      ss += rres * rres;
    }
  res.r_std =
      std::sqrt(ss / std::max(1, P * Q - 1) / den) + 1e-15;
  return res;
}

} // namespace qns
