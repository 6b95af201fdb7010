// Sequential weak-measurement protocol: per-shot sensor preparation in |x>,
// entangling evolution U = exp(-i tau Sz (x) B(t_j)), readout along e_theta,
// and conditional target update (back-action). Classical targets follow the
// p_j(+-) = [1 +- cos(theta - Phi_j)]/2 outcome law.
#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <vector>

#include "qns/hilbert.hpp"
#include "qns/rng.hpp"
#include "qns/targets.hpp"

namespace qns {

struct ShotConfig {
  double theta = 0.0; // readout angle (rad)
  double tau = 0.0;   // interrogation time (s)
  double t_c = 0.0;   // shot period (s)
  long n_shots = 1;
  double t0 = 0.0;

  void validate() const {
    if (!(tau > 0.0) || !(tau <= t_c))
      throw std::invalid_argument("ShotConfig: need 0 < tau <= t_c");
    if (n_shots < 1)
      throw std::invalid_argument("ShotConfig: n_shots must be >= 1");
  }
  double shot_time(long j) const { return t0 + double(j) * t_c; }
};

struct ReadoutModel {
  double n_plus = 0.0;  // mean photons for outcome +1
  double n_minus = 0.0; // mean photons for outcome -1

  void validate() const {
    if (n_plus < 0.0 || n_minus < 0.0)
      throw std::invalid_argument("ReadoutModel: negative photon mean");
    if (n_plus == n_minus)
      throw std::invalid_argument(
          "ReadoutModel: n_plus == n_minus makes reconstruction singular");
  }
  double n_bar() const { return 0.5 * (n_plus + n_minus); }
  double contrast() const { return 0.5 * (n_plus - n_minus); }
};

struct MeasurementRecord {
  std::vector<std::int8_t> outcomes; // sigma_j in {-1, +1}
  std::optional<std::vector<std::int32_t>> photon_counts;
  double t0 = 0.0;
  ShotConfig config;
};

// How the target state is carried across shots.
//   full:           exact conditional update (heralded back-action)
//   classical_only: keep the outcome-correlated anticommutator part of the
//                   update, drop the commutator (dephasing) part; kills the
//                   quantum contribution to higher moments
//   none:           reset to the maximally mixed state every shot
enum class Backaction { full, classical_only, none };

inline MeasurementRecord run_classical(const TargetModel& model,
                                       const ShotConfig& cfg, Rng& rng) {
  if (!model.is_classical())
    throw std::invalid_argument("run_classical: quantum model");
  cfg.validate();
  std::vector<double> times(cfg.n_shots);
  for (long j = 0; j < cfg.n_shots; ++j)
    times[j] = cfg.shot_time(j);
  const ClassicalTrajectory tr = sample_classical(model, times, rng);

  MeasurementRecord rec;
  rec.t0 = cfg.t0;
  rec.config = cfg;
  rec.outcomes.resize(cfg.n_shots);
  for (long j = 0; j < cfg.n_shots; ++j) {
    const double phi = tr.values[j] * cfg.tau;
    const double p_plus = 0.5 * (1.0 + std::cos(cfg.theta - phi));
    rec.outcomes[j] = rng.uniform() < p_plus ? 1 : -1;
  }
  return rec;
}

// One-shot conditional kernel. With W = exp(-i tau B(t)/2) the exact update
// conditioned on outcome sigma is
//   rho|sigma  propto  (W rho W+ + W+ rho W)/4
//                      + sigma (e^{i theta} W rho W + h.c.)/4
// and p(sigma) = [1 + sigma Re(e^{i theta} Tr(W^2 rho))]/2. This is
// algebraically identical to building the full sensor (x) target unitary,
// projecting on (1 +- sigma_theta)/2 and tracing out the sensor (see
// naive_shot_branch, kept as the test reference).
class QuantumShotKernel {
public:
  QuantumShotKernel(const TargetModel& model, const ShotConfig& cfg,
                    Backaction mode = Backaction::full)
      : model_(model), cfg_(cfg), mode_(mode), dim_(model.target_dim()) {
    if (model.is_classical())
      throw std::invalid_argument("QuantumShotKernel: classical model");
    cfg.validate();
    rho0_ = initial_target_state(model);
    if (model.gamma_extra > 0.0) {
      const double f = std::exp(-model.gamma_extra * cfg.t_c);
      deph_ = Eigen::MatrixXd(dim_, dim_);
      for (int r = 0; r < dim_; ++r)
        for (int c = 0; c < dim_; ++c) {
          int bits = 0;
          for (int k = 0; k < model.n_spins; ++k)
            bits += ((r ^ c) >> k) & 1;
          deph_(r, c) = std::pow(f, bits);
        }
    }
    W_.resize(dim_, dim_);
    work_.resize(dim_, dim_);
    mplus_.resize(dim_, dim_);
    mminus_.resize(dim_, dim_);
  }

  int dim() const { return dim_; }
  const ComplexMatrix& initial_state() const { return rho0_; }

  // exp(-i tau B(t)/2) as a tensor product of identical 2x2 rotations
  // (uniform coupling; B(t) is a sum of commuting single-spin terms).
  ComplexMatrix w_of(double t) const {
    const double phi = 0.5 * model_.a_perp * cfg_.tau; // per-spin angle
    const double c = std::cos(0.5 * phi);
    const double s = std::sin(0.5 * phi);
    ComplexMatrix w(2, 2);
    // nhat = (cos nu0 t, -sin nu0 t, 0)
    const cxd off = std::exp(cxd(0.0, model_.nu0 * t));
    w << c, cxd(0.0, -s) * off, cxd(0.0, -s) * std::conj(off), c;
    ComplexMatrix out = w;
    for (int n = 1; n < model_.n_spins; ++n)
      out = kron(out, w).eval();
    return out;
  }

  struct Branch {
    double p_plus = 0.0;
    double p_minus = 0.0;
    ComplexMatrix rho_plus, rho_minus; // normalized conditional states
  };

  // Both conditional branches at time t (used by the enumeration oracle and
  // by step()).
  Branch branch(const ComplexMatrix& rho, double t) const {
    Branch br;
    const ComplexMatrix W = w_of(t);
    const ComplexMatrix C = W * rho * W;
    const cxd e = std::exp(cxd(0.0, cfg_.theta));
    ComplexMatrix sym;
    if (mode_ == Backaction::classical_only)
      sym = 0.5 * rho;
    else
      sym = 0.25 * (W * rho * W.adjoint() + W.adjoint() * rho * W);
    const ComplexMatrix cor = 0.25 * (e * C + std::conj(e) * C.adjoint());
    ComplexMatrix up = sym + cor;
    ComplexMatrix dn = sym - cor;
    br.p_plus = up.trace().real();
    br.p_minus = dn.trace().real();
    if (std::abs(br.p_plus + br.p_minus - 1.0) > 1e-9)
      throw std::runtime_error(
          "QuantumShotKernel: probability normalization drift");
    br.rho_plus = up / br.p_plus;
    br.rho_minus = dn / br.p_minus;
    if (mode_ == Backaction::classical_only) {
      project_psd(br.rho_plus);
      project_psd(br.rho_minus);
    }
    if (deph_.size() > 0) {
      br.rho_plus = br.rho_plus.cwiseProduct(deph_.cast<cxd>());
      br.rho_minus = br.rho_minus.cwiseProduct(deph_.cast<cxd>());
    }
    return br;
  }

  // Sample one shot, updating rho in place. Hot path: no allocations
  // beyond the kernel workspace.
  int step(ComplexMatrix& rho, double t, Rng& rng) {
    const double phi = 0.5 * model_.a_perp * cfg_.tau;
    const double c = std::cos(0.5 * phi);
    const double s = std::sin(0.5 * phi);
    ComplexMatrix w(2, 2);
    const cxd off = std::exp(cxd(0.0, model_.nu0 * t));
    w << c, cxd(0.0, -s) * off, cxd(0.0, -s) * std::conj(off), c;
    W_ = w;
    for (int n = 1; n < model_.n_spins; ++n)
      W_ = kron(W_, w).eval();

    const cxd e = std::exp(cxd(0.0, cfg_.theta));
    work_.noalias() = W_ * rho;
    mplus_.noalias() = work_ * W_; // W rho W

    if (mode_ == Backaction::classical_only) {
      mminus_ = 0.5 * rho;
    } else {
      mminus_.noalias() = work_ * W_.adjoint(); // W rho W+
      work_.noalias() = W_.adjoint() * rho;
      mminus_.noalias() += work_ * W_; // + W+ rho W
      mminus_ *= 0.25;
    }
    // mminus_ holds the symmetric part; build correlated part in work_
    work_ = 0.25 * (e * mplus_ + std::conj(e) * mplus_.adjoint().eval());

    const double tr_sym = mminus_.trace().real();
    const double tr_cor = work_.trace().real();
    const double p_plus = tr_sym + tr_cor;
    const double p_minus = tr_sym - tr_cor;
    if (std::abs(p_plus + p_minus - 1.0) > 1e-9)
      throw std::runtime_error(
          "QuantumShotKernel: probability normalization drift");

    const int sigma = rng.uniform() < p_plus ? 1 : -1;
    if (mode_ == Backaction::none) {
      rho = rho0_;
      return sigma;
    }
    if (sigma > 0)
      rho = (mminus_ + work_) / p_plus;
    else
      rho = (mminus_ - work_) / p_minus;
    if (mode_ == Backaction::classical_only)
      project_psd(rho);
    if (deph_.size() > 0)
      rho = rho.cwiseProduct(deph_.cast<cxd>()).eval();
    return sigma;
  }

private:
  // The classical_only surgery is not completely positive; clamp small
  // negative eigenvalues and renormalize.
  static void project_psd(ComplexMatrix& rho) {
    Eigen::SelfAdjointEigenSolver<ComplexMatrix> es(
        0.5 * (rho + rho.adjoint()));
    if (es.eigenvalues().minCoeff() >= 0.0)
      return;
    Eigen::VectorXd w = es.eigenvalues().cwiseMax(0.0);
    w /= w.sum();
    rho = es.eigenvectors() * w.asDiagonal() * es.eigenvectors().adjoint();
  }

  TargetModel model_;
  ShotConfig cfg_;
  Backaction mode_;
  int dim_;
  ComplexMatrix rho0_;
  Eigen::MatrixXd deph_; // empty when gamma_extra == 0
  ComplexMatrix W_, work_, mplus_, mminus_;
};

// Reference implementation of one shot straight from the protocol
// definition: rho_full = |x><x| (x) rho_B, U = exp(-i tau Sz (x) B(t)),
// Born probabilities with (1 +- sigma_theta)/2 (x) 1, conditional state by
// projection + partial trace over the sensor. Slow; used to validate the
// kernel.
inline QuantumShotKernel::Branch
naive_shot_branch(const TargetModel& model, const ShotConfig& cfg,
                  const ComplexMatrix& rho, double t) {
  const int d = model.target_dim();
  const ComplexMatrix B = quantum_field(model, t);
  const SpinOps s = spin_half_ops();
  const ComplexMatrix V = kron(s.Iz, B);
  const ComplexMatrix U = herm_expm(V, -cfg.tau); // exp(-i tau V)
  ComplexMatrix x(2, 1);
  x << 1.0 / std::sqrt(2.0), 1.0 / std::sqrt(2.0);
  const ComplexMatrix rho_s = x * x.adjoint();
  const ComplexMatrix rho_full = kron(rho_s, rho);
  const ComplexMatrix evolved = U * rho_full * U.adjoint();
  const ComplexMatrix sigma_theta =
      std::cos(cfg.theta) * pauli_x() + std::sin(cfg.theta) * pauli_y();

  QuantumShotKernel::Branch br;
  for (int sgn : {+1, -1}) {
    const ComplexMatrix P =
        0.5 * (ComplexMatrix::Identity(2, 2) + double(sgn) * sigma_theta);
    const ComplexMatrix Pf = kron(P, ComplexMatrix::Identity(d, d));
    const ComplexMatrix m = Pf * evolved * Pf;
    const double p = m.trace().real();
    const ComplexMatrix red = partial_trace_first(m, 2) / p;
    if (sgn > 0) {
      br.p_plus = p;
      br.rho_plus = red;
    } else {
      br.p_minus = p;
      br.rho_minus = red;
    }
  }
  return br;
}

inline MeasurementRecord run_quantum(const TargetModel& model,
                                     const ShotConfig& cfg, Rng& rng,
                                     Backaction mode = Backaction::full) {
  QuantumShotKernel kernel(model, cfg, mode);
  MeasurementRecord rec;
  rec.t0 = cfg.t0;
  rec.config = cfg;
  rec.outcomes.resize(cfg.n_shots);
  ComplexMatrix rho = kernel.initial_state();
  for (long j = 0; j < cfg.n_shots; ++j)
    rec.outcomes[j] =
        static_cast<std::int8_t>(kernel.step(rho, cfg.shot_time(j), rng));
  return rec;
}

inline MeasurementRecord attach_photon_counts(const MeasurementRecord& record,
                                              const ReadoutModel& readout,
                                              Rng& rng) {
  readout.validate();
  MeasurementRecord out = record;
  std::vector<std::int32_t> counts(record.outcomes.size());
  for (std::size_t j = 0; j < record.outcomes.size(); ++j) {
    const double mean =
        record.outcomes[j] > 0 ? readout.n_plus : readout.n_minus;
    counts[j] = static_cast<std::int32_t>(rng.poisson(mean));
  }
  out.photon_counts = std::move(counts);
  return out;
}

} // namespace qns
