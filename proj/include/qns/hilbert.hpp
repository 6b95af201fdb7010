// Dense complex linear algebra for small Hilbert spaces (dim <= 128):
// spin-1/2 operators, tensor products, Hermitian matrix exponentials and
// density-operator validation. Everything is value-semantic Eigen.
#pragma once

#include <complex>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace qns {

using cxd = std::complex<double>;
using ComplexMatrix = Eigen::MatrixXcd;

// Largest Hilbert space handled anywhere: sensor (x) 6 nuclear spins.
inline constexpr Eigen::Index kMaxDim = 128;

namespace tol {
inline constexpr double algebraic = 1e-12;  // exact identities
inline constexpr double decomposed = 1e-10; // eigendecomposition-mediated
inline constexpr double psd_eig = -1e-10;   // density eigenvalue floor
} // namespace tol

struct SpinOps {
  ComplexMatrix Ix, Iy, Iz;
};

// Spin-1/2 operators (eigenvalues +-1/2); Pauli matrices are 2x these.
inline SpinOps spin_half_ops() {
  SpinOps s;
  s.Ix.resize(2, 2);
  s.Ix << 0.0, 0.5, 0.5, 0.0;
  s.Iy.resize(2, 2);
  s.Iy << 0.0, cxd(0, -0.5), cxd(0, 0.5), 0.0;
  s.Iz.resize(2, 2);
  s.Iz << 0.5, 0.0, 0.0, -0.5;
  return s;
}

inline ComplexMatrix pauli_x() { return 2.0 * spin_half_ops().Ix; }
inline ComplexMatrix pauli_y() { return 2.0 * spin_half_ops().Iy; }
inline ComplexMatrix pauli_z() { return 2.0 * spin_half_ops().Iz; }

inline ComplexMatrix kron(const ComplexMatrix& a, const ComplexMatrix& b) {
  const Eigen::Index dim = a.rows() * b.rows();
  if (dim > kMaxDim)
    throw std::invalid_argument("kron: result dimension " +
                                std::to_string(dim) + " exceeds " +
                                std::to_string(kMaxDim));
  ComplexMatrix out(dim, a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j)
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

inline void check_same_dim(const ComplexMatrix& a, const ComplexMatrix& b,
                           const char* what) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw std::invalid_argument(std::string(what) + ": dimension mismatch");
}

inline ComplexMatrix commutator(const ComplexMatrix& a,
                                const ComplexMatrix& b) {
  check_same_dim(a, b, "commutator");
  return a * b - b * a;
}

inline ComplexMatrix anticommutator(const ComplexMatrix& a,
                                    const ComplexMatrix& b) {
  check_same_dim(a, b, "anticommutator");
  return a * b + b * a;
}

inline bool is_hermitian(const ComplexMatrix& m, double tolerance) {
  return (m - m.adjoint()).cwiseAbs().maxCoeff() <= tolerance;
}

// exp(i * scale * h) for Hermitian h, via eigendecomposition. Inputs within
// 1e-10 of Hermitian are symmetrized first; anything worse is a contract
// violation.
inline ComplexMatrix herm_expm(const ComplexMatrix& h, double scale) {
  if (!is_hermitian(h, tol::decomposed))
    throw std::invalid_argument("herm_expm: input is not Hermitian");
  ComplexMatrix hs = 0.5 * (h + h.adjoint());
  Eigen::SelfAdjointEigenSolver<ComplexMatrix> es(hs);
  if (es.info() != Eigen::Success)
    throw std::runtime_error("herm_expm: eigendecomposition failed");
  const auto& w = es.eigenvalues();
  Eigen::VectorXcd phases(w.size());
  for (Eigen::Index k = 0; k < w.size(); ++k)
    phases[k] = std::exp(cxd(0.0, scale * w[k]));
  return es.eigenvectors() * phases.asDiagonal() *
         es.eigenvectors().adjoint();
}

// Embed a single-spin operator at position `which` among n_spins factors.
inline ComplexMatrix embed_spin_op(const ComplexMatrix& op, int which,
                                   int n_spins) {
  ComplexMatrix out = ComplexMatrix::Identity(1, 1);
  for (int k = 0; k < n_spins; ++k) {
    if (k == which)
      out = kron(out, op);
    else
      out = kron(out, ComplexMatrix::Identity(2, 2));
  }
  return out;
}

// Trace out the first tensor factor of dimension dim_first.
inline ComplexMatrix partial_trace_first(const ComplexMatrix& m,
                                         Eigen::Index dim_first) {
  if (m.rows() % dim_first != 0)
    throw std::invalid_argument("partial_trace_first: dimension mismatch");
  const Eigen::Index d = m.rows() / dim_first;
  ComplexMatrix out = ComplexMatrix::Zero(d, d);
  for (Eigen::Index s = 0; s < dim_first; ++s)
    out += m.block(s * d, s * d, d, d);
  return out;
}

struct DensityCheck {
  bool ok = true;
  double herm_dev = 0.0;
  double min_eig = 0.0;
  double trace_dev = 0.0;
};

// Hermitian within 1e-12, PSD within eigenvalue tolerance -1e-10, unit trace
// within 1e-12.
inline DensityCheck check_density(const ComplexMatrix& rho) {
  DensityCheck c;
  c.herm_dev = (rho - rho.adjoint()).cwiseAbs().maxCoeff();
  c.trace_dev = std::abs(rho.trace() - cxd(1.0, 0.0));
  Eigen::SelfAdjointEigenSolver<ComplexMatrix> es(0.5 *
                                                  (rho + rho.adjoint()));
  c.min_eig = es.eigenvalues().minCoeff();
  c.ok = c.herm_dev <= tol::algebraic && c.trace_dev <= tol::algebraic &&
         c.min_eig >= tol::psd_eig;
  return c;
}

inline void require_density(const ComplexMatrix& rho, const char* where) {
  DensityCheck c = check_density(rho);
  if (!c.ok)
    throw std::runtime_error(std::string(where) +
                             ": invalid density operator (herm_dev=" +
                             std::to_string(c.herm_dev) +
                             ", min_eig=" + std::to_string(c.min_eig) +
                             ", trace_dev=" + std::to_string(c.trace_dev) +
                             ")");
}

} // namespace qns
