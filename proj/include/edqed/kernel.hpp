#pragma once

#include <Eigen/Sparse>

#include <cmath>
#include <complex>
#include <numbers>
#include <vector>

#include "edqed/lattice.hpp"

namespace edqed {

using SpMat = Eigen::SparseMatrix<cplx, Eigen::RowMajor>;
using Triplet = Eigen::Triplet<cplx>;

/// Basis for the field factor: amplitude levels or their discrete Fourier conjugates.
enum class Basis { configuration, electric };

enum class KernelTag { hamiltonian, constraint, observable };

// ---------------------------------------------------------------------------
// Field-momentum bookkeeping on the cyclic amplitude grid.

/// True for the Nyquist index of an even grid.
inline bool is_nyquist(int j, int M) { return M % 2 == 0 && 2 * j == M; }

/// Branch representative b of momentum index j: p = 2*pi*b/(M dA); 0 at Nyquist.
inline int momentum_branch(int j, int M) {
  if (is_nyquist(j, M)) return 0;
  return 2 * j < M ? j : j - M;
}

/// Index whose branch value is b, or -1 if b lies outside the (non-Nyquist) branch.
inline int momentum_index(int b, int M) {
  const int lo = -(M - 1) / 2;
  const int hi = (M - 1) / 2;
  if (b < lo || b > hi) return -1;
  return b >= 0 ? b : b + M;
}

/// Per-DOF unitary DFT of the field digits, configuration -> electric.
inline ComplexVec to_electric(const ConfigSpace& cs, const ComplexVec& psi) {
  ComplexVec out = psi;
  const int M = cs.levels();
  std::vector<cplx> w(M * M);
  for (int j = 0; j < M; ++j)
    for (int k = 0; k < M; ++k)
      w[j * M + k] = std::polar(1.0 / std::sqrt(double(M)), -2.0 * std::numbers::pi * j * k / M);
  std::vector<cplx> buf(M);
  for (int f = 0; f < cs.field_dofs(); ++f) {
    const std::int64_t s = cs.field_stride(f);
    for (std::int64_t i = 0; i < cs.size(); ++i) {
      if (cs.field_level(i, f) != 0) continue;
      for (int k = 0; k < M; ++k) buf[k] = out[i + k * s];
      for (int j = 0; j < M; ++j) {
        cplx acc = 0;
        for (int k = 0; k < M; ++k) acc += w[j * M + k] * buf[k];
        out[i + j * s] = acc;
      }
    }
  }
  return out;
}

inline ComplexVec to_configuration(const ConfigSpace& cs, const ComplexVec& psi) {
  ComplexVec out = psi;
  const int M = cs.levels();
  std::vector<cplx> w(M * M);
  for (int k = 0; k < M; ++k)
    for (int j = 0; j < M; ++j)
      w[k * M + j] = std::polar(1.0 / std::sqrt(double(M)), 2.0 * std::numbers::pi * j * k / M);
  std::vector<cplx> buf(M);
  for (int f = 0; f < cs.field_dofs(); ++f) {
    const std::int64_t s = cs.field_stride(f);
    for (std::int64_t i = 0; i < cs.size(); ++i) {
      if (cs.field_level(i, f) != 0) continue;
      for (int j = 0; j < M; ++j) buf[j] = out[i + j * s];
      for (int k = 0; k < M; ++k) {
        cplx acc = 0;
        for (int j = 0; j < M; ++j) acc += w[k * M + j] * buf[j];
        out[i + k * s] = acc;
      }
    }
  }
  return out;
}

inline ComplexVec change_basis(const ConfigSpace& cs, const ComplexVec& v, Basis from, Basis to) {
  if (from == to) return v;
  return to == Basis::electric ? to_electric(cs, v) : to_configuration(cs, v);
}

/**
 * Hermitian linear operator on configuration space, stored sparse in a
 * declared basis. States passed to apply/expectation are always in the
 * configuration basis.
 */
struct KernelOperator {
  SpMat mat;
  Basis basis = Basis::configuration;
  KernelTag tag = KernelTag::observable;

  std::int64_t size() const { return mat.rows(); }

  ComplexVec apply(const ConfigSpace& cs, const ComplexVec& psi) const {
    if (basis == Basis::configuration) return mat * psi;
    return to_configuration(cs, mat * to_electric(cs, psi));
  }

  /// <psi|O|psi> for a configuration-basis psi (real part; O is Hermitian).
  double expectation(const ConfigSpace& cs, const ComplexVec& psi) const {
    return psi.dot(apply(cs, psi)).real();
  }

  double hermiticity_residual() const {
    SpMat d = mat - SpMat(mat.adjoint());
    double m = 0;
    for (int k = 0; k < d.outerSize(); ++k)
      for (SpMat::InnerIterator it(d, k); it; ++it) m = std::max(m, std::abs(it.value()));
    return m;
  }
};

inline KernelOperator make_kernel(SpMat m, Basis b, KernelTag t) {
  KernelOperator k;
  k.mat = std::move(m);
  k.mat.makeCompressed();
  k.basis = b;
  k.tag = t;
  return k;
}

/// Largest K for which operators are densified (basis conversion, dense oracles).
inline constexpr std::uint64_t kDenseLimit = 8192;

/// Dense matrix of an operator in the requested basis (small K only).
inline Eigen::MatrixXcd dense_in(const ConfigSpace& cs, const KernelOperator& op, Basis target) {
  if (op.size() > kDenseLimit) throw CapacityError(static_cast<long double>(op.size()), kDenseLimit);
  Eigen::MatrixXcd d = Eigen::MatrixXcd(op.mat);
  if (op.basis == target) return d;
  const std::int64_t K = cs.size();
  Eigen::MatrixXcd out(K, K);
  for (std::int64_t c = 0; c < K; ++c) {
    ComplexVec e = ComplexVec::Zero(K);
    e[c] = 1.0;
    ComplexVec v = change_basis(cs, e, target, op.basis);
    out.col(c) = change_basis(cs, d * v, op.basis, target);
  }
  return out;
}

inline SpMat sparsify(const Eigen::MatrixXcd& d, double tol = 1e-14) {
  const double scale = std::max(1.0, d.cwiseAbs().maxCoeff());
  std::vector<Triplet> t;
  for (int i = 0; i < d.rows(); ++i)
    for (int j = 0; j < d.cols(); ++j)
      if (std::abs(d(i, j)) > tol * scale) t.emplace_back(i, j, d(i, j));
  SpMat m(d.rows(), d.cols());
  m.setFromTriplets(t.begin(), t.end());
  return m;
}

inline KernelOperator convert(const ConfigSpace& cs, const KernelOperator& op, Basis target) {
  if (op.basis == target) return op;
  return make_kernel(sparsify(dense_in(cs, op, target)), target, op.tag);
}

inline KernelOperator add(const ConfigSpace& cs, const KernelOperator& a, const KernelOperator& b,
                          cplx sb = 1.0) {
  if (a.basis == b.basis) return make_kernel(SpMat(a.mat + sb * b.mat), a.basis, a.tag);
  KernelOperator bc = convert(cs, b, a.basis);
  return make_kernel(SpMat(a.mat + sb * bc.mat), a.basis, a.tag);
}

/// Diagonal operator in the configuration basis.
inline KernelOperator diagonal_kernel(const RealVec& d, KernelTag tag = KernelTag::observable) {
  SpMat m(d.size(), d.size());
  m.reserve(Eigen::VectorXi::Constant(d.size(), 1));
  for (int i = 0; i < d.size(); ++i) m.insert(i, i) = d[i];
  return make_kernel(std::move(m), Basis::configuration, tag);
}

/// max ||[A,B] v|| / ||v|| over a set of probe vectors (configuration basis).
inline double commutator_norm(const ConfigSpace& cs, const KernelOperator& a, const KernelOperator& b,
                              const std::vector<ComplexVec>& probes) {
  double m = 0;
  for (const auto& v : probes) {
    ComplexVec r = a.apply(cs, b.apply(cs, v)) - b.apply(cs, a.apply(cs, v));
    m = std::max(m, r.norm() / v.norm());
  }
  return m;
}

/// Max absolute row sum of the stored matrix; bounds the operator norm.
inline double row_sum_norm(const KernelOperator& op) {
  double m = 0;
  for (int k = 0; k < op.mat.outerSize(); ++k) {
    double s = 0;
    for (SpMat::InnerIterator it(op.mat, k); it; ++it) s += std::abs(it.value());
    m = std::max(m, s);
  }
  return m;
}

}  // namespace edqed
