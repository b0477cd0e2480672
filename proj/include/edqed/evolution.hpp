#pragma once

#include <Eigen/Dense>
#include <Eigen/IterativeLinearSolvers>
#include <Eigen/SparseLU>

#include <cmath>
#include <numbers>
#include <vector>

#include "edqed/gauge.hpp"
#include "edqed/geometry.hpp"
#include "edqed/hamiltonian.hpp"

namespace edqed {

/// Phase difference reduced to (-pi hbar, pi hbar].
inline double wrap_phase(double d, double hbar) {
  const double p = 2.0 * std::numbers::pi * hbar;
  d = std::remainder(d, p);
  if (d <= -0.5 * p) d += p;
  return d;
}

/// Mean of the two links touched by a central hop of particle n along a: (A(z) + A(z-e))/2.
inline double hop_averaged_A(const ConfigSpace& cs, std::int64_t idx, int n, int a) {
  const int z = cs.particle_site(idx, n);
  const int zb = cs.lattice().shift(z, a, -1);
  return 0.5 * (cs.field_value(idx, cs.field_index(z, a)) + cs.field_value(idx, cs.field_index(zb, a)));
}

struct CurrentVelocity {
  Eigen::MatrixXd v;  // K x (N*D), column n*D + a
  Eigen::MatrixXd u;  // K x (V*D), column x*D + a
};

/**
 * v_n^a = (1/m_n)(d_na phi - (q_n/c) A_bar), u_xa = c^2 dphi/dA_xa.
 * Central differences of the phase are taken modulo 2 pi hbar.
 */
inline CurrentVelocity current_velocity(const ConfigSpace& cs, const EpistemicState& st) {
  const LatticeSpec& s = cs.spec();
  if (st.phi.size() != cs.size()) throw IndexError("state has wrong length");
  CurrentVelocity cv{Eigen::MatrixXd::Zero(cs.size(), cs.particle_dofs()),
                     Eigen::MatrixXd::Zero(cs.size(), cs.field_dofs())};
  const double fden = 2.0 * s.dA * s.cell_volume();
  for (std::int64_t i = 0; i < cs.size(); ++i) {
    for (int n = 0; n < s.num_particles(); ++n) {
      const Particle& p = s.particles[n];
      for (int a = 0; a < s.dim; ++a) {
        const double d = wrap_phase(st.phi[cs.shift_particle(i, n, a, 1)] - st.phi[cs.shift_particle(i, n, a, -1)],
                                    s.hbar) / (2.0 * s.dx);
        cv.v(i, n * s.dim + a) = (d - p.charge / s.c * hop_averaged_A(cs, i, n, a)) / p.mass;
      }
    }
    for (int f = 0; f < cs.field_dofs(); ++f) {
      const double d = wrap_phase(st.phi[cs.shift_field(i, f, 1)] - st.phi[cs.shift_field(i, f, -1)], s.hbar);
      cv.u(i, f) = s.c * s.c * d / fden;
    }
  }
  return cv;
}

// ---------------------------------------------------------------------------
// Hamiltonian functionals.
//
// FChoice::zero is the quadratic form
//   sum_i rho_i [ sum_n (m_n/2) v_n^2 + sum_f dx^D u_f^2 / (2 c^2) ]
// built from current_velocity. FChoice::quantum_potential is the lattice
// Madelung form of <psi|H|psi> for configuration-basis entries h_ij, with
// psi = sqrt(rho) exp(i phi/hbar) and theta_ij = (phi_j - phi_i)/hbar + arg(-h_ij):
//   <psi|H|psi> = sum_{i<j} 2|h_ij| sqrt(rho_i rho_j)(1 - cos theta_ij) + F_QP[rho]
//   F_QP[rho]   = sum_{i<j} |h_ij| (sqrt rho_i - sqrt rho_j)^2 + sum_i rho_i (h_ii - sum_{j!=i} |h_ij|)
// The two kinetic terms are distinct discretizations of the same continuum functional.

enum class FChoice { zero, quantum_potential };

inline void require_configuration(const KernelOperator& h) {
  if (h.basis != Basis::configuration)
    throw InvalidSpec("functional needs the configuration-basis kernel; convert it first");
}

inline double kinetic_functional(const ConfigSpace& cs, const EpistemicState& st) {
  const LatticeSpec& s = cs.spec();
  if (st.rho.size() != cs.size()) throw IndexError("state has wrong length");
  const CurrentVelocity cv = current_velocity(cs, st);
  double acc = 0;
  for (std::int64_t i = 0; i < cs.size(); ++i) {
    double e = 0;
    for (int n = 0; n < s.num_particles(); ++n)
      for (int a = 0; a < s.dim; ++a) e += 0.5 * s.particles[n].mass * std::pow(cv.v(i, n * s.dim + a), 2);
    e += 0.5 * s.cell_volume() / (s.c * s.c) * cv.u.row(i).squaredNorm();
    acc += st.rho[i] * e;
  }
  return acc;
}

inline double hamiltonian_functional(const ConfigSpace& cs, const KernelOperator& h, const EpistemicState& st,
                                     FChoice fc = FChoice::quantum_potential) {
  if (fc == FChoice::zero) return kinetic_functional(cs, st);
  require_configuration(h);
  if (st.rho.size() != h.size()) throw IndexError("state has wrong length");
  const double hbar = cs.spec().hbar;
  double kin = 0, fq = 0;
  for (int i = 0; i < h.mat.outerSize(); ++i) {
    const double si = std::sqrt(st.rho[i]);
    double off = 0;
    for (SpMat::InnerIterator it(h.mat, i); it; ++it) {
      const auto j = it.col();
      if (j == i) {
        fq += st.rho[i] * it.value().real();
        continue;
      }
      const double m = std::abs(it.value());
      off += m;
      if (j < i) continue;
      const double sj = std::sqrt(st.rho[j]);
      const double th = (st.phi[j] - st.phi[i]) / hbar + std::arg(-it.value());
      kin += 2.0 * m * si * sj * (1.0 - std::cos(th));
      fq += m * (si - sj) * (si - sj);
    }
    fq -= st.rho[i] * off;
  }
  return kin + fq;
}

/// d rho / dt = dH~/dphi of the quantum-potential functional: net lattice probability inflow per configuration.
inline RealVec continuity_rhs(const ConfigSpace& cs, const KernelOperator& h, const EpistemicState& st) {
  require_configuration(h);
  const double hbar = cs.spec().hbar;
  if (st.rho.size() != h.size()) throw IndexError("state has wrong length");
  RealVec out = RealVec::Zero(h.size());
  for (int i = 0; i < h.mat.outerSize(); ++i) {
    const double si = std::sqrt(st.rho[i]);
    for (SpMat::InnerIterator it(h.mat, i); it; ++it) {
      const auto j = it.col();
      if (j <= i) continue;
      const double th = (st.phi[j] - st.phi[i]) / hbar + std::arg(-it.value());
      const double flow = 2.0 * std::abs(it.value()) * si * std::sqrt(st.rho[j]) * std::sin(th) / hbar;
      out[j] += flow;
      out[i] -= flow;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Implicit midpoint (Crank-Nicolson) integrator.

/// Default step 0.1 hbar / ||H||_inf (max absolute row sum).
inline double default_dt(const KernelOperator& h, double hbar) {
  const double n = row_sum_norm(h);
  return n > 0 ? 0.1 * hbar / n : 0.1 * hbar;
}

/**
 * Solves (I + i tau H) psi' = (I - i tau H) psi, tau = dt/(2 hbar), in the
 * basis the kernel is stored in. Small systems use a sparse LU factorization;
 * larger ones BiCGSTAB with relative tolerance 1e-14.
 */
class CrankNicolson {
 public:
  CrankNicolson(const KernelOperator& h, double dt, double hbar) : basis_(h.basis) {
    const cplx it(0.0, dt / (2.0 * hbar));
    SpMat id(h.size(), h.size());
    id.setIdentity();
    plus_ = Eigen::SparseMatrix<cplx>(id + it * h.mat);
    minus_ = SpMat(id - it * h.mat);
    if (h.size() <= kDirectLimit) {
      lu_.compute(plus_);
      if (lu_.info() != Eigen::Success) throw NumericalError("integrator: factorization failed");
      direct_ = true;
    } else {
      iter_.setTolerance(1e-14);
      iter_.setMaxIterations(2000);
      iter_.compute(plus_);
    }
  }

  Basis basis() const { return basis_; }

  /// One step on a vector already in the kernel's basis.
  ComplexVec step(const ComplexVec& v) {
    const ComplexVec rhs = minus_ * v;
    ComplexVec out;
    if (direct_) {
      out = lu_.solve(rhs);
      if (lu_.info() != Eigen::Success) throw NumericalError("integrator: linear solve failed");
    } else {
      out = iter_.solveWithGuess(rhs, v);
      if (iter_.info() != Eigen::Success)
        throw NumericalError("integrator: linear solve failed (residual " + std::to_string(iter_.error()) + ")");
    }
    return out;
  }

 private:
  static constexpr std::int64_t kDirectLimit = 4096;
  Basis basis_;
  Eigen::SparseMatrix<cplx> plus_;
  SpMat minus_;
  bool direct_ = false;
  Eigen::SparseLU<Eigen::SparseMatrix<cplx>> lu_;
  Eigen::BiCGSTAB<Eigen::SparseMatrix<cplx>, Eigen::DiagonalPreconditioner<cplx>> iter_;
};

/// Configuration-basis psi advanced by `steps` implicit-midpoint steps.
inline ComplexVec evolve_schrodinger(const ConfigSpace& cs, const ComplexVec& psi, const KernelOperator& h,
                                     double dt, int steps, double hbar) {
  if (psi.size() != h.size()) throw IndexError("state and kernel sizes differ");
  if (steps <= 0) return psi;
  CrankNicolson cn(h, dt, hbar);
  ComplexVec v = change_basis(cs, psi, Basis::configuration, h.basis);
  for (int k = 0; k < steps; ++k) v = cn.step(v);
  return change_basis(cs, v, h.basis, Basis::configuration);
}

/// Trajectory of configuration-basis states psi_0 .. psi_steps.
inline std::vector<ComplexVec> evolve_path(const ConfigSpace& cs, const ComplexVec& psi, const KernelOperator& h,
                                           double dt, int steps, double hbar) {
  CrankNicolson cn(h, dt, hbar);
  std::vector<ComplexVec> path{psi};
  ComplexVec v = change_basis(cs, psi, Basis::configuration, h.basis);
  for (int k = 0; k < steps; ++k) {
    v = cn.step(v);
    path.push_back(change_basis(cs, v, h.basis, Basis::configuration));
  }
  return path;
}

/// H_Phi = H + sum_x dx^D Phi_x Gamma_x.
inline KernelOperator modified_hamiltonian(const ConfigSpace& cs, const KernelOperator& h, const RealVec& phi,
                                           const ConstraintOperator& g) {
  KernelOperator out = add(cs, h, g.smeared(phi, cs.spec().cell_volume()));
  out.tag = KernelTag::hamiltonian;
  return out;
}

struct ActionResidual {
  RealVec schrodinger;  // interior steps k = 1..n-2
  RealVec gauss;        // max_x |<psi_k|Gamma_x|psi_k>| for every k
};

/**
 * Euler-Lagrange residuals of the discrete action
 *   S = sum_k dt [ i hbar psi_k^* (psi_{k+1} - psi_{k-1}) / (2 dt) - psi_k^* H_Phi_k psi_k ].
 * Varying psi_k^* gives i hbar (psi_{k+1} - psi_{k-1})/(2dt) - H_Phi_k psi_k;
 * varying Phi_x gives <psi_k|Gamma_x|psi_k>.
 */
inline ActionResidual action_residual(const ConfigSpace& cs, const std::vector<ComplexVec>& path,
                                      const std::vector<RealVec>& phi_path, const KernelOperator& h,
                                      const ConstraintOperator& g, double dt) {
  if (path.size() != phi_path.size()) throw IndexError("path and Phi path lengths differ");
  if (path.size() < 3) throw IndexError("path needs at least three time points");
  const double hbar = cs.spec().hbar;
  const int n = static_cast<int>(path.size());
  ActionResidual r{RealVec::Zero(n - 2), RealVec::Zero(n)};
  for (int k = 0; k < n; ++k) {
    if (path[k].size() != cs.size()) throw IndexError("path state has wrong length");
    r.gauss[k] = constraint_expectations(cs, g, path[k]).cwiseAbs().maxCoeff();
    if (k == 0 || k == n - 1) continue;
    const KernelOperator hp = modified_hamiltonian(cs, h, phi_path[k], g);
    const ComplexVec res = cplx(0, hbar) * (path[k + 1] - path[k - 1]) / (2.0 * dt) - hp.apply(cs, path[k]);
    r.schrodinger[k - 1] = res.norm();
  }
  return r;
}

}  // namespace edqed
