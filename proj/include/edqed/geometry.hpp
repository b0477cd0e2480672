#pragma once

#include <cmath>
#include <numbers>

#include "edqed/kernel.hpp"
#include "edqed/lattice.hpp"

namespace edqed {

/// (rho, phi) coordinates of a point of the epistemic phase space.
struct EpistemicState {
  RealVec rho;
  RealVec phi;
  bool normalized = false;

  void check(double tol = 1e-12) const {
    if (rho.size() != phi.size()) throw IndexError("rho and phi lengths differ");
    if ((rho.array() < 0).any()) throw NumericalError("rho has negative entries");
    if (normalized && std::abs(rho.sum() - 1.0) > tol) throw NumericalError("rho is not normalized");
  }
};

struct TangentVector {
  RealVec d_rho;
  RealVec d_phi;
};

inline void require_same_length(const TangentVector& v, const TangentVector& u) {
  if (v.d_rho.size() != u.d_rho.size() || v.d_phi.size() != u.d_phi.size() ||
      v.d_rho.size() != v.d_phi.size())
    throw IndexError("tangent vector lengths differ");
}

inline double omega(const TangentVector& v, const TangentVector& u) {
  require_same_length(v, u);
  return v.d_rho.dot(u.d_phi) - v.d_phi.dot(u.d_rho);
}

inline double metric_length_sq(const EpistemicState& s, const TangentVector& dx, double hbar) {
  if (s.rho.size() != dx.d_rho.size()) throw IndexError("state and tangent vector lengths differ");
  double sum = 0;
  for (int k = 0; k < s.rho.size(); ++k) {
    const double r = s.rho[k];
    if (r == 0.0) {
      if (dx.d_rho[k] != 0.0) throw SingularSupport("metric: d_rho nonzero where rho = 0");
      continue;
    }
    sum += hbar / (2.0 * r) * dx.d_rho[k] * dx.d_rho[k] + 2.0 * r / hbar * dx.d_phi[k] * dx.d_phi[k];
  }
  return sum;
}

/// G(V,U) = sum (hbar/2rho) dV_rho dU_rho + (2rho/hbar) dV_phi dU_phi.
inline double metric(const EpistemicState& s, const TangentVector& v, const TangentVector& u, double hbar) {
  require_same_length(v, u);
  double sum = 0;
  for (int k = 0; k < s.rho.size(); ++k) {
    const double r = s.rho[k];
    if (r == 0.0) {
      if (v.d_rho[k] != 0.0 || u.d_rho[k] != 0.0) throw SingularSupport("metric: d_rho nonzero where rho = 0");
      continue;
    }
    sum += hbar / (2.0 * r) * v.d_rho[k] * u.d_rho[k] + 2.0 * r / hbar * v.d_phi[k] * u.d_phi[k];
  }
  return sum;
}

inline TangentVector j_apply(const EpistemicState& s, const TangentVector& v, double hbar) {
  if (s.rho.size() != v.d_rho.size()) throw IndexError("state and tangent vector lengths differ");
  TangentVector out{RealVec(v.d_rho.size()), RealVec(v.d_phi.size())};
  for (int k = 0; k < s.rho.size(); ++k) {
    const double r = s.rho[k];
    if (r <= 0.0) {
      if (v.d_rho[k] != 0.0 || v.d_phi[k] != 0.0) throw SingularSupport("J is singular where rho = 0");
      out.d_rho[k] = out.d_phi[k] = 0.0;
      continue;
    }
    out.d_rho[k] = -2.0 * r / hbar * v.d_phi[k];
    out.d_phi[k] = hbar / (2.0 * r) * v.d_rho[k];
  }
  return out;
}

inline ComplexVec to_wavefunction(const RealVec& rho, const RealVec& phi, double hbar) {
  if (rho.size() != phi.size()) throw IndexError("rho and phi lengths differ");
  ComplexVec psi(rho.size());
  for (int k = 0; k < rho.size(); ++k) {
    if (rho[k] < 0) throw NumericalError("rho has negative entries");
    psi[k] = std::polar(std::sqrt(rho[k]), phi[k] / hbar);
  }
  return psi;
}

inline ComplexVec to_wavefunction(const EpistemicState& s, double hbar) {
  return to_wavefunction(s.rho, s.phi, hbar);
}

/// rho = |psi|^2, phi = hbar*arg(psi) in (-pi hbar, pi hbar]; phi = 0 where rho = 0.
inline EpistemicState from_wavefunction(const ComplexVec& psi, double hbar) {
  EpistemicState s{RealVec(psi.size()), RealVec(psi.size())};
  for (int k = 0; k < psi.size(); ++k) {
    s.rho[k] = std::norm(psi[k]);
    if (s.rho[k] == 0.0) {
      s.phi[k] = 0.0;
      continue;
    }
    double a = std::arg(psi[k]);
    if (a <= -std::numbers::pi) a += 2.0 * std::numbers::pi;
    s.phi[k] = hbar * a;
  }
  return s;
}

/// Tangent vector (d_rho, d_phi) induced at psi by a wavefunction displacement dpsi (first order).
inline TangentVector tangent_from_dpsi(const ComplexVec& psi, const ComplexVec& dpsi, double hbar) {
  TangentVector t{RealVec(psi.size()), RealVec(psi.size())};
  for (int k = 0; k < psi.size(); ++k) {
    const double r = std::norm(psi[k]);
    t.d_rho[k] = 2.0 * (std::conj(psi[k]) * dpsi[k]).real();
    t.d_phi[k] = r > 0 ? hbar * (std::conj(psi[k]) * dpsi[k]).imag() / r : 0.0;
  }
  return t;
}

/// (1/i hbar) <psi|[V,U]|psi>; rejects non-Hermitian kernels.
inline double poisson_bracket(const ConfigSpace& cs, const KernelOperator& v, const KernelOperator& u,
                              const ComplexVec& psi, double hbar, double herm_tol = 1e-12) {
  if (v.hermiticity_residual() > herm_tol || u.hermiticity_residual() > herm_tol)
    throw NumericalError("poisson_bracket: kernel is not Hermitian");
  const ComplexVec vp = v.apply(cs, psi);
  const ComplexVec up = u.apply(cs, psi);
  // <psi|VU - UV|psi> = <V psi|U psi> - <U psi|V psi> = 2i Im<V psi|U psi>
  return 2.0 * vp.dot(up).imag() / hbar;
}

inline double normalization_functional(const ComplexVec& psi) { return 1.0 - psi.squaredNorm(); }

inline ComplexVec ray_flow(const ComplexVec& psi, double nu, double hbar) {
  return psi * std::polar(1.0, nu / hbar);
}

}  // namespace edqed
