#pragma once

#include <cmath>
#include <functional>
#include <numbers>
#include <random>
#include <vector>

#include "edqed/hamiltonian.hpp"
#include "edqed/kernel.hpp"
#include "edqed/lattice.hpp"

namespace edqed {

// ---------------------------------------------------------------------------
// Gauge functions and transformations.

/// Site-wise gauge function xi; values must be integer multiples of dx*dA.
struct GaugeFunction {
  RealVec xi;
};

/// Integer level shifts n_x = xi_x / (dx dA); throws if xi is not commensurate.
inline std::vector<int> gauge_levels(const LatticeSpec& s, const RealVec& xi) {
  if (xi.size() != s.num_sites()) throw IndexError("gauge function has wrong length");
  std::vector<int> n(xi.size());
  const double unit = s.dx * s.dA;
  for (int x = 0; x < xi.size(); ++x) {
    const double r = xi[x] / unit;
    const double k = std::round(r);
    if (!std::isfinite(r) || std::abs(r - k) > 1e-9)
      throw InvalidSpec("gauge function is not commensurate with dx*dA at site " + std::to_string(x));
    n[x] = static_cast<int>(std::fmod(k, static_cast<double>(s.levels)));
  }
  return n;
}

/// A -> A + grad xi on level vectors (indexed f = x*D + a), reduced mod M.
inline std::vector<int> gauge_transform_field(const LatticeSpec& s, const std::vector<int>& A, const RealVec& xi) {
  const std::vector<int> n = gauge_levels(s, xi);
  const SiteLattice lat(s);
  if (static_cast<int>(A.size()) != s.field_dofs()) throw IndexError("field vector has wrong length");
  std::vector<int> out(A.size());
  for (int x = 0; x < lat.volume(); ++x)
    for (int a = 0; a < s.dim; ++a) {
      const int f = x * s.dim + a;
      int k = (A[f] + n[lat.shift(x, a, 1)] - n[x]) % s.levels;
      out[f] = k < 0 ? k + s.levels : k;
    }
  return out;
}

/// Configuration permutation (z, A) -> (z, A^xi) as an index map.
inline std::vector<std::int64_t> gauge_permutation(const ConfigSpace& cs, const RealVec& xi) {
  const LatticeSpec& s = cs.spec();
  const std::vector<int> n = gauge_levels(s, xi);
  const SiteLattice& lat = cs.lattice();
  std::vector<int> shift(s.field_dofs());
  for (int x = 0; x < lat.volume(); ++x)
    for (int a = 0; a < s.dim; ++a) shift[x * s.dim + a] = n[lat.shift(x, a, 1)] - n[x];
  std::vector<std::int64_t> perm(cs.size());
  for (std::int64_t i = 0; i < cs.size(); ++i) {
    std::int64_t j = i;
    for (int f = 0; f < s.field_dofs(); ++f)
      if (shift[f] != 0) j = cs.shift_field(j, f, shift[f]);
    perm[i] = j;
  }
  return perm;
}

/// Charge phase (1/hbar c) sum_n q_n xi(z_n) at every configuration; any real xi.
inline RealVec charge_phase(const ConfigSpace& cs, const RealVec& xi) {
  const LatticeSpec& s = cs.spec();
  if (xi.size() != s.num_sites()) throw IndexError("gauge function has wrong length");
  RealVec th = RealVec::Zero(cs.size());
  for (std::int64_t i = 0; i < cs.size(); ++i)
    for (int n = 0; n < s.num_particles(); ++n)
      th[i] += s.particles[n].charge * xi[cs.particle_site(i, n)] / (s.hbar * s.c);
  return th;
}

/// psi'[z, A^xi] = psi[z, A] exp((i/hbar c) sum_n q_n xi(z_n)).
inline ComplexVec gauge_transform_state(const ConfigSpace& cs, const ComplexVec& psi, const RealVec& xi) {
  if (psi.size() != cs.size()) throw IndexError("state has wrong length");
  const std::vector<std::int64_t> perm = gauge_permutation(cs, xi);
  const RealVec th = charge_phase(cs, xi);
  ComplexVec out(psi.size());
  for (std::int64_t i = 0; i < cs.size(); ++i) out[perm[i]] = psi[i] * std::polar(1.0, th[i]);
  return out;
}

// ---------------------------------------------------------------------------
// Electric field and Gauss constraint (diagonal in the electric basis).

/// E eigenvalue of momentum index j: -(hbar c / dx^D) * 2 pi b / (M dA).
inline double electric_eigenvalue(const LatticeSpec& s, int j) {
  const double p = 2.0 * std::numbers::pi * momentum_branch(j, s.levels) / (s.levels * s.dA);
  return -(s.hbar * s.c / s.cell_volume()) * p;
}

inline KernelOperator electric_field_operator(const ConfigSpace& cs, int x, int a) {
  const LatticeSpec& s = cs.spec();
  if (x < 0 || x >= s.num_sites() || a < 0 || a >= s.dim) throw IndexError("electric field site out of range");
  const int f = cs.field_index(x, a);
  RealVec d(cs.size());
  for (std::int64_t i = 0; i < cs.size(); ++i) d[i] = electric_eigenvalue(s, cs.field_level(i, f));
  KernelOperator op = diagonal_kernel(d, KernelTag::observable);
  op.basis = Basis::electric;
  return op;
}

/// Diagonal of the field-amplitude operator A_f in the configuration basis.
inline KernelOperator amplitude_operator(const ConfigSpace& cs, int x, int a) {
  const int f = cs.field_index(x, a);
  RealVec d(cs.size());
  for (std::int64_t i = 0; i < cs.size(); ++i) d[i] = cs.field_value(i, f);
  return diagonal_kernel(d, KernelTag::observable);
}

/**
 * Per-site Gauss constraint Gamma_x = rho^e_x - (div E)_x, stored as the
 * electric-basis diagonal of every site. With `background` a uniform
 * neutralizing density -Q/(V dx^D) is added to rho^e.
 */
struct ConstraintOperator {
  std::vector<RealVec> site;  // [x] -> length-K diagonal, electric basis

  int sites() const { return static_cast<int>(site.size()); }

  KernelOperator at(int x) const {
    KernelOperator k = diagonal_kernel(site.at(x), KernelTag::constraint);
    k.basis = Basis::electric;
    return k;
  }

  /// Smeared constraint sum_x dx^D Phi_x Gamma_x (electric-basis diagonal).
  RealVec smeared_diagonal(const RealVec& phi, double cell) const {
    if (phi.size() != sites()) throw IndexError("smearing has wrong length");
    RealVec d = RealVec::Zero(site.empty() ? 0 : site[0].size());
    for (int x = 0; x < sites(); ++x) d += cell * phi[x] * site[x];
    return d;
  }

  KernelOperator smeared(const RealVec& phi, double cell) const {
    KernelOperator k = diagonal_kernel(smeared_diagonal(phi, cell), KernelTag::constraint);
    k.basis = Basis::electric;
    return k;
  }

  /// sum_x dx^D Gamma_x^2 (electric-basis diagonal).
  RealVec squared_diagonal(double cell) const {
    RealVec d = RealVec::Zero(site.empty() ? 0 : site[0].size());
    for (const auto& g : site) d.array() += cell * g.array().square();
    return d;
  }
};

/// rho^e_x diagonal (either basis: it only depends on particle positions).
inline std::vector<RealVec> charge_density_diagonals(const ConfigSpace& cs) {
  const LatticeSpec& s = cs.spec();
  std::vector<RealVec> out(s.num_sites(), RealVec::Zero(cs.size()));
  for (std::int64_t i = 0; i < cs.size(); ++i)
    for (int n = 0; n < s.num_particles(); ++n)
      out[cs.particle_site(i, n)][i] += s.particles[n].charge / s.cell_volume();
  return out;
}

inline double total_charge(const LatticeSpec& s) {
  double q = 0;
  for (const auto& p : s.particles) q += p.charge;
  return q;
}

inline ConstraintOperator gauss_constraint(const ConfigSpace& cs, bool background = false) {
  const LatticeSpec& s = cs.spec();
  const SiteLattice& lat = cs.lattice();
  ConstraintOperator g;
  g.site = charge_density_diagonals(cs);
  const double bg = background ? total_charge(s) / (lat.volume() * s.cell_volume()) : 0.0;
  std::vector<double> ev(s.levels);
  for (int j = 0; j < s.levels; ++j) ev[j] = electric_eigenvalue(s, j);
  for (int x = 0; x < lat.volume(); ++x) {
    RealVec& d = g.site[x];
    d.array() -= bg;
    for (int a = 0; a < s.dim; ++a) {
      const int fo = cs.field_index(x, a);
      const int fi = cs.field_index(lat.shift(x, a, -1), a);
      for (std::int64_t i = 0; i < cs.size(); ++i)
        d[i] -= (ev[cs.field_level(i, fo)] - ev[cs.field_level(i, fi)]) / s.dx;
    }
  }
  return g;
}

/// max over probe vectors of ||[Gamma_Phi, Gamma_Phi'] v|| / ||v||.
inline double first_class_check(const ConfigSpace& cs, const ConstraintOperator& g, const RealVec& phi1,
                                const RealVec& phi2, const std::vector<ComplexVec>& probes) {
  const double cell = cs.spec().cell_volume();
  return commutator_norm(cs, g.smeared(phi1, cell), g.smeared(phi2, cell), probes);
}

/// Deterministic complex Gaussian probe vectors.
inline std::vector<ComplexVec> random_probes(std::int64_t K, int count, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> nd;
  std::vector<ComplexVec> out;
  for (int p = 0; p < count; ++p) {
    ComplexVec v(K);
    for (std::int64_t i = 0; i < K; ++i) v[i] = cplx(nd(gen), nd(gen));
    out.push_back(v / v.norm());
  }
  return out;
}

struct Projection {
  ComplexVec psi;          // configuration basis, normalized
  double discarded = 0.0;  // weight removed by the projection
  std::int64_t kept_dim = 0;
};

/// Projects onto the eigenspace of sum_x dx^D Gamma_x^2 with eigenvalue < tol, then renormalizes.
inline Projection project_physical(const ConfigSpace& cs, const ConstraintOperator& g, const ComplexVec& psi,
                                   double tol = 1e-8) {
  if (!(tol > 0)) throw InvalidSpec("project_physical: tol must be positive");
  const RealVec sq = g.squared_diagonal(cs.spec().cell_volume());
  ComplexVec pe = to_electric(cs, psi);
  Projection out;
  const double before = pe.squaredNorm();
  for (std::int64_t i = 0; i < cs.size(); ++i) {
    if (sq[i] < tol) {
      ++out.kept_dim;
    } else {
      pe[i] = 0.0;
    }
  }
  if (out.kept_dim == 0) throw NumericalError("project_physical: physical subspace is empty at this tolerance");
  const double after = pe.squaredNorm();
  out.discarded = before - after;
  if (after <= 0.0) throw NumericalError("project_physical: state has no physical component");
  out.psi = to_configuration(cs, pe / std::sqrt(after));
  return out;
}

/// Per-site constraint norms ||Gamma_x psi||.
inline RealVec constraint_norms(const ConfigSpace& cs, const ConstraintOperator& g, const ComplexVec& psi) {
  const ComplexVec pe = to_electric(cs, psi);
  RealVec out(g.sites());
  for (int x = 0; x < g.sites(); ++x) out[x] = (g.site[x].cast<cplx>().cwiseProduct(pe)).norm();
  return out;
}

/// Per-site expectations <psi|Gamma_x|psi>.
inline RealVec constraint_expectations(const ConfigSpace& cs, const ConstraintOperator& g, const ComplexVec& psi) {
  const ComplexVec pe = to_electric(cs, psi);
  RealVec out(g.sites());
  for (int x = 0; x < g.sites(); ++x) out[x] = g.site[x].dot(pe.cwiseAbs2());
  return out;
}

/// psi' = exp((lambda / i hbar) Q_zeta) psi with Q_zeta = sum_x dx^D zeta_x rho^e_x.
inline ComplexVec charge_flow(const ConfigSpace& cs, const ComplexVec& psi, const RealVec& zeta, double lambda) {
  const LatticeSpec& s = cs.spec();
  if (zeta.size() != s.num_sites()) throw IndexError("smearing has wrong length");
  ComplexVec out(psi.size());
  for (std::int64_t i = 0; i < cs.size(); ++i) {
    double q = 0;
    for (int n = 0; n < s.num_particles(); ++n) q += s.particles[n].charge * zeta[cs.particle_site(i, n)];
    out[i] = psi[i] * std::polar(1.0, -lambda * q / s.hbar);
  }
  return out;
}

/// psi' = exp((lambda / i hbar) Gamma_Phi) psi.
inline ComplexVec constraint_flow(const ConfigSpace& cs, const ConstraintOperator& g, const ComplexVec& psi,
                                  const RealVec& phi, double lambda) {
  const RealVec d = g.smeared_diagonal(phi, cs.spec().cell_volume());
  ComplexVec pe = to_electric(cs, psi);
  for (std::int64_t i = 0; i < cs.size(); ++i) pe[i] *= std::polar(1.0, -lambda * d[i] / cs.spec().hbar);
  return to_configuration(cs, pe);
}

/// Charge-density operator smeared with weights w: sum_x dx^D w_x rho^e_x (configuration diagonal).
inline RealVec smeared_charge_diagonal(const ConfigSpace& cs, const RealVec& w) {
  const LatticeSpec& s = cs.spec();
  RealVec d = RealVec::Zero(cs.size());
  for (std::int64_t i = 0; i < cs.size(); ++i)
    for (int n = 0; n < s.num_particles(); ++n) d[i] += s.particles[n].charge * w[cs.particle_site(i, n)];
  return d;
}

struct GaugeShiftReport {
  KernelOperator delta;          // -(1/c) sum_x dx^D d_t xi_x rho^e_x
  double covariance_residual;    // || U H U^-1 - H || over probes
  double generator_residual;     // || i hbar (d_t U) U^-1 - delta || over probes
  double identity_residual;      // || H^xi - (H + delta) || over probes
};

/**
 * Checks H^xi = U H U^-1 + i hbar (d_t U) U^-1 = H + delta at time t.
 * U is the full permutation-and-phase transform at the commensurate value
 * xi(t); the time derivative uses the phase part, which is defined for any
 * real xi, by a fourth-order central difference with step h.
 */
inline GaugeShiftReport time_dependent_gauge_shift(const ConfigSpace& cs, const KernelOperator& h_phi,
                                                   const std::function<RealVec(double)>& xi_path, double t,
                                                   const std::vector<ComplexVec>& probes, double h = 1e-3) {
  const LatticeSpec& s = cs.spec();
  const RealVec xi = xi_path(t);
  const RealVec dxi = (-xi_path(t + 2 * h) + 8.0 * xi_path(t + h) - 8.0 * xi_path(t - h) + xi_path(t - 2 * h)) /
                      (12.0 * h);
  GaugeShiftReport r;
  r.delta = diagonal_kernel(smeared_charge_diagonal(cs, -dxi / s.c), KernelTag::hamiltonian);

  // i hbar (d_t U) U^-1 on the phase factor: -hbar d_t theta per configuration.
  const RealVec th_p2 = charge_phase(cs, xi_path(t + 2 * h));
  const RealVec th_p1 = charge_phase(cs, xi_path(t + h));
  const RealVec th_m1 = charge_phase(cs, xi_path(t - h));
  const RealVec th_m2 = charge_phase(cs, xi_path(t - 2 * h));
  const RealVec th_0 = charge_phase(cs, xi);
  RealVec gen(cs.size());
  for (std::int64_t i = 0; i < cs.size(); ++i) {
    // differentiate exp(i theta) and multiply by exp(-i theta(t))
    auto e = [&](const RealVec& th) { return std::polar(1.0, th[i] - th_0[i]); };
    const cplx d = (-e(th_p2) + 8.0 * e(th_p1) - 8.0 * e(th_m1) + e(th_m2)) / (12.0 * h);
    gen[i] = (cplx(0, s.hbar) * d).real();
  }
  const KernelOperator gen_op = diagonal_kernel(gen, KernelTag::hamiltonian);

  r.covariance_residual = 0;
  r.generator_residual = 0;
  r.identity_residual = 0;
  const RealVec neg = -xi;
  for (const auto& v : probes) {
    const ComplexVec uhu = gauge_transform_state(cs, h_phi.apply(cs, gauge_transform_state(cs, v, neg)), xi);
    const ComplexVec hv = h_phi.apply(cs, v);
    const ComplexVec gv = gen_op.apply(cs, v);
    const ComplexVec dv = r.delta.apply(cs, v);
    r.covariance_residual = std::max(r.covariance_residual, (uhu - hv).norm() / v.norm());
    r.generator_residual = std::max(r.generator_residual, (gv - dv).norm() / v.norm());
    r.identity_residual = std::max(r.identity_residual, (uhu + gv - hv - dv).norm() / v.norm());
  }
  return r;
}

}  // namespace edqed
