#pragma once

#include <cmath>
#include <numbers>
#include <vector>

#include "edqed/kernel.hpp"
#include "edqed/lattice.hpp"

namespace edqed {

/// Momentum-unit shift s_n = q_n dx M dA / (2 pi hbar c) of a particle's link operator.
inline double link_shift_exact(const LatticeSpec& s, int n) {
  return s.particles[n].charge * s.dx * s.levels * s.dA / (2.0 * std::numbers::pi * s.hbar * s.c);
}

/// Integer link shifts; throws if some charge is incommensurate with the amplitude grid.
inline std::vector<int> link_shifts(const LatticeSpec& s) {
  std::vector<int> out;
  for (int n = 0; n < s.num_particles(); ++n) {
    const double e = link_shift_exact(s, n);
    const double r = std::round(e);
    if (std::abs(e - r) > 1e-9)
      throw InvalidSpec("charge of particle " + std::to_string(n) +
                        " is incommensurate with the amplitude grid (q dx M dA / (2 pi hbar c) = " +
                        std::to_string(e) + ")");
    out.push_back(static_cast<int>(r));
  }
  return out;
}

/// q dx M dA / (2 pi hbar c) for a target shift s: the charge a particle needs to carry s units.
inline double commensurate_charge(const LatticeSpec& s, int shift) {
  return 2.0 * std::numbers::pi * s.hbar * s.c * shift / (s.dx * s.levels * s.dA);
}

/// Electric-basis index after lowering the momentum of field DOF f by `shift` units; -1 if truncated.
inline std::int64_t lower_link(const ConfigSpace& cs, std::int64_t idx, int f, int shift) {
  if (shift == 0) return idx;
  const int M = cs.levels();
  const int j = cs.field_level(idx, f);
  if (is_nyquist(j, M)) return -1;
  const int jn = momentum_index(momentum_branch(j, M) - shift, M);
  if (jn < 0) return -1;
  return idx + (static_cast<std::int64_t>(jn) - j) * cs.field_stride(f);
}

/**
 * Visits every particle hop of the covariant kinetic term in the electric
 * basis. For a source configuration `from` with particle n at z+e, the hop
 * lands at `to` with particle n at z and link (z,a) lowered by s_n.
 * The callback receives (to, from, n, a, link_site).
 */
template <class F>
void for_each_hop(const ConfigSpace& cs, const std::vector<int>& shifts, F&& fn) {
  const LatticeSpec& s = cs.spec();
  for (std::int64_t from = 0; from < cs.size(); ++from) {
    for (int n = 0; n < s.num_particles(); ++n) {
      for (int a = 0; a < s.dim; ++a) {
        const std::int64_t moved = cs.shift_particle(from, n, a, -1);
        const int z = cs.particle_site(moved, n);
        const std::int64_t to = lower_link(cs, moved, cs.field_index(z, a), shifts[n]);
        if (to >= 0) fn(to, from, n, a, z);
      }
    }
  }
}

struct PotentialChoice {
  enum class Kind { none, magnetic, custom };
  Kind kind = Kind::none;
  RealVec custom;  // configuration-basis diagonal, length K

  static PotentialChoice none() { return {}; }
  static PotentialChoice magnetic() { return {Kind::magnetic, {}}; }
  static PotentialChoice diagonal(RealVec v) { return {Kind::custom, std::move(v)}; }
};

/// Plaquette coupling g and unit wavenumber kappa0 of the compact magnetic term.
inline double plaquette_weight(const LatticeSpec& s) {
  const double kappa0 = 2.0 * std::numbers::pi / (s.levels * s.dA);
  return s.cell_volume() / (kappa0 * s.dx * kappa0 * s.dx);
}

/// Raising (+1) / lowering (-1) of a field DOF by one unit within the branch; -1 if truncated.
inline std::int64_t step_link(const ConfigSpace& cs, std::int64_t idx, int f, int dir) {
  return lower_link(cs, idx, f, -dir);
}

/**
 * Hamiltonian kernel in the electric basis:
 *   sum_n (hbar^2/2 m_n dx^2) sum_a (2 - U T - T^dag U^dag)
 * + sum_f (hbar c)^2 / (2 dx^D dA^2) (2 - T_A - T_A^dag)
 * + optional compact magnetic plaquette term or custom diagonal potential.
 * A custom potential forces the configuration basis.
 */
inline KernelOperator build_hamiltonian_kernel(const ConfigSpace& cs, const PotentialChoice& pot = {}) {
  const LatticeSpec& s = cs.spec();
  if (pot.kind == PotentialChoice::Kind::magnetic && s.dim < 2)
    throw InvalidSpec("magnetic potential requires dim >= 2");
  if (pot.kind == PotentialChoice::Kind::custom && pot.custom.size() != cs.size())
    throw IndexError("custom potential has wrong length");
  const std::vector<int> shifts = link_shifts(s);
  const std::int64_t K = cs.size();
  const int M = s.levels;
  std::vector<Triplet> t;
  t.reserve(static_cast<std::size_t>(K) * (1 + 2 * s.num_particles() * s.dim));

  RealVec diag = RealVec::Zero(K);
  for (int n = 0; n < s.num_particles(); ++n) {
    const double w = s.hbar * s.hbar / (2.0 * s.particles[n].mass * s.dx * s.dx);
    diag.array() += 2.0 * s.dim * w;
  }
  for_each_hop(cs, shifts, [&](std::int64_t to, std::int64_t from, int n, int, int) {
    const double w = s.hbar * s.hbar / (2.0 * s.particles[n].mass * s.dx * s.dx);
    t.emplace_back(to, from, -w);
    t.emplace_back(from, to, -w);
  });

  const double wf = (s.hbar * s.c) * (s.hbar * s.c) / (s.cell_volume() * s.dA * s.dA);
  std::vector<double> field_eig(M);
  for (int j = 0; j < M; ++j) field_eig[j] = wf * (1.0 - std::cos(2.0 * std::numbers::pi * j / M));
  for (std::int64_t i = 0; i < K; ++i)
    for (int f = 0; f < cs.field_dofs(); ++f) diag[i] += field_eig[cs.field_level(i, f)];

  if (pot.kind == PotentialChoice::Kind::magnetic) {
    const SiteLattice& lat = cs.lattice();
    const double g = plaquette_weight(s);
    for (int x = 0; x < lat.volume(); ++x) {
      for (int a = 0; a < s.dim; ++a) {
        for (int b = a + 1; b < s.dim; ++b) {
          const int f1 = cs.field_index(x, a);
          const int f2 = cs.field_index(lat.shift(x, a, 1), b);
          const int f3 = cs.field_index(lat.shift(x, b, 1), a);
          const int f4 = cs.field_index(x, b);
          diag.array() += g;
          for (std::int64_t i = 0; i < K; ++i) {
            std::int64_t j = step_link(cs, i, f4, -1);
            if (j >= 0) j = step_link(cs, j, f3, -1);
            if (j >= 0) j = step_link(cs, j, f2, +1);
            if (j >= 0) j = step_link(cs, j, f1, +1);
            if (j < 0) continue;
            t.emplace_back(j, i, -0.5 * g);
            t.emplace_back(i, j, -0.5 * g);
          }
        }
      }
    }
  }
  for (std::int64_t i = 0; i < K; ++i) t.emplace_back(i, i, diag[i]);
  SpMat m(K, K);
  m.setFromTriplets(t.begin(), t.end());
  KernelOperator h = make_kernel(std::move(m), Basis::electric, KernelTag::hamiltonian);
  if (pot.kind == PotentialChoice::Kind::custom) {
    h = convert(cs, h, Basis::configuration);
    h = add(cs, h, diagonal_kernel(pot.custom, KernelTag::hamiltonian));
    h.tag = KernelTag::hamiltonian;
  }
  return h;
}

/// Same kernel in the configuration basis; direct assembly when all link shifts vanish.
inline KernelOperator hamiltonian_configuration_basis(const ConfigSpace& cs, const KernelOperator& h) {
  return convert(cs, h, Basis::configuration);
}

/**
 * Lattice probability flux of particle n across link (x, a), summed over the
 * rest of the configuration: flow from z_n = x+e_a to z_n = x counts negative,
 * so the result is the flux in the +a direction. Indexed [n][x*D + a].
 */
inline std::vector<RealVec> particle_link_flux(const ConfigSpace& cs, const ComplexVec& psi_config) {
  const LatticeSpec& s = cs.spec();
  const std::vector<int> shifts = link_shifts(s);
  const ComplexVec pe = to_electric(cs, psi_config);
  std::vector<RealVec> flux(s.num_particles(), RealVec::Zero(s.field_dofs()));
  for_each_hop(cs, shifts, [&](std::int64_t to, std::int64_t from, int n, int a, int z) {
    const double w = s.hbar * s.hbar / (2.0 * s.particles[n].mass * s.dx * s.dx);
    // flow from `to` (at z) to `from` (at z+e) = -(2/hbar) Im(psi_to^* h psi_from), h = -w
    const double flow = (2.0 / s.hbar) * w * (std::conj(pe[to]) * pe[from]).imag();
    flux[n][cs.field_index(z, a)] += flow;
  });
  return flux;
}

}  // namespace edqed
