#pragma once

#include <fftw3.h>

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <vector>

#include "edqed/evolution.hpp"
#include "edqed/gauge.hpp"
#include "edqed/hamiltonian.hpp"

namespace edqed {

/// Backward-difference curl, the adjoint of spatial_curl: V x D from V x 1 (D=2) or V x 3 (D=3).
inline Eigen::MatrixXd spatial_curl_adjoint(const SiteLattice& lat, const Eigen::MatrixXd& b) {
  if (lat.dim() == 1) throw InvalidSpec("curl is undefined in one dimension");
  auto d = [&](int x, int a, int c) { return (b(x, c) - b(lat.shift(x, a, -1), c)) / lat.dx(); };
  Eigen::MatrixXd out(lat.volume(), lat.dim());
  if (lat.dim() == 2) {
    if (b.cols() != 1) throw IndexError("D=2 curl expects a scalar field");
    for (int x = 0; x < lat.volume(); ++x) {
      out(x, 0) = d(x, 1, 0);
      out(x, 1) = -d(x, 0, 0);
    }
    return out;
  }
  if (b.cols() != 3) throw IndexError("D=3 curl expects a vector field");
  for (int x = 0; x < lat.volume(); ++x) {
    out(x, 0) = d(x, 1, 2) - d(x, 2, 1);
    out(x, 1) = d(x, 2, 0) - d(x, 0, 2);
    out(x, 2) = d(x, 0, 1) - d(x, 1, 0);
  }
  return out;
}

/// Reshapes a per-link vector (index x*D + a) into V x D.
inline Eigen::MatrixXd as_vector_field(const SiteLattice& lat, const RealVec& v) {
  Eigen::MatrixXd m(lat.volume(), lat.dim());
  for (int x = 0; x < lat.volume(); ++x)
    for (int a = 0; a < lat.dim(); ++a) m(x, a) = v[x * lat.dim() + a];
  return m;
}

// ---------------------------------------------------------------------------
// Charges and currents.

struct ChargeCurrent {
  RealVec rho;        // per site
  Eigen::MatrixXd J;  // V x D, on links (x, x+e_a)
};

inline RealVec config_probabilities(const ComplexVec& psi) { return psi.cwiseAbs2(); }

inline RealVec charge_density(const ConfigSpace& cs, const ComplexVec& psi) {
  const LatticeSpec& s = cs.spec();
  const RealVec p = config_probabilities(psi);
  RealVec rho = RealVec::Zero(s.num_sites());
  for (std::int64_t i = 0; i < cs.size(); ++i)
    for (int n = 0; n < s.num_particles(); ++n) rho[cs.particle_site(i, n)] += p[i] * s.particles[n].charge;
  return rho / s.cell_volume();
}

/**
 * Expected charge density and lattice link current. The current is the
 * charge-weighted probability flux of the hopping term across each link, per
 * unit cross-section dx^(D-1), so d rho/dt + div J = 0 holds exactly under H.
 */
inline ChargeCurrent charge_current(const ConfigSpace& cs, const ComplexVec& psi) {
  const LatticeSpec& s = cs.spec();
  ChargeCurrent out{charge_density(cs, psi), Eigen::MatrixXd::Zero(s.num_sites(), s.dim)};
  bool charged = false;
  for (const auto& p : s.particles) charged = charged || p.charge != 0.0;
  if (!charged) return out;
  const auto flux = particle_link_flux(cs, psi);
  const double area = std::pow(s.dx, s.dim - 1);
  for (int n = 0; n < s.num_particles(); ++n)
    out.J += s.particles[n].charge / area * as_vector_field(cs.lattice(), flux[n]);
  return out;
}

/// [rho(t+dt) - rho(t)]/dt + div J(t) after one implicit-midpoint step.
inline RealVec charge_conservation_residual(const ConfigSpace& cs, const ComplexVec& psi, const KernelOperator& h,
                                           double dt) {
  const ChargeCurrent now = charge_current(cs, psi);
  const ComplexVec next = evolve_schrodinger(cs, psi, h, dt, 1, cs.spec().hbar);
  return (charge_density(cs, next) - now.rho) / dt + spatial_div(cs.lattice(), now.J);
}

// ---------------------------------------------------------------------------
// Lattice Poisson solve (periodic, zero-mean subspace) via FFTW.

/**
 * Solves -div grad u = f on the periodic lattice. The mean of f is removed
 * first and reported; the constant mode of u is pinned to zero.
 */
class PoissonSolver {
 public:
  explicit PoissonSolver(const SiteLattice& lat) : lat_(lat), n_(lat.volume()) {
    in_ = fftw_alloc_complex(n_);
    out_ = fftw_alloc_complex(n_);
    std::vector<int> dims(lat.dim(), lat.sites());
    fwd_ = fftw_plan_dft(lat.dim(), dims.data(), in_, out_, FFTW_FORWARD, FFTW_ESTIMATE);
    bwd_ = fftw_plan_dft(lat.dim(), dims.data(), out_, in_, FFTW_BACKWARD, FFTW_ESTIMATE);
    eig_.resize(n_);
    for (int x = 0; x < n_; ++x) {
      double l = 0;
      for (int a = 0; a < lat.dim(); ++a)
        l += (2.0 - 2.0 * std::cos(2.0 * std::numbers::pi * lat.coord(x, a) / lat.sites())) / (lat.dx() * lat.dx());
      eig_[x] = l;
    }
  }
  PoissonSolver(const PoissonSolver&) = delete;
  PoissonSolver& operator=(const PoissonSolver&) = delete;
  ~PoissonSolver() {
    fftw_destroy_plan(fwd_);
    fftw_destroy_plan(bwd_);
    fftw_free(in_);
    fftw_free(out_);
  }

  struct Result {
    RealVec u;
    double removed_mean = 0;
  };

  Result solve(const RealVec& f) {
    if (f.size() != n_) throw IndexError("Poisson source has wrong length");
    Result r;
    r.removed_mean = f.mean();
    for (int x = 0; x < n_; ++x) {
      in_[x][0] = f[x] - r.removed_mean;
      in_[x][1] = 0;
    }
    fftw_execute(fwd_);
    // FFTW's row-major layout reverses the axis order of our site index; the
    // symbol is symmetric under axis permutation, so only mode 0 needs care.
    for (int k = 0; k < n_; ++k) {
      const double l = eig_[k];
      if (k == 0) {
        out_[k][0] = out_[k][1] = 0;
        continue;
      }
      out_[k][0] /= l * n_;
      out_[k][1] /= l * n_;
    }
    fftw_execute(bwd_);
    r.u.resize(n_);
    for (int x = 0; x < n_; ++x) r.u[x] = in_[x][0];
    return r;
  }

 private:
  SiteLattice lat_;
  int n_;
  fftw_complex* in_ = nullptr;
  fftw_complex* out_ = nullptr;
  fftw_plan fwd_{};
  fftw_plan bwd_{};
  std::vector<double> eig_;
};

struct CoulombSolution {
  RealVec phi;
  double removed_mean = 0;  // neutralizing background subtracted from rho
};

/// -Lap Phi^C = rho^e on the zero-mean subspace.
inline CoulombSolution coulomb_solve(const SiteLattice& lat, const RealVec& rho) {
  PoissonSolver ps(lat);
  const auto r = ps.solve(rho);
  return {r.u, r.removed_mean};
}

/// Periodic lattice Green's function: potential of a unit point charge at site 0 (zero mean).
inline RealVec lattice_green(const SiteLattice& lat) {
  RealVec d = RealVec::Zero(lat.volume());
  d[0] = 1.0 / lat.cell();
  return coulomb_solve(lat, d).phi;
}

/// Site index of the displacement y - x.
inline int site_difference(const SiteLattice& lat, int y, int x) {
  std::array<int, 3> c{0, 0, 0};
  for (int a = 0; a < lat.dim(); ++a) c[a] = ((lat.coord(y, a) - lat.coord(x, a)) % lat.sites() + lat.sites()) % lat.sites();
  return lat.site(c);
}

struct PointCharge {
  int site;
  double q;
};

/// Coulomb energy 1/2 sum dx^D Phi rho with the self terms 1/2 q_i^2 G(0) removed.
inline double coulomb_energy(const SiteLattice& lat, const std::vector<PointCharge>& charges) {
  RealVec rho = RealVec::Zero(lat.volume());
  for (const auto& c : charges) rho[c.site] += c.q / lat.cell();
  const RealVec phi = coulomb_solve(lat, rho).phi;
  const RealVec g = lattice_green(lat);
  double e = 0.5 * lat.cell() * phi.dot(rho);
  for (const auto& c : charges) e -= 0.5 * c.q * c.q * g[0];
  return e;
}

/// Pairwise lattice Coulomb energy over particle-position configurations (index = particle part).
inline RealVec coulomb_pair_potential(const LatticeSpec& s) {
  const SiteLattice lat(s);
  const RealVec g = lattice_green(lat);
  const int N = s.num_particles();
  std::int64_t P = 1;
  for (int d = 0; d < N * s.dim; ++d) P *= s.sites;
  RealVec out = RealVec::Zero(P);
  std::vector<int> site(N);
  for (std::int64_t p = 0; p < P; ++p) {
    std::int64_t r = p;
    for (int n = 0; n < N; ++n) {
      std::array<int, 3> c{0, 0, 0};
      for (int a = 0; a < s.dim; ++a) {
        c[a] = static_cast<int>(r % s.sites);
        r /= s.sites;
      }
      site[n] = lat.site(c);
    }
    for (int i = 0; i < N; ++i)
      for (int j = i + 1; j < N; ++j)
        out[p] += s.particles[i].charge * s.particles[j].charge * g[site_difference(lat, site[i], site[j])];
  }
  return out;
}

// ---------------------------------------------------------------------------
// Expected fields.
//
// Link amplitudes are cyclic, so on a gauge-invariant state every link level
// is uniformly spread and <A> vanishes identically. The gauge-invariant
// content of A is carried by the wrapped plaquettes (B) and the wrapped
// holonomies along the periodic directions; the expected potential is
// reported in Coulomb gauge, rebuilt from those per configuration.

/// Per-configuration diagonals of the field observables.
struct FieldDiagonals {
  std::vector<RealVec> a_config;   // [f] raw amplitude value A_f
  std::vector<RealVec> a_coulomb;  // [f] Coulomb-gauge potential from plaquettes and holonomies
  std::vector<RealVec> b;          // [x*nb + c] wrapped plaquette / dx
  std::vector<RealVec> e;          // [f] electric eigenvalue (electric-basis diagonal)
  int nb = 0;                      // B components: 0 (D=1), 1 (D=2), 3 (D=3)
};

/// Wrapped forward curl of the level configuration, in field units (dA/dx): V x nb.
inline Eigen::MatrixXd plaquette_field(const ConfigSpace& cs, std::int64_t idx) {
  const LatticeSpec& s = cs.spec();
  const SiteLattice& lat = cs.lattice();
  const int M = s.levels;
  auto lv = [&](int x, int a) { return cs.field_level(idx, cs.field_index(x, a)); };
  // Oriented plaquette in the (a, b) plane at x: A_b(x+a) - A_b(x) - A_a(x+b) + A_a(x).
  auto plaq = [&](int x, int a, int b) {
    const int raw = lv(lat.shift(x, a, 1), b) - lv(x, b) - lv(lat.shift(x, b, 1), a) + lv(x, a);
    return signed_level(((raw % M) + M) % M, M) * s.dA / s.dx;
  };
  if (s.dim == 2) {
    Eigen::MatrixXd B(lat.volume(), 1);
    for (int x = 0; x < lat.volume(); ++x) B(x, 0) = plaq(x, 0, 1);
    return B;
  }
  Eigen::MatrixXd B(lat.volume(), 3);
  for (int x = 0; x < lat.volume(); ++x) {
    B(x, 0) = plaq(x, 1, 2);
    B(x, 1) = plaq(x, 2, 0);
    B(x, 2) = plaq(x, 0, 1);
  }
  return B;
}

/// Mean wrapped holonomy per direction: average over lines of wrap(sum of levels) dA / Ls.
inline RealVec holonomy_field(const ConfigSpace& cs, std::int64_t idx) {
  const LatticeSpec& s = cs.spec();
  const SiteLattice& lat = cs.lattice();
  const int M = s.levels;
  RealVec h = RealVec::Zero(s.dim);
  for (int a = 0; a < s.dim; ++a) {
    int lines = 0;
    for (int x = 0; x < lat.volume(); ++x) {
      if (lat.coord(x, a) != 0) continue;
      int sum = 0, y = x;
      for (int k = 0; k < s.sites; ++k, y = lat.shift(y, a, 1)) sum += cs.field_level(idx, cs.field_index(y, a));
      h[a] += signed_level(sum % M, M);
      ++lines;
    }
    h[a] *= s.dA / (s.sites * lines);
  }
  return h;
}

/// Linear map from the plaquette field (flattened x*nb + c) to the transverse Coulomb-gauge potential (x*D + a).
inline Eigen::MatrixXd transverse_potential_map(const SiteLattice& lat) {
  const int V = lat.volume(), D = lat.dim(), nb = D == 2 ? 1 : 3;
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(V * D, V * nb);
  PoissonSolver ps(lat);
  for (int col = 0; col < V * nb; ++col) {
    Eigen::MatrixXd w = Eigen::MatrixXd::Zero(V, nb);
    RealVec unit = RealVec::Zero(V);
    unit[col / nb] = 1.0;
    w.col(col % nb) = ps.solve(unit).u;
    // curl curl_adj w = -Lap w for D=2; in D=3 the divergence part is projected out.
    Eigen::MatrixXd a = spatial_curl_adjoint(lat, w);
    if (D == 3) a = a - spatial_grad(lat, ps.solve(-spatial_div(lat, a)).u);
    for (int x = 0; x < V; ++x)
      for (int d = 0; d < D; ++d) out(x * D + d, col) = a(x, d);
  }
  return out;
}

inline FieldDiagonals field_diagonals(const ConfigSpace& cs) {
  const LatticeSpec& s = cs.spec();
  const SiteLattice& lat = cs.lattice();
  const int nf = cs.field_dofs(), V = lat.volume();
  FieldDiagonals fd;
  fd.nb = s.dim == 1 ? 0 : s.dim == 2 ? 1 : 3;
  fd.a_config.assign(nf, RealVec(cs.size()));
  fd.a_coulomb.assign(nf, RealVec(cs.size()));
  fd.e.assign(nf, RealVec(cs.size()));
  fd.b.assign(V * fd.nb, RealVec(cs.size()));
  std::vector<double> ev(s.levels);
  for (int j = 0; j < s.levels; ++j) ev[j] = electric_eigenvalue(s, j);
  const Eigen::MatrixXd tmap = s.dim >= 2 ? transverse_potential_map(lat) : Eigen::MatrixXd();
  RealVec bflat(V * fd.nb);
  for (std::int64_t i = 0; i < cs.size(); ++i) {
    for (int f = 0; f < nf; ++f) {
      fd.a_config[f][i] = cs.field_value(i, f);
      fd.e[f][i] = ev[cs.field_level(i, f)];
    }
    const RealVec h = holonomy_field(cs, i);
    RealVec ac = RealVec::Zero(nf);
    if (s.dim >= 2) {
      const Eigen::MatrixXd B = plaquette_field(cs, i);
      for (int x = 0; x < V; ++x)
        for (int c = 0; c < fd.nb; ++c) bflat[x * fd.nb + c] = B(x, c);
      ac = tmap * bflat;
      for (int k = 0; k < V * fd.nb; ++k) fd.b[k][i] = bflat[k];
    }
    for (int f = 0; f < nf; ++f) fd.a_coulomb[f][i] = ac[f] + h[f % s.dim];
  }
  return fd;
}

struct FieldExpectation {
  Eigen::MatrixXd A;         // V x D, Coulomb gauge
  Eigen::MatrixXd A_config;  // V x D, raw <A>
  Eigen::MatrixXd E;         // V x D
  Eigen::MatrixXd B;         // V x 1 (D=2) or V x 3 (D=3); empty for D=1
  RealVec rho;
  Eigen::MatrixXd J;
};

inline FieldExpectation expected_fields(const ConfigSpace& cs, const ComplexVec& psi, const FieldDiagonals& fd) {
  const SiteLattice& lat = cs.lattice();
  const int nf = cs.field_dofs();
  const RealVec p = psi.cwiseAbs2();
  const RealVec pe = to_electric(cs, psi).cwiseAbs2();
  RealVec a(nf), ac(nf), e(nf);
  for (int f = 0; f < nf; ++f) {
    a[f] = p.dot(fd.a_config[f]);
    ac[f] = p.dot(fd.a_coulomb[f]);
    e[f] = pe.dot(fd.e[f]);
  }
  FieldExpectation fe;
  fe.A = as_vector_field(lat, ac);
  fe.A_config = as_vector_field(lat, a);
  fe.E = as_vector_field(lat, e);
  if (fd.nb > 0) {
    fe.B.resize(lat.volume(), fd.nb);
    for (int x = 0; x < lat.volume(); ++x)
      for (int c = 0; c < fd.nb; ++c) fe.B(x, c) = p.dot(fd.b[x * fd.nb + c]);
  }
  const ChargeCurrent cc = charge_current(cs, psi);
  fe.rho = cc.rho;
  fe.J = cc.J;
  return fe;
}

inline FieldExpectation expected_fields(const ConfigSpace& cs, const ComplexVec& psi) {
  return expected_fields(cs, psi, field_diagonals(cs));
}

// ---------------------------------------------------------------------------
// Helmholtz decomposition.

struct Helmholtz {
  Eigen::MatrixXd longitudinal, transverse;
  bool one_dimensional = false;  // transverse part is then the constant mode only
};

inline Helmholtz helmholtz_decompose(const SiteLattice& lat, const Eigen::MatrixXd& field) {
  if (field.rows() != lat.volume() || field.cols() != lat.dim()) throw IndexError("vector field has wrong shape");
  PoissonSolver ps(lat);
  // div grad u = div F  <=>  -Lap u = -div F
  const RealVec u = ps.solve(-spatial_div(lat, field)).u;
  Helmholtz h;
  h.longitudinal = spatial_grad(lat, u);
  h.transverse = field - h.longitudinal;
  h.one_dimensional = lat.dim() == 1;
  return h;
}

// ---------------------------------------------------------------------------
// Maxwell residuals along a trajectory.

struct MaxwellResiduals {
  // Norms per interior time step k = 1..n-2 (central time differences).
  RealVec ampere_potential;  // (1) d_t A + c (E + grad Phi)
  RealVec faraday;           // (2) curl E + (1/c) d_t B
  RealVec ampere_maxwell;    // (3) d_t E - c curl B + J
  RealVec gauss;             // (4) div E - rho, every step
  // Same residuals with the time derivative replaced by the exact rate
  // <(i/hbar)[H_Phi, O]>: what remains is the lattice operator defect.
  RealVec defect_potential, defect_faraday, defect_ampere;
  // Norm of (residual - defect): the time-discretization part alone.
  RealVec time_potential, time_faraday, time_ampere;
  // Predicted size: defect norm + dt^2/4 * |third time difference| of the
  // differentiated observable (central-difference error plus the phase error
  // of the implicit midpoint step).
  RealVec estimate_potential, estimate_faraday, estimate_ampere;
};

namespace detail {

/// Exact rates d<O_f>/dt = (i/hbar)<psi|[H, O_f]|psi> = -(2/hbar) Im <H psi|O_f psi> for diagonal O_f.
/// psi and hpsi are given in the basis where the O_f are diagonal.
inline RealVec link_rates(const ComplexVec& psi, const ComplexVec& hpsi, const std::vector<RealVec>& diag_values,
                          double hbar) {
  RealVec out(diag_values.size());
  for (std::size_t f = 0; f < diag_values.size(); ++f)
    out[f] = -2.0 / hbar * hpsi.dot(diag_values[f].cast<cplx>().cwiseProduct(psi)).imag();
  return out;
}

}  // namespace detail

/**
 * Residuals of the four Maxwell equations for a trajectory generated by H_Phi
 * (Phi per site and time). `h` is the Phi-free kernel; the rates use
 * modified_hamiltonian(h, Phi_k, g).
 */
inline MaxwellResiduals maxwell_residuals(const ConfigSpace& cs, const std::vector<ComplexVec>& path,
                                          const std::vector<RealVec>& phi_path, const KernelOperator& h,
                                          const ConstraintOperator& g, double dt) {
  const LatticeSpec& s = cs.spec();
  const SiteLattice& lat = cs.lattice();
  if (s.dim < 2) throw InvalidSpec("maxwell_residuals requires dim >= 2");
  if (path.size() != phi_path.size() || path.size() < 3) throw IndexError("trajectory/Phi shape mismatch");
  const int n = static_cast<int>(path.size());
  const FieldDiagonals fd = field_diagonals(cs);
  std::vector<FieldExpectation> fe;
  for (const auto& p : path) fe.push_back(expected_fields(cs, p, fd));

  MaxwellResiduals r;
  r.ampere_potential = r.faraday = r.ampere_maxwell = RealVec::Zero(n - 2);
  r.defect_potential = r.defect_faraday = r.defect_ampere = RealVec::Zero(n - 2);
  r.time_potential = r.time_faraday = r.time_ampere = RealVec::Zero(n - 2);
  r.estimate_potential = r.estimate_faraday = r.estimate_ampere = RealVec::Zero(n - 2);
  // Third time difference, shifted inward at the ends of the path.
  auto third = [&](auto get, int k) {
    const int c = std::clamp(k, 2, n - 3);
    if (n < 5) return Eigen::MatrixXd(Eigen::MatrixXd::Zero(get(0).rows(), get(0).cols()));
    return Eigen::MatrixXd((get(c + 2) - 2.0 * get(c + 1) + 2.0 * get(c - 1) - get(c - 2)) / (2.0 * dt * dt * dt));
  };
  r.gauss = RealVec::Zero(n);
  for (int k = 0; k < n; ++k) r.gauss[k] = (spatial_div(lat, fe[k].E) - fe[k].rho).norm();
  for (int k = 1; k + 1 < n; ++k) {
    const Eigen::MatrixXd dA = (fe[k + 1].A - fe[k - 1].A) / (2.0 * dt);
    const Eigen::MatrixXd dE = (fe[k + 1].E - fe[k - 1].E) / (2.0 * dt);
    const Eigen::MatrixXd dB = (fe[k + 1].B - fe[k - 1].B) / (2.0 * dt);
    const Eigen::MatrixXd gp = spatial_grad(lat, phi_path[k]);
    const Eigen::MatrixXd r1 = dA + s.c * (fe[k].E + gp);
    const Eigen::MatrixXd r2 = spatial_curl(lat, fe[k].E) + dB / s.c;
    const Eigen::MatrixXd r3 = dE - s.c * spatial_curl_adjoint(lat, fe[k].B) + fe[k].J;
    r.ampere_potential[k - 1] = r1.norm();
    r.faraday[k - 1] = r2.norm();
    r.ampere_maxwell[k - 1] = r3.norm();

    const KernelOperator hp = modified_hamiltonian(cs, h, phi_path[k], g);
    const ComplexVec hpc = hp.apply(cs, path[k]);
    const Eigen::MatrixXd rateA = as_vector_field(lat, detail::link_rates(path[k], hpc, fd.a_coulomb, s.hbar));
    const Eigen::MatrixXd rateE =
        as_vector_field(lat, detail::link_rates(to_electric(cs, path[k]), to_electric(cs, hpc), fd.e, s.hbar));
    const RealVec rb = detail::link_rates(path[k], hpc, fd.b, s.hbar);
    const Eigen::MatrixXd rateB = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
        rb.data(), lat.volume(), fd.nb);
    const Eigen::MatrixXd d1 = rateA + s.c * (fe[k].E + gp);
    const Eigen::MatrixXd d2 = spatial_curl(lat, fe[k].E) + rateB / s.c;
    const Eigen::MatrixXd d3 = rateE - s.c * spatial_curl_adjoint(lat, fe[k].B) + fe[k].J;
    r.defect_potential[k - 1] = d1.norm();
    r.defect_faraday[k - 1] = d2.norm();
    r.defect_ampere[k - 1] = d3.norm();
    r.time_potential[k - 1] = (r1 - d1).norm();
    r.time_faraday[k - 1] = (r2 - d2).norm();
    r.time_ampere[k - 1] = (r3 - d3).norm();
    const double w = dt * dt / 4.0;
    r.estimate_potential[k - 1] = d1.norm() + w * third([&](int j) { return fe[j].A; }, k).norm();
    r.estimate_faraday[k - 1] = d2.norm() + w / s.c * third([&](int j) { return fe[j].B; }, k).norm();
    r.estimate_ampere[k - 1] = d3.norm() + w * third([&](int j) { return fe[j].E; }, k).norm();
  }
  return r;
}

// ---------------------------------------------------------------------------
// Standard-form split.

struct StandardForm {
  KernelOperator h_rad;  // field kinetic + magnetic - longitudinal electric energy (electric basis)
  KernelOperator h_mat;  // particle kinetic + pairwise lattice Coulomb (electric basis)
  double self_energy = 0;  // sum_n q_n^2 G(0)/2, dropped from h_mat
  bool one_dimensional = false;
};

/**
 * Splits H (built without custom potential) into radiation and matter parts.
 * On physical states the longitudinal electric energy equals the Coulomb
 * energy of the charges, so <H> = <H_rad> + <H_mat> + self_energy.
 */
inline StandardForm standard_form_split(const ConfigSpace& cs, const KernelOperator& h) {
  const LatticeSpec& s = cs.spec();
  const SiteLattice& lat = cs.lattice();
  if (h.basis != Basis::electric) throw InvalidSpec("standard_form_split expects the electric-basis kernel");
  StandardForm out;
  out.one_dimensional = s.dim == 1;

  // Particle kinetic part: the hopping entries plus their diagonal.
  const std::vector<int> shifts = link_shifts(s);
  std::vector<Triplet> t;
  RealVec kin_diag = RealVec::Zero(cs.size());
  for (int n = 0; n < s.num_particles(); ++n)
    kin_diag.array() += 2.0 * s.dim * s.hbar * s.hbar / (2.0 * s.particles[n].mass * s.dx * s.dx);
  for_each_hop(cs, shifts, [&](std::int64_t to, std::int64_t from, int n, int, int) {
    const double w = s.hbar * s.hbar / (2.0 * s.particles[n].mass * s.dx * s.dx);
    t.emplace_back(to, from, -w);
    t.emplace_back(from, to, -w);
  });

  // Longitudinal electric energy per electric-basis configuration.
  std::vector<double> ev(s.levels);
  for (int j = 0; j < s.levels; ++j) ev[j] = electric_eigenvalue(s, j);
  PoissonSolver ps(lat);
  RealVec elong(cs.size());
  RealVec coul(cs.size());
  const RealVec pair = coulomb_pair_potential(s);
  const RealVec g = lattice_green(lat);
  out.self_energy = 0;
  for (const auto& p : s.particles) out.self_energy += 0.5 * p.charge * p.charge * g[0];
  RealVec e(cs.field_dofs());
  for (std::int64_t i = 0; i < cs.size(); ++i) {
    for (int f = 0; f < cs.field_dofs(); ++f) e[f] = ev[cs.field_level(i, f)];
    const Eigen::MatrixXd E = as_vector_field(lat, e);
    const RealVec u = ps.solve(-spatial_div(lat, E)).u;
    elong[i] = 0.5 * lattice_dot(lat, spatial_grad(lat, u), spatial_grad(lat, u));
    coul[i] = pair.size() ? pair[cs.particle_part(i)] : 0.0;
  }
  for (std::int64_t i = 0; i < cs.size(); ++i) t.emplace_back(i, i, kin_diag[i] + coul[i]);
  SpMat hm(cs.size(), cs.size());
  hm.setFromTriplets(t.begin(), t.end());
  out.h_mat = make_kernel(std::move(hm), Basis::electric, KernelTag::hamiltonian);

  SpMat rest = h.mat - out.h_mat.mat;
  for (std::int64_t i = 0; i < cs.size(); ++i) rest.coeffRef(i, i) += coul[i] - elong[i];
  rest.prune(cplx(0.0));
  out.h_rad = make_kernel(std::move(rest), Basis::electric, KernelTag::hamiltonian);
  return out;
}

}  // namespace edqed
