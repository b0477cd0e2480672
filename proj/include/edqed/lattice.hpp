#pragma once

#include <Eigen/Dense>

#include <complex>

#include <array>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "edqed/errors.hpp"

namespace edqed {

using RealVec = Eigen::VectorXd;
using ComplexVec = Eigen::VectorXcd;
using cplx = std::complex<double>;

struct Particle {
  double mass = 1.0;
  double charge = 0.0;
};

/**
 * Discretization and physical constants of the model.
 *
 * Configuration count K = Ls^(N*D) * M^(D*Ls^D).
 */
struct LatticeSpec {
  int dim = 1;
  int sites = 2;
  double dx = 1.0;
  std::vector<Particle> particles;
  int levels = 2;
  double dA = 1.0;
  double hbar = 1.0;
  double c = 1.0;
  double eta = 1.0;
  bool periodic = true;
  std::uint64_t max_configs = 4'000'000;

  int num_particles() const { return static_cast<int>(particles.size()); }

  int num_sites() const {
    int v = 1;
    for (int a = 0; a < dim; ++a) v *= sites;
    return v;
  }

  int field_dofs() const { return dim * num_sites(); }

  double cell_volume() const { return std::pow(dx, dim); }

  long double config_count() const {
    long double k = 1.0L;
    for (int i = 0; i < num_particles() * dim; ++i) k *= sites;
    const int nf = field_dofs();
    for (int i = 0; i < nf; ++i) {
      k *= levels;
      if (k > 1e30L) break;
    }
    return k;
  }

  void validate() const {
    if (dim < 1 || dim > 3) throw InvalidSpec("dim must be 1, 2 or 3");
    if (sites < 2) throw InvalidSpec("sites must be >= 2");
    if (levels < 2) throw InvalidSpec("levels must be >= 2");
    if (!(dx > 0) || !(dA > 0) || !(hbar > 0) || !(c > 0) || !(eta > 0))
      throw InvalidSpec("dx, dA, hbar, c and eta must be positive");
    for (const auto& p : particles) {
      if (!(p.mass > 0)) throw InvalidSpec("particle masses must be positive");
      if (!std::isfinite(p.charge)) throw InvalidSpec("particle charge must be finite");
    }
    if (!periodic) throw InvalidSpec("only periodic boundaries are supported");
    if (max_configs == 0) throw InvalidSpec("max_configs must be positive");
  }
};

/// Signed representative of a cyclic amplitude level.
inline int signed_level(int k, int M) { return 2 * k <= M ? k : k - M; }

/**
 * Site lattice helper: row-major site index x = sum_a coord_a * Ls^a.
 */
class SiteLattice {
 public:
  SiteLattice() = default;
  SiteLattice(int dim, int sites, double dx) : dim_(dim), ls_(sites), dx_(dx) {
    v_ = 1;
    for (int a = 0; a < dim_; ++a) {
      stride_[a] = v_;
      v_ *= ls_;
    }
  }
  explicit SiteLattice(const LatticeSpec& s) : SiteLattice(s.dim, s.sites, s.dx) {}

  int dim() const { return dim_; }
  int sites() const { return ls_; }
  int volume() const { return v_; }
  double dx() const { return dx_; }
  double cell() const { return std::pow(dx_, dim_); }

  int coord(int x, int a) const { return (x / stride_[a]) % ls_; }

  int shift(int x, int a, int delta) const {
    const int c = coord(x, a);
    int n = (c + delta) % ls_;
    if (n < 0) n += ls_;
    return x + (n - c) * stride_[a];
  }

  int site(const std::array<int, 3>& coords) const {
    int x = 0;
    for (int a = 0; a < dim_; ++a) {
      int c = coords[a] % ls_;
      if (c < 0) c += ls_;
      x += c * stride_[a];
    }
    return x;
  }

  /// Minimum-image displacement from x to y along each axis.
  std::array<int, 3> displacement(int x, int y) const {
    std::array<int, 3> d{0, 0, 0};
    for (int a = 0; a < dim_; ++a) {
      int t = ((coord(y, a) - coord(x, a)) % ls_ + ls_) % ls_;
      if (2 * t > ls_) t -= ls_;
      d[a] = t;
    }
    return d;
  }

 private:
  int dim_ = 1;
  int ls_ = 2;
  double dx_ = 1.0;
  int v_ = 2;
  std::array<int, 3> stride_{1, 1, 1};
};

/// Ontic configuration: particle coordinates z[n*D+a] and field levels A[x*D+a].
struct OnticConfig {
  std::vector<int> z;
  std::vector<int> A;
  bool operator==(const OnticConfig&) const = default;
};

/**
 * Bijective index codec for the finite configuration space.
 *
 * index = zi * M^(nF) + ai with zi = sum z_{n,a} Ls^(n*D+a) and
 * ai = sum_f k_f M^f, f = x*D + a.
 */
class ConfigSpace {
 public:
  ConfigSpace() = default;

  explicit ConfigSpace(LatticeSpec spec) : spec_(std::move(spec)), lat_(spec_) {
    spec_.validate();
    const long double k = spec_.config_count();
    if (k > static_cast<long double>(spec_.max_configs)) throw CapacityError(k, spec_.max_configs);
    np_ = spec_.num_particles() * spec_.dim;
    nf_ = spec_.field_dofs();
    m_ = spec_.levels;
    field_block_ = 1;
    fstride_.resize(nf_);
    for (int f = 0; f < nf_; ++f) {
      fstride_[f] = field_block_;
      field_block_ *= m_;
    }
    pstride_.resize(np_);
    std::int64_t s = field_block_;
    for (int d = 0; d < np_; ++d) {
      pstride_[d] = s;
      s *= spec_.sites;
    }
    size_ = s;
  }

  const LatticeSpec& spec() const { return spec_; }
  const SiteLattice& lattice() const { return lat_; }
  std::int64_t size() const { return size_; }
  int particle_dofs() const { return np_; }
  int field_dofs() const { return nf_; }
  int levels() const { return m_; }
  std::int64_t field_block() const { return field_block_; }
  std::int64_t particle_stride(int n, int a) const { return pstride_[n * spec_.dim + a]; }
  std::int64_t field_stride(int f) const { return fstride_[f]; }

  int field_index(int x, int a) const { return x * spec_.dim + a; }

  std::int64_t encode(const OnticConfig& cfg) const {
    if (static_cast<int>(cfg.z.size()) != np_ || static_cast<int>(cfg.A.size()) != nf_)
      throw IndexError("configuration has wrong shape");
    std::int64_t idx = 0;
    for (int d = 0; d < np_; ++d) {
      if (cfg.z[d] < 0 || cfg.z[d] >= spec_.sites) throw IndexError("particle coordinate out of range");
      idx += cfg.z[d] * pstride_[d];
    }
    for (int f = 0; f < nf_; ++f) {
      if (cfg.A[f] < 0 || cfg.A[f] >= m_) throw IndexError("field level out of range");
      idx += cfg.A[f] * fstride_[f];
    }
    return idx;
  }

  OnticConfig decode(std::int64_t idx) const {
    check_index(idx);
    OnticConfig cfg;
    cfg.z.resize(np_);
    cfg.A.resize(nf_);
    for (int d = 0; d < np_; ++d) cfg.z[d] = static_cast<int>((idx / pstride_[d]) % spec_.sites);
    for (int f = 0; f < nf_; ++f) cfg.A[f] = static_cast<int>((idx / fstride_[f]) % m_);
    return cfg;
  }

  int particle_coord(std::int64_t idx, int n, int a) const {
    return static_cast<int>((idx / pstride_[n * spec_.dim + a]) % spec_.sites);
  }

  int particle_site(std::int64_t idx, int n) const {
    std::array<int, 3> c{0, 0, 0};
    for (int a = 0; a < spec_.dim; ++a) c[a] = particle_coord(idx, n, a);
    return lat_.site(c);
  }

  int field_level(std::int64_t idx, int f) const {
    return static_cast<int>((idx / fstride_[f]) % m_);
  }

  double field_value(std::int64_t idx, int f) const {
    return signed_level(field_level(idx, f), m_) * spec_.dA;
  }

  std::int64_t shift_particle(std::int64_t idx, int n, int a, int delta) const {
    const int d = n * spec_.dim + a;
    const int c = static_cast<int>((idx / pstride_[d]) % spec_.sites);
    int nc = (c + delta) % spec_.sites;
    if (nc < 0) nc += spec_.sites;
    return idx + (nc - c) * pstride_[d];
  }

  std::int64_t shift_field(std::int64_t idx, int f, int delta) const {
    const int k = static_cast<int>((idx / fstride_[f]) % m_);
    int nk = (k + delta) % m_;
    if (nk < 0) nk += m_;
    return idx + (nk - k) * fstride_[f];
  }

  std::int64_t particle_part(std::int64_t idx) const { return idx / field_block_; }
  std::int64_t field_part(std::int64_t idx) const { return idx % field_block_; }

  void check_index(std::int64_t idx) const {
    if (idx < 0 || idx >= size_) throw IndexError("configuration index out of range");
  }

 private:
  LatticeSpec spec_;
  SiteLattice lat_;
  int np_ = 0;
  int nf_ = 0;
  int m_ = 2;
  std::int64_t field_block_ = 1;
  std::int64_t size_ = 0;
  std::vector<std::int64_t> fstride_;
  std::vector<std::int64_t> pstride_;
};

inline ConfigSpace build_config_space(const LatticeSpec& spec) { return ConfigSpace(spec); }

// ---------------------------------------------------------------------------
// Configuration-space derivatives (central differences, cyclic).

template <class Vec>
Vec particle_derivative(const ConfigSpace& cs, const Vec& f, int n, int a) {
  if (f.size() != cs.size()) throw IndexError("vector length does not match configuration space");
  if (n < 0 || n >= cs.spec().num_particles() || a < 0 || a >= cs.spec().dim)
    throw IndexError("particle derivative index out of range");
  Vec out(f.size());
  const double inv = 1.0 / (2.0 * cs.spec().dx);
  for (std::int64_t i = 0; i < cs.size(); ++i)
    out[i] = (f[cs.shift_particle(i, n, a, 1)] - f[cs.shift_particle(i, n, a, -1)]) * inv;
  return out;
}

template <class Vec>
Vec field_derivative(const ConfigSpace& cs, const Vec& f, int x, int a) {
  if (f.size() != cs.size()) throw IndexError("vector length does not match configuration space");
  if (x < 0 || x >= cs.spec().num_sites() || a < 0 || a >= cs.spec().dim)
    throw IndexError("field derivative index out of range");
  const int fi = cs.field_index(x, a);
  Vec out(f.size());
  const double inv = 1.0 / (2.0 * cs.spec().dA * cs.spec().cell_volume());
  for (std::int64_t i = 0; i < cs.size(); ++i)
    out[i] = (f[cs.shift_field(i, fi, 1)] - f[cs.shift_field(i, fi, -1)]) * inv;
  return out;
}

// ---------------------------------------------------------------------------
// Spatial operators on per-site arrays. Vector fields are V x D matrices.

inline Eigen::MatrixXd spatial_grad(const SiteLattice& lat, const RealVec& f) {
  if (f.size() != lat.volume()) throw IndexError("scalar field has wrong length");
  Eigen::MatrixXd g(lat.volume(), lat.dim());
  for (int x = 0; x < lat.volume(); ++x)
    for (int a = 0; a < lat.dim(); ++a) g(x, a) = (f[lat.shift(x, a, 1)] - f[x]) / lat.dx();
  return g;
}

inline RealVec spatial_div(const SiteLattice& lat, const Eigen::MatrixXd& g) {
  if (g.rows() != lat.volume() || g.cols() != lat.dim()) throw IndexError("vector field has wrong shape");
  RealVec d = RealVec::Zero(lat.volume());
  for (int x = 0; x < lat.volume(); ++x)
    for (int a = 0; a < lat.dim(); ++a) d[x] += (g(x, a) - g(lat.shift(x, a, -1), a)) / lat.dx();
  return d;
}

/// Forward-difference curl: V x 1 in D=2, V x 3 in D=3.
inline Eigen::MatrixXd spatial_curl(const SiteLattice& lat, const Eigen::MatrixXd& g) {
  if (lat.dim() == 1) throw InvalidSpec("curl is undefined in one dimension");
  if (g.rows() != lat.volume() || g.cols() != lat.dim()) throw IndexError("vector field has wrong shape");
  auto d = [&](int x, int a, int b) {  // forward derivative along a of component b
    return (g(lat.shift(x, a, 1), b) - g(x, b)) / lat.dx();
  };
  if (lat.dim() == 2) {
    Eigen::MatrixXd B(lat.volume(), 1);
    for (int x = 0; x < lat.volume(); ++x) B(x, 0) = d(x, 0, 1) - d(x, 1, 0);
    return B;
  }
  Eigen::MatrixXd B(lat.volume(), 3);
  for (int x = 0; x < lat.volume(); ++x) {
    B(x, 0) = d(x, 1, 2) - d(x, 2, 1);
    B(x, 1) = d(x, 2, 0) - d(x, 0, 2);
    B(x, 2) = d(x, 0, 1) - d(x, 1, 0);
  }
  return B;
}

/// Lattice inner product sum_x dx^D f.g for scalar or vector fields.
inline double lattice_dot(const SiteLattice& lat, const Eigen::MatrixXd& f, const Eigen::MatrixXd& g) {
  return lat.cell() * f.cwiseProduct(g).sum();
}

}  // namespace edqed
