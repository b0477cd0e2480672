// Shared fixtures, generators and independent oracles for the test suite.
#pragma once

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include "edqed/lattice.hpp"

namespace edqed::test {

inline LatticeSpec make_spec(int dim, int sites, int levels, std::vector<Particle> parts = {}, double dx = 1.0,
                             double dA = 1.0) {
  LatticeSpec s;
  s.dim = dim;
  s.sites = sites;
  s.levels = levels;
  s.dx = dx;
  s.dA = dA;
  s.hbar = 1.0;
  s.c = 1.0;
  s.eta = 1.0;
  s.particles = std::move(parts);
  return s;
}

/// q that makes the link shift an integer s: q dx M dA / (2 pi hbar c) = s.
inline double charge_for_shift(const LatticeSpec& s, int shift) {
  return 2.0 * std::numbers::pi * s.hbar * s.c * shift / (s.dx * s.levels * s.dA);
}

/// Small deterministic generator used by the property tests.
class Gen {
 public:
  explicit Gen(std::uint64_t seed) : rng_(seed) {}

  double uniform(double lo = -1.0, double hi = 1.0) { return std::uniform_real_distribution<double>(lo, hi)(rng_); }
  double normal() { return std::normal_distribution<double>()(rng_); }
  int integer(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng_); }

  RealVec real_vec(std::int64_t n, double lo = -1.0, double hi = 1.0) {
    RealVec v(n);
    for (auto& x : v) x = uniform(lo, hi);
    return v;
  }

  RealVec positive_vec(std::int64_t n, double lo = 0.2, double hi = 1.0) { return real_vec(n, lo, hi); }

  ComplexVec complex_vec(std::int64_t n) {
    ComplexVec v(n);
    for (auto& x : v) x = cplx(normal(), normal());
    return v;
  }

  ComplexVec unit_vec(std::int64_t n) {
    ComplexVec v = complex_vec(n);
    return v / v.norm();
  }

  RealVec probability(std::int64_t n) {
    RealVec v = positive_vec(n);
    return v / v.sum();
  }

  Eigen::MatrixXcd hermitian(int n) {
    Eigen::MatrixXcd a(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) a(i, j) = cplx(normal(), normal());
    return 0.5 * (a + a.adjoint());
  }

  std::mt19937_64& engine() { return rng_; }

 private:
  std::mt19937_64 rng_;
};

/// Dense propagator exp(-i H t / hbar) from the eigendecomposition of a Hermitian matrix.
inline Eigen::MatrixXcd dense_propagator(const Eigen::MatrixXcd& h, double t, double hbar) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(h);
  Eigen::VectorXcd ph(h.rows());
  for (int k = 0; k < h.rows(); ++k) ph[k] = std::polar(1.0, -es.eigenvalues()[k] * t / hbar);
  return es.eigenvectors() * ph.asDiagonal() * es.eigenvectors().adjoint();
}

/// Unitary per-DOF DFT matrix (configuration -> electric) built by explicit Kronecker products.
inline Eigen::MatrixXcd dft_matrix(const ConfigSpace& cs) {
  const int M = cs.levels();
  Eigen::MatrixXcd f1(M, M);
  for (int j = 0; j < M; ++j)
    for (int k = 0; k < M; ++k) f1(j, k) = std::polar(1.0 / std::sqrt(double(M)), -2.0 * std::numbers::pi * j * k / M);
  // Field DOF f has stride M^f; the particle part is the slowest index.
  Eigen::MatrixXcd field = Eigen::MatrixXcd::Identity(1, 1);
  for (int f = 0; f < cs.field_dofs(); ++f) {
    Eigen::MatrixXcd next(field.rows() * M, field.cols() * M);
    for (int a = 0; a < M; ++a)
      for (int b = 0; b < M; ++b) next.block(a * field.rows(), b * field.cols(), field.rows(), field.cols()) = f1(a, b) * field;
    field = next;
  }
  const std::int64_t P = cs.size() / cs.field_block();
  Eigen::MatrixXcd out = Eigen::MatrixXcd::Zero(cs.size(), cs.size());
  for (std::int64_t p = 0; p < P; ++p) out.block(p * field.rows(), p * field.cols(), field.rows(), field.cols()) = field;
  return out;
}

}  // namespace edqed::test
