#pragma once

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <ostream>
#include <random>
#include <string>
#include <vector>

#include "edqed/lattice.hpp"

namespace edqed {

/// Lagrange multipliers of one short step; derived from LatticeSpec and dt only.
struct Multipliers {
  double dt = 0;
  std::vector<double> alpha_n;  // m_n / (eta dt)
  double alpha = 0;             // 1 / (c^2 eta dt)
  double alpha_prime = 0;       // 1 / eta
  std::vector<double> beta_n;   // q_n / c

  static Multipliers from(const LatticeSpec& s, double dt) {
    if (!(dt > 0) || !std::isfinite(dt)) throw InvalidSpec("time step must be positive");
    Multipliers m;
    m.dt = dt;
    for (const auto& p : s.particles) {
      m.alpha_n.push_back(p.mass / (s.eta * dt));
      m.beta_n.push_back(p.charge / s.c);
    }
    m.alpha = 1.0 / (s.c * s.c * s.eta * dt);
    m.alpha_prime = 1.0 / s.eta;
    return m;
  }
};

struct StepSample {
  RealVec dz;  // N*D, index n*D + a
  RealVec dA;  // V*D, index x*D + a
};

/// Expected drift (dz_bar, dA_bar) at configuration idx for drift potential varphi.
inline StepSample drift_means(const ConfigSpace& cs, std::int64_t idx, const RealVec& varphi, const Multipliers& m) {
  const LatticeSpec& s = cs.spec();
  cs.check_index(idx);
  if (varphi.size() != cs.size()) throw IndexError("drift potential has wrong length");
  StepSample out{RealVec(cs.particle_dofs()), RealVec(cs.field_dofs())};
  for (int n = 0; n < s.num_particles(); ++n) {
    const int z = cs.particle_site(idx, n);
    for (int a = 0; a < s.dim; ++a) {
      const double d = (varphi[cs.shift_particle(idx, n, a, 1)] - varphi[cs.shift_particle(idx, n, a, -1)]) /
                       (2.0 * s.dx);
      const int zb = cs.lattice().shift(z, a, -1);
      const double abar =
          0.5 * (cs.field_value(idx, cs.field_index(z, a)) + cs.field_value(idx, cs.field_index(zb, a)));
      out.dz[n * s.dim + a] = m.dt / s.particles[n].mass * (d - m.beta_n[n] * abar);
    }
  }
  const double fden = 2.0 * s.dA * s.cell_volume();
  for (int f = 0; f < cs.field_dofs(); ++f) {
    const double d = (varphi[cs.shift_field(idx, f, 1)] - varphi[cs.shift_field(idx, f, -1)]) / fden;
    out.dA[f] = m.dt * s.c * s.c * d;
  }
  return out;
}

/// Log of the unnormalized Gaussian transition density.
inline double transition_logdensity(const ConfigSpace& cs, const StepSample& step, std::int64_t idx,
                                    const RealVec& varphi, const Multipliers& m) {
  const LatticeSpec& s = cs.spec();
  if (step.dz.size() != cs.particle_dofs() || step.dA.size() != cs.field_dofs())
    throw IndexError("step has wrong shape");
  const StepSample mu = drift_means(cs, idx, varphi, m);
  double acc = 0;
  for (int n = 0; n < s.num_particles(); ++n)
    for (int a = 0; a < s.dim; ++a) {
      const double d = step.dz[n * s.dim + a] - mu.dz[n * s.dim + a];
      acc -= 0.5 * m.alpha_n[n] * d * d;
    }
  acc -= 0.5 * m.alpha * s.cell_volume() * (step.dA - mu.dA).squaredNorm();
  return acc;
}

/**
 * Counter-based generator: output k is splitmix64(seed + k * golden gamma).
 * Satisfies UniformRandomBitGenerator, so it feeds std distributions.
 */
class CounterRng {
 public:
  using result_type = std::uint64_t;
  explicit CounterRng(std::uint64_t seed, std::uint64_t stream = 0) : seed_(mix(seed ^ mix(stream + 1))) {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }
  result_type operator()() { return mix(seed_ + (++counter_) * 0x9E3779B97F4A7C15ULL); }
  std::uint64_t counter() const { return counter_; }

 private:
  static std::uint64_t mix(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }
  std::uint64_t seed_;
  std::uint64_t counter_ = 0;
};

/// Gaussian step: mean drift_means, variances eta dt/m_n and c^2 eta dt/dx^D, no cross-correlation.
inline StepSample sample_step(CounterRng& rng, const ConfigSpace& cs, std::int64_t idx, const RealVec& varphi,
                              const Multipliers& m) {
  const LatticeSpec& s = cs.spec();
  StepSample st = drift_means(cs, idx, varphi, m);
  std::normal_distribution<double> nd;
  for (int n = 0; n < s.num_particles(); ++n)
    for (int a = 0; a < s.dim; ++a) st.dz[n * s.dim + a] += nd(rng) / std::sqrt(m.alpha_n[n]);
  const double sw = 1.0 / std::sqrt(m.alpha * s.cell_volume());
  for (int f = 0; f < cs.field_dofs(); ++f) st.dA[f] += nd(rng) * sw;
  return st;
}

struct MomentRow {
  std::string quantity;
  double predicted, empirical, stderr_, z;
};

/**
 * Monte-Carlo moment report at configuration idx: means and variances of every
 * step component and the cross-covariance of every particle/field pair.
 */
inline std::vector<MomentRow> moment_report(const ConfigSpace& cs, std::int64_t idx, const RealVec& varphi,
                                            const Multipliers& m, int samples, std::uint64_t seed) {
  const LatticeSpec& s = cs.spec();
  const int np = cs.particle_dofs(), nf = cs.field_dofs(), nd = np + nf;
  Eigen::MatrixXd x(samples, nd);
  CounterRng rng(seed);
  for (int k = 0; k < samples; ++k) {
    const StepSample st = sample_step(rng, cs, idx, varphi, m);
    x.row(k).head(np) = st.dz.transpose();
    x.row(k).tail(nf) = st.dA.transpose();
  }
  const StepSample mu = drift_means(cs, idx, varphi, m);
  RealVec pmean(nd), pvar(nd);
  for (int d = 0; d < np; ++d) {
    pmean[d] = mu.dz[d];
    pvar[d] = 1.0 / m.alpha_n[d / s.dim];
  }
  for (int f = 0; f < nf; ++f) {
    pmean[np + f] = mu.dA[f];
    pvar[np + f] = 1.0 / (m.alpha * s.cell_volume());
  }
  const RealVec emean = x.colwise().mean();
  const Eigen::MatrixXd c = x.rowwise() - emean.transpose();
  std::vector<MomentRow> rows;
  const double n = samples;
  auto push = [&](std::string q, double pred, double emp, double se) {
    rows.push_back({std::move(q), pred, emp, se, se > 0 ? (emp - pred) / se : 0.0});
  };
  auto name = [&](int d) { return d < np ? "dz[" + std::to_string(d) + "]" : "dA[" + std::to_string(d - np) + "]"; };
  for (int d = 0; d < nd; ++d) push("mean " + name(d), pmean[d], emean[d], std::sqrt(pvar[d] / n));
  for (int d = 0; d < nd; ++d)
    push("var " + name(d), pvar[d], c.col(d).squaredNorm() / (n - 1), pvar[d] * std::sqrt(2.0 / (n - 1)));
  for (int d = 0; d < np; ++d)
    for (int f = np; f < nd; ++f)
      push("cov " + name(d) + " " + name(f), 0.0, c.col(d).dot(c.col(f)) / (n - 1), std::sqrt(pvar[d] * pvar[f] / n));
  return rows;
}

inline void write_moment_csv(std::ostream& os, const std::vector<MomentRow>& rows) {
  os << "quantity,predicted,empirical,stderr,z_score\n";
  os.precision(17);
  for (const auto& r : rows)
    os << r.quantity << ',' << r.predicted << ',' << r.empirical << ',' << r.stderr_ << ',' << r.z << '\n';
}

// ---------------------------------------------------------------------------
// Entropy maximization on a finite step space.

struct MaxEntResult {
  RealVec p;
  RealVec lambda;
  double residual = 0;  // max |E_P f_k - F_k|
  int iterations = 0;
};

/**
 * Maximizes -sum P log(P/Q) subject to E_P[f_k] = F_k by damped Newton on the
 * dual log Z(lambda) - lambda.F, with P proportional to Q exp(f.lambda).
 * f is atoms x constraints.
 */
inline MaxEntResult maxent_oracle(const RealVec& q, const Eigen::MatrixXd& f, const RealVec& target,
                                  int max_iter = 200) {
  const int na = static_cast<int>(q.size());
  const int nc = static_cast<int>(f.cols());
  if (f.rows() != na || target.size() != nc) throw IndexError("maxent_oracle: shape mismatch");
  if ((q.array() < 0).any() || q.sum() <= 0) throw InvalidSpec("maxent_oracle: prior must be nonnegative");
  const double scale = f.size() ? std::max(1.0, f.cwiseAbs().maxCoeff()) : 1.0;
  const double gtol = 1e-12 * scale;

  auto dual = [&](const RealVec& lam, RealVec* p) {
    RealVec e = f * lam;
    double mx = -std::numeric_limits<double>::infinity();
    for (int i = 0; i < na; ++i)
      if (q[i] > 0) mx = std::max(mx, e[i]);
    double z = 0;
    RealVec w = RealVec::Zero(na);
    for (int i = 0; i < na; ++i)
      if (q[i] > 0) {
        w[i] = q[i] * std::exp(e[i] - mx);
        z += w[i];
      }
    if (p) *p = w / z;
    return mx + std::log(z) - lam.dot(target);
  };

  MaxEntResult r;
  r.lambda = RealVec::Zero(nc);
  double g = dual(r.lambda, &r.p);
  for (r.iterations = 0; r.iterations < max_iter; ++r.iterations) {
    const RealVec mean = f.transpose() * r.p;
    const RealVec grad = mean - target;
    r.residual = nc ? grad.cwiseAbs().maxCoeff() : 0.0;
    if (nc == 0 || grad.norm() < gtol) return r;
    const Eigen::MatrixXd fc = f.rowwise() - mean.transpose();
    Eigen::MatrixXd hess = fc.transpose() * r.p.asDiagonal() * fc;
    hess.diagonal().array() += 1e-14 * std::max(1.0, hess.diagonal().maxCoeff());
    const RealVec step = -hess.ldlt().solve(grad);
    double t = 1.0;
    RealVec pn;
    double gn = dual(r.lambda + step, &pn);
    while (gn > g + 1e-4 * t * grad.dot(step) && t > 1e-12) {
      t *= 0.5;
      gn = dual(r.lambda + t * step, &pn);
    }
    if (!(gn <= g + 1e-15 * std::abs(g)) && t <= 1e-12) break;
    r.lambda += t * step;
    r.p = pn;
    g = gn;
    if (!r.lambda.allFinite() || r.lambda.cwiseAbs().maxCoeff() > 1e12) break;
  }
  const RealVec grad = f.transpose() * r.p - target;
  r.residual = nc ? grad.cwiseAbs().maxCoeff() : 0.0;
  if (grad.norm() < gtol) return r;
  throw NoConvergence("maxent_oracle: constraints infeasible or solver stalled", r.residual);
}

// ---------------------------------------------------------------------------
// Integral evolution of rho with a lattice MaxEnt kernel.

/**
 * One-step lattice kernel: every degree of freedom moves by s in {-1, 0, +1}
 * grid units, independently given the source configuration. The prior is
 * Q(+-1) = w, Q(0) = 1 - 2w with 2w times the squared grid spacing equal to
 * the prior variance (eta dt/m_n or c^2 eta dt/dx^D). The MaxEnt tilt is
 * alpha' [varphi(cfg + s) - varphi(cfg) - beta_n A_link s dx], A_link being
 * the link the hop traverses.
 */
struct LatticeKernel {
  std::vector<double> w;  // per DOF, particle DOFs first

  static LatticeKernel from(const ConfigSpace& cs, const Multipliers& m) {
    const LatticeSpec& s = cs.spec();
    LatticeKernel k;
    for (int n = 0; n < s.num_particles(); ++n)
      for (int a = 0; a < s.dim; ++a) k.w.push_back(1.0 / (m.alpha_n[n] * 2.0 * s.dx * s.dx));
    for (int f = 0; f < cs.field_dofs(); ++f)
      k.w.push_back(1.0 / (m.alpha * s.cell_volume() * 2.0 * s.dA * s.dA));
    for (double w : k.w)
      if (2.0 * w > 1.0)
        throw StepSizeError("evolve_rho_integral: dt too large, prior step variance exceeds one grid spacing (2w = " +
                            std::to_string(2.0 * w) + ")");
    return k;
  }

  /// Probabilities of s = -1, 0, +1 for each DOF at configuration idx.
  std::vector<std::array<double, 3>> local(const ConfigSpace& cs, std::int64_t idx, const RealVec& varphi,
                                           const Multipliers& m) const {
    const LatticeSpec& s = cs.spec();
    std::vector<std::array<double, 3>> out;
    out.reserve(w.size());
    const double v0 = varphi[idx];
    auto normalize = [&](double wd, double tm, double tp) {
      std::array<double, 3> p{wd * std::exp(tm), 1.0 - 2.0 * wd, wd * std::exp(tp)};
      const double z = p[0] + p[1] + p[2];
      for (double& x : p) x /= z;
      return p;
    };
    int d = 0;
    for (int n = 0; n < s.num_particles(); ++n) {
      const int z = cs.particle_site(idx, n);
      for (int a = 0; a < s.dim; ++a, ++d) {
        const double a_up = cs.field_value(idx, cs.field_index(z, a));
        const double a_dn = cs.field_value(idx, cs.field_index(cs.lattice().shift(z, a, -1), a));
        const double tp =
            m.alpha_prime * (varphi[cs.shift_particle(idx, n, a, 1)] - v0 - m.beta_n[n] * a_up * s.dx);
        const double tm =
            m.alpha_prime * (varphi[cs.shift_particle(idx, n, a, -1)] - v0 + m.beta_n[n] * a_dn * s.dx);
        out.push_back(normalize(w[d], tm, tp));
      }
    }
    for (int f = 0; f < cs.field_dofs(); ++f, ++d) {
      const double tp = m.alpha_prime * (varphi[cs.shift_field(idx, f, 1)] - v0);
      const double tm = m.alpha_prime * (varphi[cs.shift_field(idx, f, -1)] - v0);
      out.push_back(normalize(w[d], tm, tp));
    }
    return out;
  }
};

/// rho'(cfg') = sum_cfg P(cfg'|cfg) rho(cfg) with the lattice kernel above.
inline RealVec evolve_rho_integral(const ConfigSpace& cs, const RealVec& rho, const RealVec& varphi,
                                   const Multipliers& m) {
  if (rho.size() != cs.size() || varphi.size() != cs.size()) throw IndexError("vector has wrong length");
  const LatticeKernel ker = LatticeKernel::from(cs, m);
  const int nd = static_cast<int>(ker.w.size());
  if (std::pow(3.0L, nd) * cs.size() > 2e9L) throw CapacityError(std::pow(3.0L, nd) * cs.size(), 2000000000ULL);
  RealVec out = RealVec::Zero(cs.size());
  const LatticeSpec& s = cs.spec();
  for (std::int64_t i = 0; i < cs.size(); ++i) {
    if (rho[i] == 0.0) continue;
    const auto p = ker.local(cs, i, varphi, m);
    auto shift = [&](std::int64_t idx, int d, int delta) {
      if (d < cs.particle_dofs()) return cs.shift_particle(idx, d / s.dim, d % s.dim, delta);
      return cs.shift_field(idx, d - cs.particle_dofs(), delta);
    };
    // depth-first over the 3^nd step combinations
    auto rec = [&](auto&& self, int d, std::int64_t idx, double prob) -> void {
      if (d == nd) {
        out[idx] += prob;
        return;
      }
      for (int k = 0; k < 3; ++k) {
        if (p[d][k] == 0.0) continue;
        self(self, d + 1, k == 1 ? idx : shift(idx, d, k - 1), prob * p[d][k]);
      }
    };
    rec(rec, 0, i, rho[i]);
  }
  return out;
}

}  // namespace edqed
