#include <gtest/gtest.h>

#include <sstream>
#include <numbers>

#include "edqed/geometry.hpp"
#include "edqed/io.hpp"
#include "support.hpp"

using namespace edqed;
using test::Gen;
using test::make_spec;

namespace {

TangentVector random_tangent(Gen& g, int k) { return {g.real_vec(k), g.real_vec(k)}; }

EpistemicState random_state(Gen& g, int k) { return {g.probability(k), g.real_vec(k, -3, 3), true}; }

KernelOperator kernel_from(const Eigen::MatrixXcd& m) {
  return make_kernel(sparsify(m, 0.0), Basis::configuration, KernelTag::observable);
}

// Functional F(rho, phi) = <psi|O|psi> with psi built from (rho, phi); no normalization.
double functional(const Eigen::MatrixXcd& o, const RealVec& rho, const RealVec& phi, double hbar) {
  const ComplexVec psi = to_wavefunction(rho, phi, hbar);
  return psi.dot(o * psi).real();
}

// Coordinate form sum_k dF/drho_k dG/dphi_k - dF/dphi_k dG/drho_k by central differences.
double pb_rho_phi_fd(const Eigen::MatrixXcd& f, const Eigen::MatrixXcd& g, const EpistemicState& s, double hbar) {
  const double h = 1e-5;
  const int k = static_cast<int>(s.rho.size());
  auto grad = [&](const Eigen::MatrixXcd& o, bool wrt_rho) {
    RealVec out(k);
    for (int i = 0; i < k; ++i) {
      RealVec r = s.rho, p = s.phi;
      RealVec& v = wrt_rho ? r : p;
      v[i] += h;
      const double up = functional(o, r, p, hbar);
      v[i] -= 2 * h;
      out[i] = (up - functional(o, r, p, hbar)) / (2 * h);
    }
    return out;
  };
  return grad(f, true).dot(grad(g, false)) - grad(f, false).dot(grad(g, true));
}

// Same bracket in psi coordinates: (1/i hbar) sum dF/dpsi dG/dpsi* - dF/dpsi* dG/dpsi, Wirtinger derivatives by
// central differences in the real and imaginary parts.
double pb_psi_fd(const Eigen::MatrixXcd& f, const Eigen::MatrixXcd& g, const ComplexVec& psi, double hbar) {
  const double h = 1e-5;
  const int k = static_cast<int>(psi.size());
  auto wirtinger = [&](const Eigen::MatrixXcd& o, bool conj) {
    ComplexVec out(k);
    auto val = [&](const ComplexVec& v) { return v.dot(o * v).real(); };
    for (int i = 0; i < k; ++i) {
      ComplexVec a = psi, b = psi, c = psi, d = psi;
      a[i] += h;
      b[i] -= h;
      c[i] += cplx(0, h);
      d[i] -= cplx(0, h);
      const double dx = (val(a) - val(b)) / (2 * h), dy = (val(c) - val(d)) / (2 * h);
      out[i] = conj ? 0.5 * cplx(dx, dy) : 0.5 * cplx(dx, -dy);
    }
    return out;
  };
  const ComplexVec fz = wirtinger(f, false), fzb = wirtinger(f, true);
  const ComplexVec gz = wirtinger(g, false), gzb = wirtinger(g, true);
  cplx acc = 0;
  for (int i = 0; i < k; ++i) acc += fz[i] * gzb[i] - fzb[i] * gz[i];
  return (acc / cplx(0, hbar)).real();
}

}  // namespace

TEST(Omega, BlockFormAndAntisymmetry) {
  const int k = 4;
  for (int i = 0; i < k; ++i) {
    TangentVector v{RealVec::Zero(k), RealVec::Zero(k)}, u{RealVec::Zero(k), RealVec::Zero(k)};
    v.d_rho[i] = 1;
    u.d_phi[i] = 1;
    EXPECT_DOUBLE_EQ(omega(v, u), 1.0);
    EXPECT_DOUBLE_EQ(omega(u, v), -1.0);
  }
  Gen g(10);
  for (int trial = 0; trial < 20; ++trial) {
    const TangentVector v = random_tangent(g, 12);
    EXPECT_EQ(omega(v, v), 0.0);
  }
}

TEST(Omega, MatchesDenseBlockMatrix) {
  Gen g(11);
  const int k = 8;
  Eigen::MatrixXd w = Eigen::MatrixXd::Zero(2 * k, 2 * k);
  for (int i = 0; i < k; ++i) {
    w(2 * i, 2 * i + 1) = 1;
    w(2 * i + 1, 2 * i) = -1;
  }
  for (int trial = 0; trial < 20; ++trial) {
    const TangentVector v = random_tangent(g, k), u = random_tangent(g, k);
    RealVec vv(2 * k), uu(2 * k);
    for (int i = 0; i < k; ++i) {
      vv[2 * i] = v.d_rho[i];
      vv[2 * i + 1] = v.d_phi[i];
      uu[2 * i] = u.d_rho[i];
      uu[2 * i + 1] = u.d_phi[i];
    }
    EXPECT_NEAR(omega(v, u), vv.dot(w * uu), 1e-13);
  }
}

TEST(Omega, BilinearAndLengthChecked) {
  Gen g(12);
  const TangentVector v = random_tangent(g, 6), u = random_tangent(g, 6), w = random_tangent(g, 6);
  const TangentVector comb{2.0 * v.d_rho - 0.5 * w.d_rho, 2.0 * v.d_phi - 0.5 * w.d_phi};
  EXPECT_NEAR(omega(comb, u), 2.0 * omega(v, u) - 0.5 * omega(w, u), 1e-13);
  EXPECT_THROW(omega(v, random_tangent(g, 5)), IndexError);
}

TEST(Metric, Examples) {
  const EpistemicState s{RealVec::Constant(1, 0.5), RealVec::Zero(1)};
  EXPECT_DOUBLE_EQ(metric_length_sq(s, {RealVec::Ones(1), RealVec::Zero(1)}, 1.0), 1.0);
  EXPECT_EQ(metric_length_sq(s, {RealVec::Zero(1), RealVec::Zero(1)}, 1.0), 0.0);
  const EpistemicState z{RealVec::Zero(1), RealVec::Zero(1)};
  EXPECT_THROW(metric_length_sq(z, {RealVec::Ones(1), RealVec::Zero(1)}, 1.0), SingularSupport);
  EXPECT_EQ(metric_length_sq(z, {RealVec::Zero(1), RealVec::Ones(1)}, 1.0), 0.0);
}

TEST(Metric, PositiveDefiniteAndSymmetric) {
  Gen g(13);
  for (int trial = 0; trial < 50; ++trial) {
    const int k = g.integer(1, 100);
    const EpistemicState s = random_state(g, k);
    const TangentVector v = random_tangent(g, k), u = random_tangent(g, k);
    EXPECT_GT(metric_length_sq(s, v, 0.7), 0.0);
    EXPECT_NEAR(metric(s, v, v, 0.7), metric_length_sq(s, v, 0.7), 1e-10 * metric_length_sq(s, v, 0.7));
    EXPECT_NEAR(metric(s, v, u, 0.7), metric(s, u, v, 0.7), 1e-12);
  }
}

TEST(Metric, EqualsTwiceHbarWavefunctionNorm) {
  Gen g(14);
  for (double hbar : {1.0, 0.3}) {
    for (int trial = 0; trial < 10; ++trial) {
      const EpistemicState s = random_state(g, 16);
      const ComplexVec psi = to_wavefunction(s, hbar);
      const ComplexVec dpsi = 1e-4 * g.complex_vec(16);
      const TangentVector t = tangent_from_dpsi(psi, dpsi, hbar);
      const double lhs = metric_length_sq(s, t, hbar);
      const double rhs = 2 * hbar * dpsi.squaredNorm();
      EXPECT_NEAR(lhs, rhs, 1e-10 * rhs);
    }
  }
}

TEST(ComplexStructure, SquaresToMinusOne) {
  Gen g(15);
  for (int trial = 0; trial < 30; ++trial) {
    const EpistemicState s = random_state(g, 20);
    const TangentVector v = random_tangent(g, 20);
    const TangentVector jj = j_apply(s, j_apply(s, v, 0.9), 0.9);
    EXPECT_LT((jj.d_rho + v.d_rho).cwiseAbs().maxCoeff(), 1e-12);
    EXPECT_LT((jj.d_phi + v.d_phi).cwiseAbs().maxCoeff(), 1e-12);
  }
  const EpistemicState s = random_state(g, 3);
  const TangentVector z{RealVec::Zero(3), RealVec::Zero(3)};
  const TangentVector jz = j_apply(s, z, 1.0);
  EXPECT_EQ(jz.d_rho.cwiseAbs().maxCoeff(), 0.0);
  EXPECT_EQ(jz.d_phi.cwiseAbs().maxCoeff(), 0.0);
}

TEST(ComplexStructure, CompatibleWithMetricAndSingularAtZero) {
  Gen g(16);
  for (int trial = 0; trial < 30; ++trial) {
    const EpistemicState s = random_state(g, 10);
    const TangentVector v = random_tangent(g, 10), u = random_tangent(g, 10);
    const double a = metric(s, j_apply(s, v, 1.0), j_apply(s, u, 1.0), 1.0);
    EXPECT_NEAR(a, metric(s, v, u, 1.0), 1e-10 * std::max(1.0, std::abs(a)));
    // Omega(V,U) = G(JV,U) ties the three structures together.
    EXPECT_NEAR(metric(s, j_apply(s, v, 1.0), u, 1.0), omega(v, u), 1e-10 * std::max(1.0, std::abs(a)));
  }
  EpistemicState s = random_state(g, 3);
  s.rho[1] = 0;
  EXPECT_THROW(j_apply(s, random_tangent(g, 3), 1.0), SingularSupport);
}

TEST(Wavefunction, Examples) {
  const double pi = std::numbers::pi;
  ComplexVec psi = to_wavefunction(RealVec::Ones(1), RealVec::Zero(1), 1.0);
  EXPECT_NEAR(std::abs(psi[0] - cplx(1, 0)), 0, 1e-15);
  psi = to_wavefunction(RealVec::Ones(1), RealVec::Constant(1, pi * 0.5 / 2), 0.5);
  EXPECT_NEAR(std::abs(psi[0] - cplx(0, 1)), 0, 1e-15);
  const EpistemicState s = from_wavefunction(ComplexVec::Constant(1, cplx(-1, 0)), 2.0);
  EXPECT_NEAR(s.phi[0], 2.0 * pi, 1e-15);  // upper end of the branch
  const EpistemicState z = from_wavefunction(ComplexVec::Zero(2), 1.0);
  EXPECT_EQ(z.phi.cwiseAbs().maxCoeff(), 0.0);
  EXPECT_THROW(to_wavefunction(RealVec::Constant(1, -0.1), RealVec::Zero(1), 1.0), NumericalError);
}

TEST(Wavefunction, RoundTripPreservesRhoAndPhaseModulo) {
  Gen g(17);
  const double hbar = 0.7;
  for (int trial = 0; trial < 20; ++trial) {
    RealVec rho = g.probability(30);
    rho[0] = 0;
    const RealVec phi = g.real_vec(30, -20, 20);
    const EpistemicState back = from_wavefunction(to_wavefunction(rho, phi, hbar), hbar);
    EXPECT_LT((back.rho - rho).cwiseAbs().maxCoeff(), 1e-16);
    for (int k = 1; k < 30; ++k) {
      const double d = std::remainder(back.phi[k] - phi[k], 2 * std::numbers::pi * hbar);
      EXPECT_NEAR(d, 0.0, 1e-12);
      EXPECT_GT(back.phi[k], -std::numbers::pi * hbar);
      EXPECT_LE(back.phi[k], std::numbers::pi * hbar);
    }
  }
}

TEST(PoissonBracket, TrivialCasesAndHermiticityGuard) {
  const ConfigSpace cs(make_spec(1, 2, 2, {{1, 0}}));
  Gen g(18);
  const KernelOperator v = kernel_from(g.hermitian(8));
  const ComplexVec psi = g.unit_vec(8);
  EXPECT_NEAR(poisson_bracket(cs, v, v, psi, 1.0), 0, 1e-14);
  const KernelOperator id = kernel_from(Eigen::MatrixXcd::Identity(8, 8));
  EXPECT_NEAR(poisson_bracket(cs, id, v, psi, 1.0), 0, 1e-14);
  Eigen::MatrixXcd nh = g.hermitian(8);
  nh(0, 1) += 0.5;
  EXPECT_THROW(poisson_bracket(cs, kernel_from(nh), v, psi, 1.0), NumericalError);
}

TEST(PoissonBracket, MatchesCoordinateFormByFiniteDifferences) {
  const ConfigSpace cs(make_spec(1, 2, 2, {{1, 0}}));
  Gen g(19);
  for (double hbar : {1.0, 0.5}) {
    for (int trial = 0; trial < 5; ++trial) {
      const Eigen::MatrixXcd a = g.hermitian(8), b = g.hermitian(8);
      const EpistemicState s{g.positive_vec(8), g.real_vec(8, -2, 2)};
      const ComplexVec psi = to_wavefunction(s, hbar);
      const double pb = poisson_bracket(cs, kernel_from(a), kernel_from(b), psi, hbar);
      EXPECT_NEAR(pb, pb_rho_phi_fd(a, b, s, hbar), 1e-6);
      // The map to psi is canonical: the same bracket evaluated in psi coordinates agrees.
      EXPECT_NEAR(pb_rho_phi_fd(a, b, s, hbar), pb_psi_fd(a, b, psi, hbar), 1e-6);
    }
  }
}

TEST(PoissonBracket, AntisymmetryBilinearityJacobi) {
  const ConfigSpace cs(make_spec(1, 2, 2, {{1, 0}}));
  Gen g(20);
  const double hbar = 0.8;
  const cplx ih(0, hbar);
  for (int trial = 0; trial < 10; ++trial) {
    const Eigen::MatrixXcd a = g.hermitian(8), b = g.hermitian(8), c = g.hermitian(8);
    const ComplexVec psi = g.unit_vec(8);
    auto pb = [&](const Eigen::MatrixXcd& x, const Eigen::MatrixXcd& y) {
      return poisson_bracket(cs, kernel_from(x), kernel_from(y), psi, hbar);
    };
    EXPECT_NEAR(pb(a, b), -pb(b, a), 1e-12);
    EXPECT_NEAR(pb(Eigen::MatrixXcd(1.5 * a - 2.0 * c), b), 1.5 * pb(a, b) - 2.0 * pb(c, b), 1e-10);
    // The bracket of two quadratic functionals is the quadratic functional of [X,Y]/(i hbar).
    auto br = [&](const Eigen::MatrixXcd& x, const Eigen::MatrixXcd& y) {
      return Eigen::MatrixXcd((x * y - y * x) / ih);
    };
    const double jac = pb(a, br(b, c)) + pb(b, br(c, a)) + pb(c, br(a, b));
    EXPECT_NEAR(jac, 0.0, 1e-8);
  }
}

TEST(Normalization, FunctionalAndRayFlow) {
  Gen g(21);
  const double hbar = 0.6;
  const ComplexVec psi = g.unit_vec(12);
  EXPECT_NEAR(normalization_functional(psi), 0.0, 1e-14);
  EXPECT_NEAR(normalization_functional(2.0 * psi), -3.0, 1e-13);
  EXPECT_LT((ray_flow(psi, 2 * std::numbers::pi * hbar, hbar) - psi).norm(), 1e-14);
  const Eigen::MatrixXcd h = g.hermitian(12);
  for (double nu : {0.1, 1.7, -4.0}) {
    const ComplexVec r = ray_flow(psi, nu, hbar);
    EXPECT_NEAR(r.dot(h * r).real(), psi.dot(h * psi).real(), 1e-12);
  }
}

TEST(Normalization, RayFlowSolvesHamiltonEquation) {
  Gen g(22);
  const double hbar = 0.6, nu = 0.4, h = 1e-5;
  const ComplexVec psi = 1.3 * g.unit_vec(6);
  const ComplexVec at = ray_flow(psi, nu, hbar);
  const ComplexVec dpsi = (ray_flow(psi, nu + h, hbar) - ray_flow(psi, nu - h, hbar)) / (2 * h);
  // d/dpsi* of N = 1 - sum |psi|^2 by central differences.
  ComplexVec grad(6);
  for (int k = 0; k < 6; ++k) {
    ComplexVec a = at, b = at, c = at, d = at;
    a[k] += h;
    b[k] -= h;
    c[k] += cplx(0, h);
    d[k] -= cplx(0, h);
    const double dx = (normalization_functional(a) - normalization_functional(b)) / (2 * h);
    const double dy = (normalization_functional(c) - normalization_functional(d)) / (2 * h);
    grad[k] = 0.5 * cplx(dx, dy);
  }
  EXPECT_LT((dpsi - grad / cplx(0, hbar)).norm(), 1e-8);
}

TEST(StateIo, RoundTripBothLayouts) {
  const LatticeSpec spec = make_spec(1, 3, 3, {{1, 0.5}});
  Gen g(23);
  const ComplexVec psi = g.unit_vec(81);
  for (StateLayout layout : {StateLayout::split, StateLayout::interleaved}) {
    const json j = parse_json_text(state_to_json(spec, psi, layout).dump());
    EXPECT_LT((state_from_json(spec, j) - psi).norm(), 1e-14);
  }
}

TEST(StateIo, RejectsForeignSpec) {
  const LatticeSpec spec = make_spec(1, 3, 3, {{1, 0.5}});
  LatticeSpec other = spec;
  other.dx = 0.5;
  Gen g(24);
  const json j = state_to_json(spec, g.unit_vec(81));
  try {
    state_from_json(other, j);
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.where(), "/spec_hash");
  }
  json bad = j;
  bad["layout"] = "columnar";
  EXPECT_THROW(state_from_json(spec, bad), ParseError);
}

TEST(KernelIo, CooListsStoredEntries) {
  Eigen::MatrixXcd m = Eigen::MatrixXcd::Zero(3, 3);
  m(0, 0) = 1.0;
  m(1, 2) = cplx(0, 2);
  m(2, 1) = cplx(0, -2);
  std::ostringstream os;
  write_coo(os, kernel_from(m));
  std::istringstream in(os.str());
  std::string header;
  std::getline(in, header);
  EXPECT_NE(header.find("basis=configuration"), std::string::npos);
  int r, c, nnz;
  in >> r >> c >> nnz;
  EXPECT_EQ(nnz, 3);
  Eigen::MatrixXcd back = Eigen::MatrixXcd::Zero(r, c);
  for (int k = 0; k < nnz; ++k) {
    int i, j;
    double re, im;
    in >> i >> j >> re >> im;
    back(i, j) = cplx(re, im);
  }
  EXPECT_EQ((back - m).norm(), 0.0);
}
