#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <set>

#include "edqed/config_io.hpp"
#include "edqed/lattice.hpp"
#include "support.hpp"

using namespace edqed;
using test::Gen;
using test::make_spec;

TEST(ConfigSpace, CountsMatchClosedForm) {
  EXPECT_EQ(ConfigSpace(make_spec(1, 2, 2, {{1, 0}})).size(), 8);
  EXPECT_EQ(ConfigSpace(make_spec(1, 3, 3, {{1, 0}})).size(), 81);
  EXPECT_EQ(ConfigSpace(make_spec(2, 2, 2)).size(), 256);
}

TEST(ConfigSpace, EncodeDecodeIsBijectionExhaustive) {
  for (const auto& spec : {make_spec(1, 3, 3, {{1, 0}}), make_spec(2, 2, 2, {{1, 0}}), make_spec(1, 2, 4, {{1, 0}, {2, 1}})}) {
    const ConfigSpace cs(spec);
    ASSERT_LE(cs.size(), 10000);
    std::set<std::int64_t> seen;
    for (std::int64_t i = 0; i < cs.size(); ++i) {
      const OnticConfig c = cs.decode(i);
      EXPECT_EQ(c.z.size(), static_cast<std::size_t>(spec.num_particles() * spec.dim));
      EXPECT_EQ(c.A.size(), static_cast<std::size_t>(spec.field_dofs()));
      const std::int64_t j = cs.encode(c);
      EXPECT_EQ(j, i);
      seen.insert(j);
    }
    EXPECT_EQ(static_cast<std::int64_t>(seen.size()), cs.size());
  }
}

TEST(ConfigSpace, CapacityErrorReportsCount) {
  LatticeSpec s = make_spec(1, 3, 3, {{1, 0}});
  s.max_configs = 50;
  try {
    ConfigSpace cs(s);
    FAIL() << "expected capacity error";
  } catch (const CapacityError& e) {
    EXPECT_NE(std::string(e.what()).find("K=81"), std::string::npos) << e.what();
    EXPECT_EQ(static_cast<double>(e.count()), 81.0);
  }
}

TEST(ConfigSpace, InvalidSpecsRejected) {
  auto bad = [](auto mutate) {
    LatticeSpec s = make_spec(1, 3, 3, {{1, 0}});
    mutate(s);
    EXPECT_THROW(ConfigSpace{s}, InvalidSpec);
  };
  bad([](LatticeSpec& s) { s.dim = 4; });
  bad([](LatticeSpec& s) { s.sites = 1; });
  bad([](LatticeSpec& s) { s.levels = 1; });
  bad([](LatticeSpec& s) { s.dx = 0; });
  bad([](LatticeSpec& s) { s.hbar = -1; });
  bad([](LatticeSpec& s) { s.particles[0].mass = 0; });
  bad([](LatticeSpec& s) { s.periodic = false; });
}

TEST(ConfigSpace, IndexErrors) {
  const ConfigSpace cs(make_spec(1, 2, 2, {{1, 0}}));
  EXPECT_THROW(cs.decode(8), IndexError);
  EXPECT_THROW(cs.decode(-1), IndexError);
  EXPECT_THROW(cs.encode(OnticConfig{{2}, {0, 0}}), IndexError);
  RealVec f = RealVec::Zero(8);
  EXPECT_THROW(particle_derivative(cs, f, 1, 0), IndexError);
  EXPECT_THROW(field_derivative(cs, f, 2, 0), IndexError);
  EXPECT_THROW(particle_derivative(cs, RealVec(RealVec::Zero(7)), 0, 0), IndexError);
}

TEST(SignedLevel, SymmetricRepresentative) {
  EXPECT_EQ(signed_level(0, 3), 0);
  EXPECT_EQ(signed_level(1, 3), 1);
  EXPECT_EQ(signed_level(2, 3), -1);
  EXPECT_EQ(signed_level(2, 4), 2);
  EXPECT_EQ(signed_level(3, 4), -1);
}

TEST(ParticleDerivative, ConstantAndLinearity) {
  const ConfigSpace cs(make_spec(1, 3, 3, {{1, 0}}));
  Gen g(1);
  const RealVec c = RealVec::Constant(cs.size(), 2.5);
  EXPECT_LT(particle_derivative(cs, c, 0, 0).cwiseAbs().maxCoeff(), 1e-15);
  const RealVec f = g.real_vec(cs.size()), h = g.real_vec(cs.size());
  const RealVec lhs = particle_derivative(cs, RealVec(1.5 * f - 0.7 * h), 0, 0);
  const RealVec rhs = 1.5 * particle_derivative(cs, f, 0, 0) - 0.7 * particle_derivative(cs, h, 0, 0);
  EXPECT_LT((lhs - rhs).cwiseAbs().maxCoeff(), 1e-13);
}

TEST(ParticleDerivative, SineIsSecondOrder) {
  // Error of the central difference against the analytic cosine shrinks ~4x per halving of dx.
  double prev = 0;
  for (int ls : {8, 16}) {
    const double len = 8.0;
    const double dx = len / ls;
    LatticeSpec spec = make_spec(1, ls, 2, {{1, 0}}, dx);
    spec.max_configs = 1u << 21;
    const ConfigSpace cs(spec);
    RealVec f(cs.size()), exact(cs.size());
    for (std::int64_t i = 0; i < cs.size(); ++i) {
      const double z = cs.particle_coord(i, 0, 0) * dx;
      f[i] = std::sin(2 * std::numbers::pi * z / len);
      exact[i] = 2 * std::numbers::pi / len * std::cos(2 * std::numbers::pi * z / len);
    }
    const double err = (particle_derivative(cs, f, 0, 0) - exact).cwiseAbs().maxCoeff();
    if (ls == 8) EXPECT_LT(err, 0.1);
    if (prev > 0) EXPECT_NEAR(prev / err, 4.0, 0.2);
    prev = err;
  }
}

TEST(FieldDerivative, QuadraticFunctional) {
  // f = sum_x dx^D A(x,a)^2 -> 2 A(x,a), exact for central differences of a quadratic away from the wrap.
  const ConfigSpace cs(make_spec(1, 2, 7, {}, 0.5, 0.25));
  const double cell = cs.spec().cell_volume();
  RealVec f = RealVec::Zero(cs.size());
  for (std::int64_t i = 0; i < cs.size(); ++i)
    for (int d = 0; d < cs.field_dofs(); ++d) f[i] += cell * std::pow(cs.field_value(i, d), 2);
  const RealVec df = field_derivative(cs, f, 1, 0);
  const int fi = cs.field_index(1, 0);
  for (std::int64_t i = 0; i < cs.size(); ++i) {
    const int k = signed_level(cs.field_level(i, fi), 7);
    if (std::abs(k) == 3) continue;  // neighbours straddle the cyclic wrap
    EXPECT_NEAR(df[i], 2 * cs.field_value(i, fi), 1e-12);
  }
}

TEST(FieldDerivative, ProductRuleSecondOrder) {
  // Smooth periodic functions of A on finer grids: product-rule defect shrinks ~4x per halving of dA.
  double prev = 0;
  for (int m : {16, 32, 64}) {
    const double period = 4.0;
    const ConfigSpace cs(make_spec(1, 2, m, {}, 1.0, period / m));
    RealVec f(cs.size()), h(cs.size());
    for (std::int64_t i = 0; i < cs.size(); ++i) {
      const double a = cs.field_value(i, 0), b = cs.field_value(i, 1);
      f[i] = std::sin(2 * std::numbers::pi * a / period) + 0.3 * std::cos(2 * std::numbers::pi * b / period);
      h[i] = std::cos(4 * std::numbers::pi * a / period);
    }
    const RealVec lhs = field_derivative(cs, RealVec(f.cwiseProduct(h)), 0, 0);
    const RealVec rhs = f.cwiseProduct(field_derivative(cs, h, 0, 0)) + h.cwiseProduct(field_derivative(cs, f, 0, 0));
    const double err = (lhs - rhs).cwiseAbs().maxCoeff();
    if (prev > 0) EXPECT_NEAR(prev / err, 4.0, 0.4);
    prev = err;
  }
}

TEST(MixedPartials, ParticleAndFieldDerivativesCommute) {
  const ConfigSpace cs(make_spec(1, 3, 3, {{1, 0}}));
  Gen g(2);
  for (int trial = 0; trial < 5; ++trial) {
    const RealVec f = g.real_vec(cs.size());
    for (int x = 0; x < 3; ++x) {
      const RealVec a = particle_derivative(cs, field_derivative(cs, f, x, 0), 0, 0);
      const RealVec b = field_derivative(cs, particle_derivative(cs, f, 0, 0), x, 0);
      EXPECT_LT((a - b).cwiseAbs().maxCoeff(), 1e-12);
    }
  }
}

TEST(SpatialOps, ConstantsAndAdjointness) {
  Gen g(3);
  for (int dim = 1; dim <= 3; ++dim) {
    const SiteLattice lat(make_spec(dim, 3, 2, {}, 0.7));
    EXPECT_LT(spatial_grad(lat, RealVec::Constant(lat.volume(), 3.0)).cwiseAbs().maxCoeff(), 1e-14);
    EXPECT_LT(spatial_div(lat, Eigen::MatrixXd::Constant(lat.volume(), dim, 2.0)).cwiseAbs().maxCoeff(), 1e-14);
    for (int trial = 0; trial < 10; ++trial) {
      const RealVec f = g.real_vec(lat.volume());
      Eigen::MatrixXd v(lat.volume(), dim);
      for (int x = 0; x < lat.volume(); ++x)
        for (int a = 0; a < dim; ++a) v(x, a) = g.uniform();
      const double lhs = lattice_dot(lat, v, spatial_grad(lat, f));
      const double rhs = -lattice_dot(lat, f, spatial_div(lat, v));
      EXPECT_NEAR(lhs, rhs, 1e-12);
    }
  }
}

TEST(SpatialOps, DivGradIsStandardLaplacian) {
  Gen g(4);
  for (int dim = 1; dim <= 3; ++dim) {
    const SiteLattice lat(make_spec(dim, 4, 2, {}, 0.5));
    const RealVec f = g.real_vec(lat.volume());
    const RealVec lap = spatial_div(lat, spatial_grad(lat, f));
    for (int x = 0; x < lat.volume(); ++x) {
      double stencil = -2.0 * dim * f[x];
      for (int a = 0; a < dim; ++a) stencil += f[lat.shift(x, a, 1)] + f[lat.shift(x, a, -1)];
      EXPECT_NEAR(lap[x], stencil / 0.25, 1e-12);
    }
  }
}

TEST(SpatialOps, CurlOfGradVanishesAndCurlRejectedInOneD) {
  Gen g(5);
  for (int dim = 2; dim <= 3; ++dim) {
    const SiteLattice lat(make_spec(dim, 3, 2));
    const RealVec f = g.real_vec(lat.volume());
    EXPECT_LT(spatial_curl(lat, spatial_grad(lat, f)).cwiseAbs().maxCoeff(), 1e-13);
  }
  const SiteLattice lat1(make_spec(1, 3, 2));
  EXPECT_THROW(spatial_curl(lat1, Eigen::MatrixXd::Zero(3, 1)), InvalidSpec);
}

TEST(SiteLattice, MinimumImageDisplacement) {
  const SiteLattice lat(make_spec(2, 4, 2));
  const int x = lat.site({0, 0, 0}), y = lat.site({3, 2, 0});
  const auto d = lat.displacement(x, y);
  EXPECT_EQ(d[0], -1);
  EXPECT_EQ(d[1], 2);
}

// ---------------------------------------------------------------------------
// Structured configuration I/O.

TEST(ConfigIo, RoundTrip) {
  LatticeSpec s = make_spec(2, 3, 4, {{1.5, -0.25}, {2.0, 0.5}}, 0.5, 0.125);
  s.max_configs = 12345;
  const LatticeSpec t = spec_from_json(spec_to_json(s));
  EXPECT_EQ(spec_to_json(t), spec_to_json(s));
  EXPECT_EQ(spec_hash(t), spec_hash(s));
}

TEST(ConfigIo, ErrorPositions) {
  const json good = spec_to_json(make_spec(1, 3, 3, {{1, 0}}));
  auto position = [](const json& j) {
    try {
      spec_from_json(j, "/lattice");
    } catch (const ParseError& e) {
      return e.where();
    }
    return std::string("no error");
  };
  json j = good;
  j["bogus"] = 1;
  EXPECT_EQ(position(j), "/lattice/bogus");
  j = good;
  j["dx"] = "one";
  EXPECT_EQ(position(j), "/lattice/dx");
  j = good;
  j["particles"][0].erase("mass");
  EXPECT_EQ(position(j), "/lattice/particles/0");
  j = good;
  j["sites"] = 1;
  EXPECT_EQ(position(j), "/lattice");
  EXPECT_THROW(parse_json_text("{\"dim\": 1,"), ParseError);
}
