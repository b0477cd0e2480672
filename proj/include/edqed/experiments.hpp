#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <filesystem>
#include <functional>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "edqed/config_io.hpp"
#include "edqed/geometry.hpp"
#include "edqed/io.hpp"
#include "edqed/maxent.hpp"
#include "edqed/observables.hpp"

namespace edqed {

// ---------------------------------------------------------------------------
// Experiment configuration.

struct InitialState {
  std::string kind = "gaussian-packet";  // point | gaussian-packet | eigenstate-index | file
  std::int64_t config = 0;               // point
  std::vector<double> center;            // gaussian-packet, N*D lattice coordinates
  std::vector<double> momentum;          // gaussian-packet, N*D wavenumbers (radians per site)
  double width = 1.0;                    // gaussian-packet, in sites
  double field_width = 0;                // gaussian-packet, amplitude width (0 means dA)
  std::vector<double> field_center;      // gaussian-packet, per field DOF (empty means zero)
  std::vector<double> field_momentum;    // gaussian-packet, per field DOF, radians per unit amplitude
  int index = 0;                         // eigenstate-index
  std::string path;                      // file, resolved against the config directory
};

struct ExperimentConfig {
  std::string experiment;
  LatticeSpec lattice;
  double dt = 0.01;
  int steps = 100;
  std::uint64_t seed = 0;
  bool background = false;
  std::map<std::string, double> tolerances;  // merged with the experiment defaults
  std::string output = "out";
  InitialState initial;
  json source;  // the parsed document, hashed into the manifest
};

struct Check {
  std::string name;
  std::string op;  // defining operation
  double value = 0;
  double bound = 0;
  bool upper = true;  // pass iff value <= bound (upper) or value >= bound
  bool pass() const { return std::isfinite(value) && (upper ? value <= bound : value >= bound); }
};

struct Column {
  std::string name;
  std::string op;
  std::string doc;
};

struct ExperimentResult {
  std::vector<Check> checks;
  std::vector<Column> columns;
  std::vector<std::vector<double>> rows;
  std::int64_t configs = 0;
  bool passed() const {
    return std::all_of(checks.begin(), checks.end(), [](const Check& c) { return c.pass(); });
  }
};

struct ExperimentInfo {
  std::string name;
  std::string description;
  std::map<std::string, double> defaults;
  std::function<ExperimentResult(const ExperimentConfig&)> run;
  bool site_lattice_only = false;  // never enumerates configurations, so K is not capped
};

const std::vector<ExperimentInfo>& experiment_registry();

inline const ExperimentInfo* find_experiment(const std::string& name) {
  for (const auto& e : experiment_registry())
    if (e.name == name) return &e;
  return nullptr;
}

namespace detail {

inline std::vector<double> get_doubles(const json& j, const char* key, const std::string& at) {
  const json& v = require(j, key, at);
  if (!v.is_array()) throw ParseError(std::string("expected array for '") + key + "'", at + "/" + key);
  std::vector<double> out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!v[i].is_number()) throw ParseError("expected number", at + "/" + key + "/" + std::to_string(i));
    out.push_back(v[i].get<double>());
  }
  return out;
}

inline void only_keys(const json& j, std::initializer_list<const char*> keys, const std::string& at) {
  for (auto it = j.begin(); it != j.end(); ++it)
    if (std::none_of(keys.begin(), keys.end(), [&](const char* k) { return it.key() == k; }))
      throw ParseError("unknown key '" + it.key() + "'", at + "/" + it.key());
}

inline InitialState initial_from_json(const json& j, const LatticeSpec& s, const std::filesystem::path& base) {
  const std::string at = "/initial_state";
  if (!j.is_object()) throw ParseError("initial_state must be an object", at);
  InitialState st;
  const json& kind = require(j, "kind", at);
  if (!kind.is_string()) throw ParseError("expected string for 'kind'", at + "/kind");
  st.kind = kind.get<std::string>();
  const std::size_t nd = s.particles.size() * s.dim;
  if (st.kind == "point") {
    only_keys(j, {"kind", "config"}, at);
    const json& c = require(j, "config", at);
    if (!c.is_number_integer() || c.get<std::int64_t>() < 0)
      throw ParseError("expected nonnegative integer for 'config'", at + "/config");
    st.config = c.get<std::int64_t>();
  } else if (st.kind == "gaussian-packet") {
    only_keys(j, {"kind", "center", "momentum", "width", "field_width", "field_center", "field_momentum"}, at);
    st.center = j.contains("center") ? get_doubles(j, "center", at) : std::vector<double>(nd, 0.0);
    st.momentum = j.contains("momentum") ? get_doubles(j, "momentum", at) : std::vector<double>(nd, 0.0);
    if (st.center.size() != nd) throw ParseError("'center' needs N*D entries", at + "/center");
    if (st.momentum.size() != nd) throw ParseError("'momentum' needs N*D entries", at + "/momentum");
    if (j.contains("width")) st.width = get_number(j, "width", at);
    if (j.contains("field_width")) st.field_width = get_number(j, "field_width", at);
    if (!(st.width > 0)) throw ParseError("'width' must be positive", at + "/width");
    if (st.field_width < 0) throw ParseError("'field_width' must be nonnegative", at + "/field_width");
    const std::size_t nf = static_cast<std::size_t>(s.field_dofs());
    if (j.contains("field_center")) st.field_center = get_doubles(j, "field_center", at);
    if (j.contains("field_momentum")) st.field_momentum = get_doubles(j, "field_momentum", at);
    if (!st.field_center.empty() && st.field_center.size() != nf)
      throw ParseError("'field_center' needs D*V entries", at + "/field_center");
    if (!st.field_momentum.empty() && st.field_momentum.size() != nf)
      throw ParseError("'field_momentum' needs D*V entries", at + "/field_momentum");
  } else if (st.kind == "eigenstate-index") {
    only_keys(j, {"kind", "index"}, at);
    st.index = get_int(j, "index", at);
    if (st.index < 0) throw ParseError("'index' must be nonnegative", at + "/index");
  } else if (st.kind == "file") {
    only_keys(j, {"kind", "path"}, at);
    const json& p = require(j, "path", at);
    if (!p.is_string()) throw ParseError("expected string for 'path'", at + "/path");
    std::filesystem::path f(p.get<std::string>());
    if (f.is_relative()) f = base / f;
    if (!std::filesystem::exists(f)) throw ParseError("state file '" + f.string() + "' does not exist", at + "/path");
    st.path = f.string();
  } else {
    throw ParseError("unknown initial state kind '" + st.kind + "'", at + "/kind");
  }
  return st;
}

}  // namespace detail

/// Parses and schema-checks an experiment document; `base` resolves relative file references.
inline ExperimentConfig config_from_json(const json& j, const std::filesystem::path& base = ".") {
  if (!j.is_object()) throw ParseError("config must be an object", "/");
  detail::only_keys(j, {"experiment", "lattice", "dt", "steps", "seed", "background", "tolerances", "output",
                        "initial_state"},
                    "");
  ExperimentConfig c;
  c.source = j;
  const json& name = detail::require(j, "experiment", "");
  if (!name.is_string()) throw ParseError("expected string for 'experiment'", "/experiment");
  c.experiment = name.get<std::string>();
  const ExperimentInfo* info = find_experiment(c.experiment);
  if (!info) throw ParseError("unknown experiment '" + c.experiment + "'", "/experiment");
  c.lattice = spec_from_json(detail::require(j, "lattice", ""), "/lattice");
  if (j.contains("dt")) c.dt = detail::get_number(j, "dt", "");
  if (!(c.dt > 0)) throw ParseError("'dt' must be positive", "/dt");
  if (j.contains("steps")) c.steps = detail::get_int(j, "steps", "");
  if (c.steps < 1) throw ParseError("'steps' must be >= 1", "/steps");
  if (j.contains("seed")) {
    if (!j["seed"].is_number_unsigned()) throw ParseError("expected nonnegative integer for 'seed'", "/seed");
    c.seed = j["seed"].get<std::uint64_t>();
  }
  if (j.contains("background")) {
    if (!j["background"].is_boolean()) throw ParseError("expected boolean for 'background'", "/background");
    c.background = j["background"].get<bool>();
  }
  if (j.contains("output")) {
    if (!j["output"].is_string()) throw ParseError("expected string for 'output'", "/output");
    c.output = j["output"].get<std::string>();
  }
  c.tolerances = info->defaults;
  if (j.contains("tolerances")) {
    const json& t = j["tolerances"];
    if (!t.is_object()) throw ParseError("tolerances must be an object", "/tolerances");
    for (auto it = t.begin(); it != t.end(); ++it) {
      const std::string at = "/tolerances/" + it.key();
      if (!info->defaults.count(it.key())) throw ParseError("unknown tolerance '" + it.key() + "'", at);
      if (!it->is_number()) throw ParseError("expected number", at);
      c.tolerances[it.key()] = it->get<double>();
    }
  }
  if (j.contains("initial_state")) c.initial = detail::initial_from_json(j["initial_state"], c.lattice, base);
  else c.initial.center = c.initial.momentum = std::vector<double>(c.lattice.particles.size() * c.lattice.dim, 0.0);
  return c;
}

inline ExperimentConfig load_config(const std::string& path) {
  return config_from_json(read_json_file(path), std::filesystem::path(path).parent_path());
}

inline std::string config_hash(const ExperimentConfig& c) { return hex64(fnv1a(c.source.dump())); }

// ---------------------------------------------------------------------------
// Initial states.

inline ComplexVec build_initial_state(const ConfigSpace& cs, const InitialState& init) {
  const LatticeSpec& s = cs.spec();
  if (init.kind == "point") {
    if (init.config >= cs.size()) throw IndexError("initial config index out of range (K=" + std::to_string(cs.size()) + ")");
    ComplexVec psi = ComplexVec::Zero(cs.size());
    psi[init.config] = 1.0;
    return psi;
  }
  if (init.kind == "gaussian-packet") {
    const double fw = init.field_width > 0 ? init.field_width : s.dA;
    ComplexVec psi(cs.size());
    for (std::int64_t i = 0; i < cs.size(); ++i) {
      double logamp = 0, ph = 0;
      for (int n = 0; n < s.num_particles(); ++n)
        for (int a = 0; a < s.dim; ++a) {
          const int d = n * s.dim + a;
          double off = std::remainder(cs.particle_coord(i, n, a) - init.center[d], double(s.sites));
          logamp -= off * off / (4 * init.width * init.width);
          ph += init.momentum[d] * cs.particle_coord(i, n, a);
        }
      for (int f = 0; f < cs.field_dofs(); ++f) {
        const double a = cs.field_value(i, f);
        const double v = a - (init.field_center.empty() ? 0.0 : init.field_center[f]);
        logamp -= v * v / (4 * fw * fw);
        if (!init.field_momentum.empty()) ph += init.field_momentum[f] * a;
      }
      psi[i] = std::polar(std::exp(logamp), ph);
    }
    return psi / psi.norm();
  }
  if (init.kind == "eigenstate-index") {
    const KernelOperator h = build_hamiltonian_kernel(cs, s.dim >= 2 ? PotentialChoice::magnetic() : PotentialChoice::none());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(dense_in(cs, h, Basis::configuration));
    if (init.index >= cs.size()) throw IndexError("eigenstate index out of range");
    return es.eigenvectors().col(init.index);
  }
  if (init.kind == "file") return state_from_json(s, read_json_file(init.path));
  throw InvalidSpec("unknown initial state kind '" + init.kind + "'");
}

// ---------------------------------------------------------------------------
// Suites.

namespace suites {

inline PotentialChoice default_potential(const LatticeSpec& s) {
  return s.dim >= 2 ? PotentialChoice::magnetic() : PotentialChoice::none();
}

inline ComplexVec random_state(CounterRng& rng, std::int64_t k) {
  std::normal_distribution<double> nd;
  ComplexVec v(k);
  for (auto& x : v) x = cplx(nd(rng), nd(rng));
  return v / v.norm();
}

inline Eigen::MatrixXcd random_hermitian(CounterRng& rng, std::int64_t k) {
  std::normal_distribution<double> nd;
  Eigen::MatrixXcd m(k, k);
  for (auto& x : m.reshaped()) x = cplx(nd(rng), nd(rng));
  return (m + m.adjoint()) / 2.0;
}

inline Check upper(std::string name, std::string op, double value, double bound) {
  return {std::move(name), std::move(op), value, bound, true};
}
inline Check lower(std::string name, std::string op, double value, double bound) {
  return {std::move(name), std::move(op), value, bound, false};
}

inline ExperimentResult geometry(const ExperimentConfig& c) {
  const ConfigSpace cs(c.lattice);
  const std::int64_t K = cs.size();
  if (K > 512) throw CapacityError(static_cast<long double>(K), 512);
  const double hbar = c.lattice.hbar;
  CounterRng rng(c.seed);
  std::normal_distribution<double> nd;
  auto tangent = [&] {
    TangentVector v{RealVec(K), RealVec(K)};
    for (auto& x : v.d_rho) x = nd(rng);
    for (auto& x : v.d_phi) x = nd(rng);
    return v;
  };
  ExperimentResult r;
  r.configs = K;
  r.columns = {{"trial", "-", "trial number"},
               {"j2_residual", "j_apply", "max |J(J v) + v|"},
               {"omega_antisymmetry", "omega", "|Omega(v,u) + Omega(u,v)|"},
               {"metric_min_ratio", "metric", "G(v,v)/|v|^2"},
               {"jacobi_residual", "poisson_bracket", "|{a,{b,c}} + cyclic|"},
               {"canonical_residual", "tangent_from_dpsi", "|Omega(v,u) - 2 hbar Im<dpsi_v|dpsi_u>|"}};
  double j2 = 0, anti = 0, gmin = std::numeric_limits<double>::infinity(), jac = 0, canon = 0;
  const cplx ih(0, hbar);
  for (int t = 0; t < c.steps; ++t) {
    const ComplexVec psi = random_state(rng, K);
    const EpistemicState st = from_wavefunction(psi, hbar);
    const TangentVector v = tangent(), u = tangent();
    const TangentVector jj = j_apply(st, j_apply(st, v, hbar), hbar);
    const double r_j2 = std::max((jj.d_rho + v.d_rho).cwiseAbs().maxCoeff(), (jj.d_phi + v.d_phi).cwiseAbs().maxCoeff());
    const double r_anti = std::abs(omega(v, u) + omega(u, v));
    const double r_g = metric(st, v, v, hbar) / (v.d_rho.squaredNorm() + v.d_phi.squaredNorm());
    const Eigen::MatrixXcd a = random_hermitian(rng, K), b = random_hermitian(rng, K), cc = random_hermitian(rng, K);
    auto op = [&](const Eigen::MatrixXcd& m) { return make_kernel(sparsify(m, 0.0), Basis::configuration, KernelTag::observable); };
    auto br = [&](const Eigen::MatrixXcd& x, const Eigen::MatrixXcd& y) { return Eigen::MatrixXcd((x * y - y * x) / ih); };
    auto pb = [&](const Eigen::MatrixXcd& x, const Eigen::MatrixXcd& y) { return poisson_bracket(cs, op(x), op(y), psi, hbar, 1e-10); };
    const double r_jac = std::abs(pb(a, br(b, cc)) + pb(b, br(cc, a)) + pb(cc, br(a, b)));
    const ComplexVec d1 = random_state(rng, K), d2 = random_state(rng, K);
    const double r_can = std::abs(omega(tangent_from_dpsi(psi, d1, hbar), tangent_from_dpsi(psi, d2, hbar)) -
                                  2 * hbar * d1.dot(d2).imag());
    j2 = std::max(j2, r_j2);
    anti = std::max(anti, r_anti);
    gmin = std::min(gmin, r_g);
    jac = std::max(jac, r_jac);
    canon = std::max(canon, r_can);
    r.rows.push_back({double(t), r_j2, r_anti, r_g, r_jac, r_can});
  }
  const auto& tol = c.tolerances;
  r.checks = {upper("j_squared_minus_one", "j_apply", j2, tol.at("j_squared")),
              upper("omega_antisymmetry", "omega", anti, tol.at("omega")),
              lower("metric_positivity", "metric", gmin, tol.at("metric_min")),
              upper("poisson_jacobi", "poisson_bracket", jac, tol.at("jacobi")),
              upper("canonical_map", "tangent_from_dpsi", canon, tol.at("canonical"))};
  return r;
}

inline ExperimentResult maxent(const ExperimentConfig& c) {
  const ConfigSpace cs(c.lattice);
  const LatticeSpec& s = c.lattice;
  CounterRng rng(c.seed);
  std::normal_distribution<double> nd;
  RealVec varphi(cs.size());
  for (auto& v : varphi) v = 0.05 * nd(rng);
  ExperimentResult r;
  r.configs = cs.size();
  const std::int64_t idx = c.initial.kind == "point" ? c.initial.config : 0;
  if (idx >= cs.size()) throw IndexError("maxent: configuration index out of range");
  const auto rows = moment_report(cs, idx, varphi, Multipliers::from(s, c.dt), std::max(c.steps, 2), c.seed);
  r.columns = {{"row", "moment_report", "moment row (means, variances, then particle-field covariances)"},
               {"predicted", "drift_means", "predicted moment"},
               {"empirical", "sample_step", "sample moment"},
               {"stderr", "moment_report", "standard error of the sample moment"},
               {"z_score", "moment_report", "(empirical - predicted) / stderr"}};
  double zmax = 0;
  for (std::size_t k = 0; k < rows.size(); ++k) {
    r.rows.push_back({double(k), rows[k].predicted, rows[k].empirical, rows[k].stderr_, rows[k].z});
    zmax = std::max(zmax, std::abs(rows[k].z));
  }
  // Integral update against the continuity equation at dt, dt/2, dt/4.
  const KernelOperator h = convert(cs, build_hamiltonian_kernel(cs), Basis::configuration);
  RealVec rho(cs.size());
  for (auto& v : rho) v = 1.0 + 0.1 * nd(rng);
  rho /= rho.sum();
  const EpistemicState st{rho, varphi - 0.5 * s.eta * rho.array().log().matrix()};
  const RealVec rhs = continuity_rhs(cs, h, st);
  double prev = 0, worst = 0;
  for (int k = 0; k < 3; ++k) {
    const double dt = c.dt / std::pow(2.0, k);
    const double err = ((evolve_rho_integral(cs, rho, varphi, Multipliers::from(s, dt)) - rho) / dt - rhs).norm();
    if (prev > 0) worst = std::max(worst, std::abs(prev / err - 2.0) / 2.0);
    prev = err;
  }
  r.checks = {upper("moment_max_abs_z", "moment_report", zmax, c.tolerances.at("moment_z")),
              upper("continuity_first_order", "evolve_rho_integral", worst, c.tolerances.at("order_rel"))};
  return r;
}

inline ExperimentResult evolution(const ExperimentConfig& c) {
  const ConfigSpace cs(c.lattice);
  const LatticeSpec& s = c.lattice;
  const KernelOperator h = build_hamiltonian_kernel(cs, default_potential(s));
  const ComplexVec psi = build_initial_state(cs, c.initial);
  CrankNicolson cn(h, c.dt, s.hbar);
  ExperimentResult r;
  r.configs = cs.size();
  r.columns = {{"step", "-", "step number"},
               {"t", "-", "time"},
               {"norm_drift", "evolve_schrodinger", "| ||psi|| - ||psi_0|| |"},
               {"energy", "KernelOperator::expectation", "<psi|H|psi>"},
               {"total_charge", "charge_density", "sum_x dx^D rho_x"}};
  ComplexVec v = change_basis(cs, psi, Basis::configuration, h.basis);
  const double n0 = psi.norm();
  double e_prev = h.expectation(cs, psi), norm_step = 0, energy_step = 0, charge_dev = 0;
  double n_prev = n0;
  const double q0 = charge_density(cs, psi).sum() * s.cell_volume();
  r.rows.push_back({0, 0, 0, e_prev, q0});
  for (int k = 1; k <= c.steps; ++k) {
    v = cn.step(v);
    const ComplexVec pc = change_basis(cs, v, h.basis, Basis::configuration);
    const double e = h.expectation(cs, pc), nn = pc.norm();
    const double q = charge_density(cs, pc).sum() * s.cell_volume();
    norm_step = std::max(norm_step, std::abs(nn - n_prev));
    energy_step = std::max(energy_step, std::abs(e - e_prev));
    charge_dev = std::max(charge_dev, std::abs(q - q0));
    n_prev = nn;
    e_prev = e;
    r.rows.push_back({double(k), k * c.dt, std::abs(nn - n0), e, q});
  }
  CounterRng rng(c.seed);
  const ComplexVec p1 = random_state(rng, cs.size()), p2 = random_state(rng, cs.size());
  const cplx a(0.3, -1.2), b(2.0, 0.5);
  const int ls = std::min(c.steps, 20);
  const ComplexVec lin = evolve_schrodinger(cs, ComplexVec(a * p1 + b * p2), h, c.dt, ls, s.hbar) -
                         a * evolve_schrodinger(cs, p1, h, c.dt, ls, s.hbar) -
                         b * evolve_schrodinger(cs, p2, h, c.dt, ls, s.hbar);
  const auto& tol = c.tolerances;
  r.checks = {upper("norm_drift_per_step", "evolve_schrodinger", norm_step, tol.at("norm_step")),
              upper("energy_drift_per_step", "evolve_schrodinger", energy_step, tol.at("energy_step")),
              upper("total_charge_drift", "charge_density", charge_dev, tol.at("charge")),
              upper("superposition_linearity", "evolve_schrodinger", lin.norm(), tol.at("linearity"))};
  if (cs.size() <= 512) {
    // Order against the exact exponential over a fixed time.
    const Eigen::MatrixXcd hd = dense_in(cs, h, Basis::configuration);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(hd);
    const double T = 10 * c.dt;
    const ComplexVec ev = es.eigenvalues().unaryExpr([&](double l) { return std::polar(1.0, -l * T / s.hbar); });
    const ComplexVec exact = es.eigenvectors() * ev.cwiseProduct(es.eigenvectors().adjoint() * p1);
    const double e1 = (evolve_schrodinger(cs, p1, h, c.dt, 10, s.hbar) - exact).norm();
    const double e2 = (evolve_schrodinger(cs, p1, h, c.dt / 2, 20, s.hbar) - exact).norm();
    r.checks.push_back(lower("integrator_order", "CrankNicolson", std::log2(e1 / e2), tol.at("order_min")));
  }
  return r;
}

inline ExperimentResult gauss_constraint_suite(const ExperimentConfig& c) {
  const ConfigSpace cs(c.lattice);
  const LatticeSpec& s = c.lattice;
  const KernelOperator h = build_hamiltonian_kernel(cs, default_potential(s));
  const ConstraintOperator g = gauss_constraint(cs, c.background);
  const auto probes = random_probes(cs.size(), 3, c.seed);
  CounterRng rng(c.seed ^ 0x5bd1e995ULL);
  std::uniform_real_distribution<double> ud(-1.0, 1.0);
  ExperimentResult r;
  r.configs = cs.size();
  const int V = s.num_sites();
  auto rand_site = [&] {
    RealVec v(V);
    for (auto& x : v) x = ud(rng);
    return v;
  };

  double comm = 0;
  for (int x = 0; x < V; ++x) comm = std::max(comm, commutator_norm(cs, g.at(x), h, probes));
  const double fc = first_class_check(cs, g, rand_site(), rand_site(), probes);

  // Probability invariance and the time-dependent shift under a random commensurate gauge function.
  const ComplexVec raw = build_initial_state(cs, c.initial);
  RealVec xi(V);
  std::uniform_int_distribution<int> ui(-2, 2);
  for (auto& x : xi) x = ui(rng) * s.dx * s.dA;
  const auto perm = gauge_permutation(cs, xi);
  const ComplexVec moved = gauge_transform_state(cs, raw, xi);
  double rho_dev = 0;
  for (std::int64_t i = 0; i < cs.size(); ++i) {
    const double a = std::norm(raw[i]), b = std::norm(moved[perm[i]]);
    if (a > 0) rho_dev = std::max(rho_dev, std::abs(a - b) / a);
  }
  const RealVec chi = rand_site(), phi = rand_site();
  const KernelOperator hp = modified_hamiltonian(cs, h, phi, g);
  const auto shift = time_dependent_gauge_shift(
      cs, hp, [&](double t) { return RealVec(xi + std::sin(t) * chi); }, 0.0, probes);

  // Constraint norms of a projected state carrying a 1e-6 unphysical admixture, along H_Phi.
  const Projection proj = project_physical(cs, g, raw);
  ComplexVec psi = proj.psi + 1e-6 * raw;
  psi.normalize();
  const double before = constraint_norms(cs, g, psi).maxCoeff();
  r.columns = {{"step", "-", "step number"},
               {"t", "-", "time"},
               {"constraint_norm", "constraint_norms", "max_x ||Gamma_x psi||"},
               {"energy", "KernelOperator::expectation", "<psi|H_Phi|psi>"}};
  CrankNicolson cn(hp, c.dt, s.hbar);
  ComplexVec v = change_basis(cs, psi, Basis::configuration, hp.basis);
  double worst = before;
  r.rows.push_back({0, 0, before, hp.expectation(cs, psi)});
  for (int k = 1; k <= c.steps; ++k) {
    v = cn.step(v);
    const ComplexVec pc = change_basis(cs, v, hp.basis, Basis::configuration);
    const double n = constraint_norms(cs, g, pc).maxCoeff();
    worst = std::max(worst, n);
    r.rows.push_back({double(k), k * c.dt, n, hp.expectation(cs, pc)});
  }

  // Gamma_Phi flow versus the gauge flow of the charge it contains.
  const ComplexVec phys = proj.psi;
  const double fidelity = std::abs(constraint_flow(cs, g, phys, phi, 1.0).dot(charge_flow(cs, phys, phi, 1.0)));

  const auto& tol = c.tolerances;
  r.checks = {upper("probability_invariance", "gauge_transform_state", rho_dev, tol.at("rho_rel")),
              upper("gauss_commutator", "gauss_constraint", comm, tol.at("commutator")),
              upper("first_class", "first_class_check", fc, tol.at("first_class")),
              upper("constraint_growth", "constraint_norms", worst / before, tol.at("growth")),
              upper("gauge_shift_identity", "time_dependent_gauge_shift", shift.identity_residual, tol.at("shift")),
              upper("dirac_fidelity", "constraint_flow", fidelity, 1.0 - tol.at("dirac_gap"))};
  return r;
}

/// Trajectory, Coulomb potential path and Maxwell residuals at one step size.
inline MaxwellResiduals maxwell_run(const ConfigSpace& cs, const KernelOperator& h, const ConstraintOperator& g,
                                    const ComplexVec& psi, double dt, int steps) {
  const auto path = evolve_path(cs, psi, h, dt, steps, cs.spec().hbar);
  std::vector<RealVec> phi;
  for (const auto& p : path) phi.push_back(coulomb_solve(cs.lattice(), charge_density(cs, p)).phi);
  return maxwell_residuals(cs, path, phi, h, g, dt);
}

inline ExperimentResult maxwell_2d(const ExperimentConfig& c) {
  const ConfigSpace cs(c.lattice);
  const LatticeSpec& s = c.lattice;
  if (s.dim < 2) throw InvalidSpec("maxwell-2d needs dim >= 2");
  if (c.steps < 4) throw InvalidSpec("maxwell-2d needs at least 4 steps");
  const KernelOperator h = build_hamiltonian_kernel(cs, PotentialChoice::magnetic());
  const ConstraintOperator g = gauss_constraint(cs, c.background);
  const ComplexVec psi = project_physical(cs, g, build_initial_state(cs, c.initial)).psi;
  const MaxwellResiduals coarse = maxwell_run(cs, h, g, psi, c.dt, c.steps);
  const MaxwellResiduals fine = maxwell_run(cs, h, g, psi, c.dt / 2, 2 * c.steps);
  ExperimentResult r;
  r.configs = cs.size();
  r.columns = {{"step", "-", "interior step k of the coarse trajectory"},
               {"t", "-", "time"},
               {"potential", "maxwell_residuals", "||d_t A + c(E + grad Phi)||"},
               {"faraday", "maxwell_residuals", "||curl E + (1/c) d_t B||"},
               {"ampere", "maxwell_residuals", "||d_t E - c curl B + J||"},
               {"gauss", "maxwell_residuals", "||div E - rho||"},
               {"estimate_potential", "maxwell_residuals", "predicted size of the potential residual"},
               {"estimate_faraday", "maxwell_residuals", "predicted size of the Faraday residual"},
               {"estimate_ampere", "maxwell_residuals", "predicted size of the Ampere residual"}};
  const int n = static_cast<int>(coarse.faraday.size());
  double ratio = 0;
  for (int k = 0; k < n; ++k) {
    r.rows.push_back({double(k + 1), (k + 1) * c.dt, coarse.ampere_potential[k], coarse.faraday[k],
                      coarse.ampere_maxwell[k], coarse.gauss[k + 1], coarse.estimate_potential[k],
                      coarse.estimate_faraday[k], coarse.estimate_ampere[k]});
    auto q = [](double a, double b) { return b > 0 ? a / b : (a > 0 ? INFINITY : 0.0); };
    ratio = std::max({ratio, q(coarse.ampere_potential[k], coarse.estimate_potential[k]),
                      q(coarse.faraday[k], coarse.estimate_faraday[k]),
                      q(coarse.ampere_maxwell[k], coarse.estimate_ampere[k])});
  }
  // Time-discretization parts at matching times (fine index 2k+1 is coarse index k).
  auto order = [&](const RealVec& a, const RealVec& b) {
    double ea = 0, eb = 0;
    for (int k = 0; k < n; ++k) {
      ea = std::max(ea, a[k]);
      eb = std::max(eb, b[2 * k + 1]);
    }
    return std::log2(ea / eb);
  };
  const auto& tol = c.tolerances;
  r.checks = {upper("residual_over_estimate", "maxwell_residuals", ratio, tol.at("estimate_factor")),
              upper("gauss_law", "maxwell_residuals", coarse.gauss.maxCoeff(), tol.at("gauss")),
              lower("order_potential", "maxwell_residuals", order(coarse.time_potential, fine.time_potential), tol.at("order_min")),
              lower("order_faraday", "maxwell_residuals", order(coarse.time_faraday, fine.time_faraday), tol.at("order_min")),
              lower("order_ampere", "maxwell_residuals", order(coarse.time_ampere, fine.time_ampere), tol.at("order_min"))};
  return r;
}

/**
 * Potential of a unit point charge in a periodic cube of side L with a
 * uniform neutralizing background (zero mean), by Ewald summation.
 */
inline double periodic_continuum_green(double L, const std::array<double, 3>& r) {
  const double a = 5.0 / L, pi = std::numbers::pi;
  double sum = 0;
  for (int i = -3; i <= 3; ++i)
    for (int j = -3; j <= 3; ++j)
      for (int k = -3; k <= 3; ++k) {
        const double d = std::hypot(r[0] + i * L, r[1] + j * L, r[2] + k * L);
        if (d > 0) sum += std::erfc(a * d) / (4 * pi * d);
      }
  const double kk = 2 * pi / L;
  for (int i = -8; i <= 8; ++i)
    for (int j = -8; j <= 8; ++j)
      for (int k = -8; k <= 8; ++k) {
        if (i == 0 && j == 0 && k == 0) continue;
        const double k2 = kk * kk * (i * i + j * j + k * k);
        sum += std::exp(-k2 / (4 * a * a)) / k2 * std::cos(kk * (i * r[0] + j * r[1] + k * r[2])) / (L * L * L);
      }
  return sum - 1 / (4 * a * a * L * L * L);
}

inline ExperimentResult coulomb(const ExperimentConfig& c) {
  const LatticeSpec& s = c.lattice;
  const SiteLattice lat(s);
  const int V = lat.volume();
  if (V > 4096) throw CapacityError(V, 4096);
  ExperimentResult r;
  r.configs = 0;
  // Dense pinned -Laplacian as reference.
  Eigen::MatrixXd m = Eigen::MatrixXd::Constant(V, V, 1.0 / V);
  const double w = 1.0 / (lat.dx() * lat.dx());
  for (int x = 0; x < V; ++x)
    for (int a = 0; a < lat.dim(); ++a) {
      m(x, x) += 2 * w;
      m(x, lat.shift(x, a, 1)) -= w;
      m(x, lat.shift(x, a, -1)) -= w;
    }
  const auto lu = m.partialPivLu();
  RealVec point = RealVec::Zero(V);
  point[0] = 1.0 / lat.cell();
  const RealVec green = lattice_green(lat);
  const RealVec ref = lu.solve(RealVec(point.array() - point.mean()));
  const double green_err = (green - ref).cwiseAbs().maxCoeff();

  // Continuum comparison along an axis (3D): deviation from the periodic continuum potential, relative to 1/(4 pi r).
  const double L = s.sites * s.dx;
  r.columns = {{"r", "-", "separation along axis 0"},
               {"lattice", "lattice_green", "G(r)"},
               {"coulomb", "-", "1/(4 pi r)"},
               {"continuum", "periodic_continuum_green", "periodic continuum potential with neutralizing background"},
               {"deviation", "lattice_green", "|G(r) - continuum| 4 pi r"}};
  double cont_dev = 0;
  for (int k = 1; 2 * k <= s.sites; ++k) {
    const double rr = k * s.dx;
    const double g = green[lat.site({k, 0, 0})];
    const double cont = s.dim == 3 ? periodic_continuum_green(L, {rr, 0, 0}) : NAN;
    const double dev = std::abs(g - cont) * 4 * std::numbers::pi * rr;
    r.rows.push_back({rr, g, 1 / (4 * std::numbers::pi * rr), cont, dev});
    // Mid-range: at least two spacings from the source and one from the farthest image.
    if (s.dim == 3 && k >= 2 && 2 * k < s.sites) cont_dev = std::max(cont_dev, dev);
  }

  // Pair energies against Green's-function superposition.
  CounterRng rng(c.seed);
  std::uniform_int_distribution<int> site(0, V - 1);
  std::normal_distribution<double> nd;
  double pair_err = 0;
  for (int t = 0; t < std::min(c.steps, 50); ++t) {
    std::vector<PointCharge> q;
    for (int k = 0; k < 3; ++k) q.push_back({site(rng), nd(rng)});
    double e = 0;
    for (int i = 0; i < 3; ++i)
      for (int j = i + 1; j < 3; ++j) e += q[i].q * q[j].q * ref[site_difference(lat, q[i].site, q[j].site)];
    // Coinciding charges add their cross term at zero separation.
    pair_err = std::max(pair_err, std::abs(coulomb_energy(lat, q) - e));
  }
  const auto& tol = c.tolerances;
  r.checks = {upper("green_vs_dense", "lattice_green", green_err, tol.at("green")),
              upper("pair_energy", "coulomb_energy", pair_err, tol.at("pair"))};
  if (s.dim == 3) r.checks.push_back(upper("continuum_relative", "lattice_green", cont_dev, tol.at("continuum")));
  return r;
}

}  // namespace suites

inline const std::vector<ExperimentInfo>& experiment_registry() {
  static const std::vector<ExperimentInfo> reg = [] {
    std::vector<ExperimentInfo> v{
        {"coulomb", "periodic lattice Green's function, continuum limit and pair energies",
         {{"green", 1e-10}, {"continuum", 0.15}, {"pair", 1e-10}}, suites::coulomb, true},
        {"evolution", "unitary implicit-midpoint evolution: norm, energy, charge, linearity, order",
         {{"norm_step", 1e-12}, {"energy_step", 1e-10}, {"charge", 1e-10}, {"linearity", 1e-10}, {"order_min", 1.9}},
         suites::evolution},
        {"gauss-constraint", "gauge covariance, Gauss constraint algebra and preservation",
         {{"rho_rel", 1e-15}, {"commutator", 1e-10}, {"first_class", 1e-10}, {"growth", 10.0}, {"shift", 1e-8},
          {"dirac_gap", 1e-6}},
         suites::gauss_constraint_suite},
        {"geometry", "symplectic form, information metric, complex structure and brackets",
         {{"j_squared", 1e-12}, {"omega", 1e-12}, {"metric_min", 1e-300}, {"jacobi", 1e-8}, {"canonical", 1e-10}},
         suites::geometry},
        {"maxent", "sampled step moments and the integral update against the continuity equation",
         {{"moment_z", 5.0}, {"order_rel", 0.2}}, suites::maxent},
        {"maxwell-2d", "Maxwell residuals of expected fields along a physical trajectory",
         {{"estimate_factor", 10.0}, {"gauss", 1e-8}, {"order_min", 1.8}}, suites::maxwell_2d},
    };
    std::sort(v.begin(), v.end(), [](const auto& a, const auto& b) { return a.name < b.name; });
    return v;
  }();
  return reg;
}

inline ExperimentResult run_experiment(const ExperimentConfig& c) {
  const ExperimentInfo* info = find_experiment(c.experiment);
  if (!info) throw InvalidSpec("unknown experiment '" + c.experiment + "'");
  return info->run(c);
}

}  // namespace edqed
