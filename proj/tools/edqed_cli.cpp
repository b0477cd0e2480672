// Batch runner for the experiment suites.
//
//   edqed list
//   edqed validate <config>
//   edqed run <config> [--seed S] [--out DIR]
//
// Exit status: 0 all checks pass, 1 some check failed, 2 config error,
// 3 capacity error, 4 numerical failure. EDQED_THREADS sets the Eigen thread count.

#include <Eigen/Core>

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "CLI11.hpp"
#include "edqed/experiments.hpp"

namespace fs = std::filesystem;
using namespace edqed;

namespace {

constexpr const char* kVersion = "edqed 0.1.0";

int threads_from_env() {
  const char* v = std::getenv("EDQED_THREADS");
  if (!v) return 1;
  const int n = std::atoi(v);
  return n > 0 ? n : 1;
}

std::string utc_now() {
  const std::time_t t = std::time(nullptr);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
  return buf;
}

void write_outputs(const ExperimentConfig& c, const ExperimentResult& r, const fs::path& dir, double seconds) {
  fs::create_directories(dir);
  json cols = json::array();
  for (const auto& col : r.columns) cols.push_back({{"name", col.name}, {"operation", col.op}, {"doc", col.doc}});
  json manifest = {{"version", kVersion},
                   {"experiment", c.experiment},
                   {"config_hash", config_hash(c)},
                   {"lattice_hash", hex64(spec_hash(c.lattice))},
                   {"seed", c.seed},
                   {"configs", r.configs},
                   {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                                 std::to_string(EIGEN_MINOR_VERSION)},
                   {"threads", Eigen::nbThreads()},
                   {"columns", cols},
                   {"config", c.source},
                   {"created", utc_now()}};
  std::ofstream(dir / "manifest.json") << manifest.dump(2) << '\n';

  std::vector<std::string> names;
  for (const auto& col : r.columns) names.push_back(col.name);
  std::ofstream csv(dir / "steps.csv");
  CsvWriter w(csv, names);
  for (const auto& row : r.rows) w.row(row);

  json checks = json::array();
  for (const auto& ch : r.checks)
    checks.push_back({{"name", ch.name},
                      {"operation", ch.op},
                      {"value", ch.value},
                      {"bound", ch.bound},
                      {"kind", ch.upper ? "max" : "min"},
                      {"pass", ch.pass()}});
  json summary = {{"experiment", c.experiment}, {"seed", c.seed},     {"pass", r.passed()},
                  {"checks", checks},           {"seconds", seconds}};
  std::ofstream(dir / "summary.json") << summary.dump(2) << '\n';
}

template <class F>
int guarded(F&& f) {
  try {
    return f();
  } catch (const ParseError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const InvalidSpec& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const CapacityError& e) {
    std::cerr << "capacity error: " << e.what() << '\n';
    return 3;
  } catch (const Error& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return 4;
  }
}

}  // namespace

int main(int argc, char** argv) {
  Eigen::setNbThreads(threads_from_env());
  CLI::App app{"Entropic dynamics QED lattice experiments"};
  app.require_subcommand(1);

  auto* list = app.add_subcommand("list", "list experiments");
  auto* validate = app.add_subcommand("validate", "parse and check a config without running it");
  std::string vpath;
  validate->add_option("config", vpath, "config file")->required();

  auto* run = app.add_subcommand("run", "run an experiment");
  std::string rpath, out;
  std::uint64_t seed = 0;
  run->add_option("config", rpath, "config file")->required();
  auto* seed_opt = run->add_option("--seed", seed, "override the config seed");
  run->add_option("--out", out, "output directory (default: config 'output')");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  if (list->parsed()) {
    for (const auto& e : experiment_registry()) std::cout << e.name << "  " << e.description << '\n';
    return 0;
  }
  if (validate->parsed()) {
    return guarded([&] {
      const ExperimentConfig c = load_config(vpath);
      const auto& reg = experiment_registry();
      const bool lattice_only =
          std::find_if(reg.begin(), reg.end(), [&](const ExperimentInfo& e) { return e.name == c.experiment; })
              ->site_lattice_only;
      if (!lattice_only && c.lattice.config_count() > static_cast<long double>(c.lattice.max_configs))
        throw CapacityError(c.lattice.config_count(), c.lattice.max_configs);
      std::cout << "ok " << c.experiment << " K=" << static_cast<double>(c.lattice.config_count()) << '\n';
      return 0;
    });
  }
  return guarded([&] {
    ExperimentConfig c = load_config(rpath);
    if (seed_opt->count()) {
      c.seed = seed;
      c.source["seed"] = seed;
    }
    const fs::path dir = out.empty() ? fs::path(c.output) : fs::path(out);
    const auto t0 = std::chrono::steady_clock::now();
    const ExperimentResult r = run_experiment(c);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    write_outputs(c, r, dir, secs);
    for (const auto& ch : r.checks)
      std::cout << (ch.pass() ? "PASS " : "FAIL ") << ch.name << " = " << ch.value << (ch.upper ? " <= " : " >= ")
                << ch.bound << '\n';
    std::cout << c.experiment << ": " << (r.passed() ? "pass" : "fail") << " (" << secs << " s) -> " << dir.string()
              << '\n';
    return r.passed() ? 0 : 1;
  });
}
