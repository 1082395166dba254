// flock: command-line front end for the Cucker-Smale / reduced-PDE laboratory.
//
// Subcommands: particles, pde1d, pdend, spde, hydro, compare, sweep, bench,
// stats. Exit codes: 0 success, 2 config error, 3 numerical failure
// (CFL/vacuum), 4 I/O error.

#include <CLI11.hpp>
#include <iostream>

#include "flocklab/config.hpp"
#include "flocklab/harness.hpp"
#include "flocklab/runners.hpp"

using namespace flocklab;

namespace {

struct GlobalArgs {
  std::string config_path;
  std::string out_dir;
  bool out_set = false;
  std::uint64_t seed = 0;
  bool seed_set = false;
  int threads = 0;
};

ScenarioConfig effective_config(const GlobalArgs& g,
                                const std::string& default_out) {
  ScenarioConfig cfg =
      g.config_path.empty() ? ScenarioConfig{} : load_config(g.config_path);
  if (g.seed_set) cfg.seed = g.seed;
  if (g.threads > 0) cfg.threads = g.threads;
  if (g.out_set)
    cfg.out = g.out_dir;
  else if (cfg.out.empty())
    cfg.out = default_out;
  cfg.validate();
  return cfg;
}

void add_globals(CLI::App* cmd, GlobalArgs& g) {
  cmd->add_option("--config", g.config_path, "scenario config (JSON)");
  cmd->add_option("--out", g.out_dir, "output directory")
      ->each([&](const std::string&) { g.out_set = true; });
  cmd->add_option("--seed", g.seed, "master seed")
      ->each([&](const std::string&) { g.seed_set = true; });
  cmd->add_option("--threads", g.threads, "worker threads");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Cucker-Smale particle system and reduced inertial PDE lab"};
  app.require_subcommand(1);

  GlobalArgs g;
  std::string axis_name = "velocity_spread";
  std::vector<double> axis_values;
  std::vector<int> bench_n{100, 215, 464, 1000, 2154, 4642, 10000};
  int bench_reps = 1000;

  CLI::App* cmd_particles =
      app.add_subcommand("particles", "integrate the particle system");
  CLI::App* cmd_pde1d = app.add_subcommand("pde1d", "1d reduced PDE run");
  CLI::App* cmd_pdend =
      app.add_subcommand("pdend", "d > 1 reduced PDE run (regularised)");
  CLI::App* cmd_spde = app.add_subcommand("spde", "1d reduced SPDE run");
  CLI::App* cmd_hydro = app.add_subcommand("hydro", "hydrodynamic model run");
  CLI::App* cmd_compare =
      app.add_subcommand("compare", "PDE vs particles error report");
  CLI::App* cmd_sweep = app.add_subcommand("sweep", "parameter sweep");
  CLI::App* cmd_bench = app.add_subcommand("bench", "per-step cost benchmark");
  CLI::App* cmd_stats =
      app.add_subcommand("stats", "SPDE vs stochastic-particle statistics");

  for (CLI::App* c :
       {cmd_particles, cmd_pde1d, cmd_pdend, cmd_spde, cmd_hydro, cmd_compare,
        cmd_sweep, cmd_bench, cmd_stats})
    add_globals(c, g);

  cmd_sweep->add_option("--axis", axis_name,
                        "velocity_spread | epsilon | von_mises_k | sigma | N");
  cmd_sweep->add_option("--values", axis_values, "sweep values")->delimiter(',');
  cmd_bench->add_option("--n-values", bench_n, "particle counts")->delimiter(',');
  cmd_bench->add_option("--repetitions", bench_reps, "timer repetitions");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (cmd_particles->parsed()) {
      run_particles(effective_config(g, "out/particles"));
    } else if (cmd_pde1d->parsed()) {
      run_pde1d(effective_config(g, "out/pde1d"), /*stochastic=*/false);
    } else if (cmd_pdend->parsed()) {
      run_pdend(effective_config(g, "out/pdend"));
    } else if (cmd_spde->parsed()) {
      run_pde1d(effective_config(g, "out/spde"), /*stochastic=*/true);
    } else if (cmd_hydro->parsed()) {
      run_hydro(effective_config(g, "out/hydro"));
    } else if (cmd_compare->parsed()) {
      ScenarioConfig cfg = effective_config(g, "out/compare");
      ErrorReport rep = run_compare(cfg);
      write_report(rep, cfg.out);
    } else if (cmd_sweep->parsed()) {
      ScenarioConfig cfg = effective_config(g, "out/sweep");
      const SweepAxis axis = parse_axis(axis_name);
      auto points = run_sweep(cfg, axis, axis_values);
      write_sweep(points, axis_name, cfg.out, config_echo(cfg));
    } else if (cmd_bench->parsed()) {
      ScenarioConfig cfg = effective_config(g, "out/bench");
      cfg.threads = 1;  // wall-clock timings are single-threaded
      BenchResult bench = run_benchmark(cfg, bench_n, bench_reps);
      write_bench(bench, cfg.out, config_echo(cfg));
    } else if (cmd_stats->parsed()) {
      run_stats(effective_config(g, "out/stats"));
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const NumericError& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return 3;
  } catch (const IoError& e) {
    std::cerr << "i/o error: " << e.what() << '\n';
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
