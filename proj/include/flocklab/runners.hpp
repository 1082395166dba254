#pragma once

// File-emitting scenario runners behind the CLI subcommands. Every runner
// echoes its config into meta.json; CSV layouts are fixed per subcommand.

#include "flocklab/harness.hpp"

namespace flocklab {

namespace detail {

inline std::vector<double> sample_times(const ScenarioConfig& cfg) {
  std::vector<double> t(cfg.n_samples);
  for (int s = 0; s < cfg.n_samples; ++s)
    t[s] = cfg.t_end * s / (cfg.n_samples - 1);
  return t;
}

inline void advance_nd(SolverNd& pde, double t0, double t1) {
  double left = t1 - t0;
  while (left > 1e-14) {
    const double cap = pde.suggested_dt();
    const int steps = std::max(1, (int)std::ceil(left / cap - 1e-12));
    const double dt = left / steps;
    pde.step(dt);
    left -= dt;
  }
}

inline void write_kernel_csv(const std::filesystem::path& path,
                             const GridSpec& grid, const Field& table) {
  if (grid.dim() != 1) return;
  CsvFile csv(path, {"x", "a"});
  for (int n = 0; n < grid.M; ++n) csv.row_num({grid.coord(n), table[n]});
}

}  // namespace detail

// ---------------------------------------------------------------------------
// particles: one trajectory, CSV export t, particle_id, x_1.., v_1..

struct ParticlesRunResult {
  double momentum_drift = 0.0;
  double final_spread = 0.0;
  FlockingFit fit;
  double max_pair_distance = 0.0;
};

inline ParticlesRunResult run_particles(const ScenarioConfig& cfg) {
  PreparedScenario prep = prepare(cfg);
  ParticleEnsemble ens = sample_initial(cfg, 0);
  const auto vb0 = mean_velocity(ens);
  const auto times = detail::sample_times(cfg);

  Rng noise(child_seed(cfg.seed, RngStream::particle_noise, 0));
  const double vbar0 = vb0[0];

  std::vector<ParticleEnsemble> snaps;
  std::vector<double> spreads;
  double dmax = 0.0;
  snaps.push_back(ens);
  for (std::size_t s = 1; s < times.size(); ++s) {
    const double t0 = times[s - 1], t1 = times[s];
    if (cfg.sigma > 0.0) {
      if (cfg.d != 1)
        throw ConfigError("particles: stochastic runs are d = 1 only");
      const int steps = std::max(1, (int)std::ceil((t1 - t0) / cfg.dt - 1e-12));
      const double dt = (t1 - t0) / steps;
      for (int q = 0; q < steps; ++q)
        step_cs_stochastic(ens, prep.kernel, cfg.sigma, dt,
                           std::sqrt(dt) * noise.normal(), vbar0);
    } else {
      advance_particles(ens, prep.kernel, t0, t1, cfg.dt);
    }
    snaps.push_back(ens);
  }
  for (const auto& snap : snaps) {
    spreads.push_back(velocity_spread(snap));
    dmax = std::max(dmax, max_pairwise_distance(snap));
  }

  ParticlesRunResult res;
  res.final_spread = spreads.back();
  res.max_pair_distance = dmax;
  if (times.size() >= 10) res.fit = flocking_rate_fit(times, spreads);
  const auto vb1 = mean_velocity(snaps.back());
  double dm = 0.0, m0 = 0.0;
  for (int k = 0; k < cfg.d; ++k) {
    dm += (vb1[k] - vb0[k]) * (vb1[k] - vb0[k]);
    m0 += vb0[k] * vb0[k];
  }
  res.momentum_drift = std::sqrt(dm) / std::max(std::sqrt(m0), 1e-12);

  if (!cfg.out.empty()) {
    const std::filesystem::path dir(cfg.out);
    std::vector<std::string> header{"t", "particle_id"};
    for (int k = 1; k <= cfg.d; ++k) header.push_back("x_" + std::to_string(k));
    for (int k = 1; k <= cfg.d; ++k) header.push_back("v_" + std::to_string(k));
    CsvFile traj(dir / "trajectory.csv", header);
    for (std::size_t s = 0; s < times.size(); ++s)
      for (int i = 0; i < snaps[s].N; ++i) {
        std::vector<double> row{times[s], (double)i};
        for (int k = 0; k < cfg.d; ++k) row.push_back(snaps[s].position(i)[k]);
        for (int k = 0; k < cfg.d; ++k) row.push_back(snaps[s].velocity(i)[k]);
        traj.row_num(row);
      }
    CsvFile series(dir / "series.csv", {"t", "velocity_spread"});
    for (std::size_t s = 0; s < times.size(); ++s)
      series.row_num({times[s], spreads[s]});
    nlohmann::json meta{{"config", config_echo(cfg)},
                        {"momentum_drift", res.momentum_drift},
                        {"final_spread", res.final_spread},
                        {"max_pairwise_distance", res.max_pair_distance},
                        {"fitted_spread_exponent", res.fit.exponent},
                        {"fit_degenerate", res.fit.degenerate},
                        {"seed_rule",
                         "child = mix(mix(master ^ stream_const) + index_const)"}};
    write_json(dir / "meta.json", meta);
  }
  return res;
}

// ---------------------------------------------------------------------------
// pde1d / spde: 1d reduced model from a smoothed sampled ensemble

struct Pde1dRunResult {
  double mass_drift = 0.0;
  double momentum_drift = 0.0;
  double final_gap = 0.0;
  double initial_gap = 0.0;
  FlockingFit gap_fit;
  std::vector<double> times;
  std::vector<double> gaps;
};

inline Pde1dRunResult run_pde1d(const ScenarioConfig& cfg, bool stochastic) {
  if (cfg.d != 1) throw ConfigError("pde1d/spde: d must be 1");
  PreparedScenario prep = prepare(cfg);
  ParticleEnsemble ens = sample_initial(cfg, 0);
  const double vbar = mean_velocity(ens)[0];
  FieldPair init = empirical_density(ens, cfg.epsilon, prep.grid);

  Solver1DOptions opts{cfg.cfl, prep.split.C_a, cfg.dealias};
  Solver1D pde(prep.grid, prep.kernel_table, vbar, init,
               make_weight(cfg, ens, vbar, prep.grid), opts);
  Rng noise(child_seed(cfg.seed, RngStream::field_noise, 0));

  const auto times = detail::sample_times(cfg);
  const double mass0 = pde.mass();
  const double mom0 = pde.momentum();

  Pde1dRunResult res;
  res.times = times;
  res.initial_gap = pde.flocking_gap();

  std::vector<FieldPair> snaps;
  snaps.push_back(pde.fields());
  res.gaps.push_back(pde.flocking_gap());
  for (std::size_t s = 1; s < times.size(); ++s) {
    const double t0 = times[s - 1], t1 = times[s];
    if (stochastic) {
      const double cap = std::min(cfg.dt, pde.max_dt_spde());
      const int steps = std::max(1, (int)std::ceil((t1 - t0) / cap - 1e-12));
      const double dt = (t1 - t0) / steps;
      for (int q = 0; q < steps; ++q)
        pde.step_spde(cfg.sigma, dt, std::sqrt(dt) * noise.normal());
    } else {
      const int steps =
          std::max(1, (int)std::ceil((t1 - t0) / pde.max_dt() - 1e-12));
      const double dt = (t1 - t0) / steps;
      for (int q = 0; q < steps; ++q) pde.step(dt);
    }
    snaps.push_back(pde.fields());
    res.gaps.push_back(pde.flocking_gap());
    res.mass_drift =
        std::max(res.mass_drift, detail::rel_drift(pde.mass(), mass0));
    res.momentum_drift =
        std::max(res.momentum_drift, detail::rel_drift(pde.momentum(), mom0));
  }
  res.final_gap = res.gaps.back();
  if (times.size() >= 10) res.gap_fit = flocking_rate_fit(times, res.gaps);

  if (!cfg.out.empty()) {
    const std::filesystem::path dir(cfg.out);
    CsvFile fields(dir / "fields.csv", {"t", "x", "rho", "j"});
    for (std::size_t s = 0; s < times.size(); ++s)
      for (int n = 0; n < prep.grid.M; ++n)
        fields.row_num({times[s], prep.grid.coord(n), snaps[s].rho[n],
                        snaps[s].j[0][n]});
    CsvFile series(dir / "series.csv", {"t", "mass", "momentum", "gap"});
    for (std::size_t s = 0; s < times.size(); ++s)
      series.row_num({times[s], field_integral(prep.grid, snaps[s].rho),
                      field_integral(prep.grid, snaps[s].j[0]), res.gaps[s]});
    detail::write_kernel_csv(dir / "kernel.csv", prep.grid, prep.kernel_table);
    nlohmann::json meta{{"config", config_echo(cfg)},
                        {"vbar", vbar},
                        {"mass_drift", res.mass_drift},
                        {"momentum_drift", res.momentum_drift},
                        {"initial_gap", res.initial_gap},
                        {"final_gap", res.final_gap},
                        {"fitted_gap_exponent", res.gap_fit.exponent},
                        {"fit_degenerate", res.gap_fit.degenerate},
                        {"kernel_split_C_a", prep.split.C_a},
                        {"kernel_split_theta", prep.split.theta}};
    write_json(dir / "meta.json", meta);
  }
  return res;
}

// ---------------------------------------------------------------------------
// pdend: regularised d > 1 model

struct PdendRunResult {
  double mass_drift = 0.0;
  double momentum_drift = 0.0;
  double initial_gap = 0.0;
  double final_gap = 0.0;
  double max_rho_norm = 0.0;      // max over samples of |rho|_L2
  double initial_rho_norm = 0.0;
  double max_phi = 0.0;           // peak cutoff activation seen
  std::vector<double> times;
  std::vector<double> gaps;
  double reg_v_used = 0.0;
};

inline PdendRunResult run_pdend(const ScenarioConfig& cfg) {
  if (cfg.d < 2) throw ConfigError("pdend: d must be >= 2");
  PreparedScenario prep = prepare(cfg);
  ParticleEnsemble ens = sample_initial(cfg, 0);
  const auto vbar = mean_velocity(ens);
  FieldPair init = empirical_density(ens, cfg.epsilon, prep.grid);

  RegularizationConfig reg;
  reg.W = cfg.reg_w;
  reg.hat_radius = cfg.reg_radius;
  if (cfg.reg_v) {
    reg.V = *cfg.reg_v;
  } else {
    SolverNd probe(prep.grid, prep.kernel_table, vbar, init,
                   RegularizationConfig{0.0, 0.0, cfg.reg_radius}, cfg.cfl);
    reg.V = default_reg_threshold(probe);
  }
  SolverNd pde(prep.grid, prep.kernel_table, vbar, init, reg, cfg.cfl);

  const auto times = detail::sample_times(cfg);
  const double mass0 = pde.mass();
  const auto mom0 = pde.momentum();

  PdendRunResult res;
  res.times = times;
  res.reg_v_used = reg.V;
  res.initial_gap = pde.flocking_gap();
  res.initial_rho_norm = norm_L2(prep.grid, pde.rho());
  res.max_rho_norm = res.initial_rho_norm;

  FieldPair first = pde.fields();
  res.gaps.push_back(res.initial_gap);
  for (std::size_t s = 1; s < times.size(); ++s) {
    detail::advance_nd(pde, times[s - 1], times[s]);
    res.gaps.push_back(pde.flocking_gap());
    res.max_rho_norm = std::max(res.max_rho_norm, norm_L2(prep.grid, pde.rho()));
    res.max_phi = std::max(res.max_phi, pde.max_phi());
    res.mass_drift =
        std::max(res.mass_drift, detail::rel_drift(pde.mass(), mass0));
    const auto mom = pde.momentum();
    for (int k = 0; k < cfg.d; ++k)
      res.momentum_drift =
          std::max(res.momentum_drift, detail::rel_drift(mom[k], mom0[k]));
  }
  res.final_gap = res.gaps.back();

  if (!cfg.out.empty()) {
    const std::filesystem::path dir(cfg.out);
    std::vector<std::string> header{"t"};
    for (int k = 1; k <= cfg.d; ++k) header.push_back("x_" + std::to_string(k));
    header.push_back("rho");
    for (int k = 1; k <= cfg.d; ++k) header.push_back("j_" + std::to_string(k));
    CsvFile fields(dir / "fields.csv", header);
    auto dump = [&](double t, const FieldPair& fp) {
      for (std::size_t flat = 0; flat < fp.rho.size(); ++flat) {
        std::vector<double> row{t};
        std::size_t rem = flat;
        std::vector<double> xs(cfg.d);
        for (int a = cfg.d - 1; a >= 0; --a) {
          xs[a] = prep.grid.coord(static_cast<int>(rem % prep.grid.M));
          rem /= prep.grid.M;
        }
        for (int a = 0; a < cfg.d; ++a) row.push_back(xs[a]);
        row.push_back(fp.rho[flat]);
        for (int m = 0; m < cfg.d; ++m) row.push_back(fp.j[m][flat]);
        fields.row_num(row);
      }
    };
    dump(0.0, first);
    dump(cfg.t_end, pde.fields());

    Field phi = pde.cell_norms(pde.rho(), pde.j());
    for (double& y : phi)
      y = cutoff_phi(y, reg.V, reg.W, prep.grid.h(), cfg.d);
    CsvFile act(dir / "activation.csv", {"cell_index", "phi"});
    for (std::size_t c = 0; c < phi.size(); ++c)
      act.row_num({(double)c, phi[c]});

    CsvFile series(dir / "series.csv", {"t", "gap"});
    for (std::size_t s = 0; s < times.size(); ++s)
      series.row_num({times[s], res.gaps[s]});
    nlohmann::json meta{{"config", config_echo(cfg)},
                        {"reg_v_used", reg.V},
                        {"mass_drift", res.mass_drift},
                        {"momentum_drift", res.momentum_drift},
                        {"initial_gap", res.initial_gap},
                        {"final_gap", res.final_gap},
                        {"max_rho_norm", res.max_rho_norm},
                        {"max_phi", res.max_phi}};
    write_json(dir / "meta.json", meta);
  }
  return res;
}

// ---------------------------------------------------------------------------
// hydro: mono-kinetic reference model; for d = 1 also runs the reduced model
// from the same initial data and emits the model discrepancy series.

struct HydroRunResult {
  double mass_drift = 0.0;
  double momentum_drift = 0.0;
  std::vector<double> times;
  std::vector<double> discrepancy;  // vs reduced model, d = 1 only
};

inline HydroRunResult run_hydro(const ScenarioConfig& cfg) {
  PreparedScenario prep = prepare(cfg);
  ParticleEnsemble ens = sample_initial(cfg, 0);
  const auto vbar = mean_velocity(ens);
  FieldPair init = empirical_density(ens, cfg.epsilon, prep.grid);

  HydroSolver hydro(prep.grid, prep.kernel_table, init.rho, init.j,
                    cfg.rho_floor ? *cfg.rho_floor : -1.0, cfg.cfl);
  std::unique_ptr<Solver1D> reduced;
  if (cfg.d == 1)
    reduced = std::make_unique<Solver1D>(
        prep.grid, prep.kernel_table, vbar[0], init,
        std::optional<WeightField>{},
        Solver1DOptions{cfg.cfl, prep.split.C_a, cfg.dealias});

  const auto times = detail::sample_times(cfg);
  const double mass0 = hydro.mass();
  const auto mom0 = hydro.momentum();

  HydroRunResult res;
  res.times = times;

  std::vector<FieldPair> hydro_snaps, reduced_snaps;
  auto snap_hydro = [&] {
    FieldPair fp(prep.grid);
    fp.rho = hydro.rho();
    fp.j = hydro.ru();
    hydro_snaps.push_back(fp);
  };
  snap_hydro();
  if (reduced) reduced_snaps.push_back(reduced->fields());

  for (std::size_t s = 1; s < times.size(); ++s) {
    double left = times[s] - times[s - 1];
    while (left > 1e-14) {
      const double cap = hydro.max_dt();
      const int steps = std::max(1, (int)std::ceil(left / cap - 1e-12));
      const double dt = left / steps;
      hydro.step(dt);
      left -= dt;
    }
    if (reduced) {
      const double t0 = times[s - 1], t1 = times[s];
      const int steps =
          std::max(1, (int)std::ceil((t1 - t0) / reduced->max_dt() - 1e-12));
      const double dt = (t1 - t0) / steps;
      for (int q = 0; q < steps; ++q) reduced->step(dt);
      reduced_snaps.push_back(reduced->fields());
    }
    snap_hydro();
    res.mass_drift =
        std::max(res.mass_drift, detail::rel_drift(hydro.mass(), mass0));
    const auto mom = hydro.momentum();
    for (int k = 0; k < cfg.d; ++k)
      res.momentum_drift =
          std::max(res.momentum_drift, detail::rel_drift(mom[k], mom0[k]));
  }
  if (reduced)
    res.discrepancy = model_discrepancy(prep.grid, times, hydro_snaps, times,
                                        reduced_snaps);

  if (!cfg.out.empty()) {
    const std::filesystem::path dir(cfg.out);
    std::vector<std::string> header{"t"};
    for (int k = 1; k <= cfg.d; ++k) header.push_back("x_" + std::to_string(k));
    header.push_back("rho");
    for (int k = 1; k <= cfg.d; ++k)
      header.push_back("ru_" + std::to_string(k));
    CsvFile fields(dir / "fields.csv", header);
    const bool all_samples = cfg.d == 1;
    for (std::size_t s = 0; s < times.size(); ++s) {
      if (!all_samples && s != 0 && s + 1 != times.size()) continue;
      const auto& fp = hydro_snaps[s];
      for (std::size_t flat = 0; flat < fp.rho.size(); ++flat) {
        std::vector<double> row{times[s]};
        std::size_t rem = flat;
        std::vector<double> xs(cfg.d);
        for (int a = cfg.d - 1; a >= 0; --a) {
          xs[a] = prep.grid.coord(static_cast<int>(rem % prep.grid.M));
          rem /= prep.grid.M;
        }
        for (int a = 0; a < cfg.d; ++a) row.push_back(xs[a]);
        row.push_back(fp.rho[flat]);
        for (int m = 0; m < cfg.d; ++m) row.push_back(fp.j[m][flat]);
        fields.row_num(row);
      }
    }
    if (reduced) {
      CsvFile disc(dir / "discrepancy.csv", {"t", "l2_distance"});
      for (std::size_t s = 0; s < times.size(); ++s)
        disc.row_num({times[s], res.discrepancy[s]});
    }
    nlohmann::json meta{{"config", config_echo(cfg)},
                        {"mass_drift", res.mass_drift},
                        {"momentum_drift", res.momentum_drift}};
    write_json(dir / "meta.json", meta);
  }
  return res;
}

// ---------------------------------------------------------------------------
// stats: ensemble mean/variance of stochastic particles vs SPDE (d = 1)

struct StatsRunResult {
  FieldStats particles;
  FieldStats spde;
  double rho_consistent_fraction = 0.0;  // |mean diff| <= 3 SE
  double j_consistent_fraction = 0.0;
};

inline StatsRunResult run_stats(const ScenarioConfig& cfg) {
  if (cfg.d != 1) throw ConfigError("stats: stated for d = 1");
  if (!(cfg.sigma > 0.0)) throw ConfigError("stats: requires sigma > 0");
  if (cfg.realizations < 2) throw ConfigError("stats: realizations >= 2");
  PreparedScenario prep = prepare(cfg);

  // deterministic initial data: one fixed ensemble for every realization
  ParticleEnsemble ens0 = sample_initial(cfg, 0);
  const double vbar = mean_velocity(ens0)[0];
  FieldPair init = empirical_density(ens0, cfg.epsilon, prep.grid);

  const int R = cfg.realizations;
  std::vector<FieldPair> part_fields(R), spde_fields(R);
  parallel_for(R, cfg.threads, [&](int ri) {
    // stochastic particles
    {
      ParticleEnsemble ens = ens0;
      Rng noise(child_seed(cfg.seed, RngStream::particle_noise, ri));
      const int steps = std::max(1, (int)std::ceil(cfg.t_end / cfg.dt - 1e-12));
      const double dt = cfg.t_end / steps;
      for (int q = 0; q < steps; ++q)
        step_cs_stochastic(ens, prep.kernel, cfg.sigma, dt,
                           std::sqrt(dt) * noise.normal(), vbar);
      part_fields[ri] = empirical_density(ens, cfg.epsilon, prep.grid);
    }
    // reduced SPDE
    {
      Solver1D pde(prep.grid, prep.kernel_table, vbar, init, {},
                   Solver1DOptions{cfg.cfl, prep.split.C_a, cfg.dealias});
      Rng noise(child_seed(cfg.seed, RngStream::field_noise, ri));
      const double cap = std::min(cfg.dt, pde.max_dt_spde());
      const int steps = std::max(1, (int)std::ceil(cfg.t_end / cap - 1e-12));
      const double dt = cfg.t_end / steps;
      for (int q = 0; q < steps; ++q)
        pde.step_spde(cfg.sigma, dt, std::sqrt(dt) * noise.normal());
      spde_fields[ri] = pde.fields();
    }
  });

  StatsRunResult res;
  res.particles = ensemble_stats(part_fields);
  res.spde = ensemble_stats(spde_fields);

  auto consistent_fraction = [&](const Field& mean_a, const Field& var_a,
                                 const Field& mean_b, const Field& var_b) {
    std::size_t ok = 0;
    double scale = 0.0;
    for (std::size_t i = 0; i < mean_a.size(); ++i)
      scale = std::max(scale, std::abs(mean_a[i]));
    for (std::size_t i = 0; i < mean_a.size(); ++i) {
      const double se = std::sqrt(var_a[i] / R + var_b[i] / R);
      if (std::abs(mean_a[i] - mean_b[i]) <= 3.0 * se + 1e-12 * scale) ++ok;
    }
    return static_cast<double>(ok) / mean_a.size();
  };
  res.rho_consistent_fraction =
      consistent_fraction(res.particles.mean.rho, res.particles.variance.rho,
                          res.spde.mean.rho, res.spde.variance.rho);
  res.j_consistent_fraction =
      consistent_fraction(res.particles.mean.j[0], res.particles.variance.j[0],
                          res.spde.mean.j[0], res.spde.variance.j[0]);

  if (!cfg.out.empty()) {
    const std::filesystem::path dir(cfg.out);
    CsvFile csv(dir / "stats.csv",
                {"x", "rho_mean_particles", "rho_var_particles",
                 "rho_mean_spde", "rho_var_spde", "j_mean_particles",
                 "j_var_particles", "j_mean_spde", "j_var_spde"});
    for (int n = 0; n < prep.grid.M; ++n)
      csv.row_num({prep.grid.coord(n), res.particles.mean.rho[n],
                   res.particles.variance.rho[n], res.spde.mean.rho[n],
                   res.spde.variance.rho[n], res.particles.mean.j[0][n],
                   res.particles.variance.j[0][n], res.spde.mean.j[0][n],
                   res.spde.variance.j[0][n]});
    nlohmann::json meta{{"config", config_echo(cfg)},
                        {"rho_consistent_fraction", res.rho_consistent_fraction},
                        {"j_consistent_fraction", res.j_consistent_fraction},
                        {"realizations", R}};
    write_json(dir / "meta.json", meta);
  }
  return res;
}

inline void write_bench(const BenchResult& bench,
                        const std::filesystem::path& dir,
                        const nlohmann::json& echo) {
  CsvFile csv(dir / "bench.csv", {"N", "particle_step_seconds",
                                  "pde_step_seconds", "repetitions"});
  for (const auto& r : bench.records)
    csv.row_num({(double)r.N, r.particle_step_seconds, r.pde_step_seconds,
                 (double)r.repetitions});
  nlohmann::json meta{{"config", echo},
                      {"particle_slope", bench.particle_slope},
                      {"pde_slope", bench.pde_slope},
                      {"crossover_N", bench.crossover_N}};
  write_json(dir / "meta.json", meta);
}

}  // namespace flocklab
