#pragma once

// Experiment orchestration: side-by-side PDE/particle error runs, closing
// residuals, ensemble statistics, step-cost benchmarks and parameter sweeps,
// plus the CSV/JSON emission shared by all CLI subcommands.

#include <atomic>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <memory>
#include <thread>

#include <json.hpp>

#include "flocklab/config.hpp"
#include "flocklab/core.hpp"
#include "flocklab/fields1d.hpp"
#include "flocklab/fieldsnd.hpp"
#include "flocklab/hydro.hpp"
#include "flocklab/kernels.hpp"
#include "flocklab/particles.hpp"
#include "flocklab/rng.hpp"
#include "flocklab/spectral.hpp"

namespace flocklab {

// ---------------------------------------------------------------------------
// small utilities

inline void parallel_for(int n, int threads,
                         const std::function<void(int)>& body) {
  threads = std::max(1, std::min(threads, n));
  if (threads <= 1) {
    for (int i = 0; i < n; ++i) body(i);
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr first_error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  pool.reserve(threads);
  for (int t = 0; t < threads; ++t)
    pool.emplace_back([&] {
      for (;;) {
        const int i = next.fetch_add(1);
        if (i >= n) return;
        try {
          body(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mutex);
          if (!first_error) first_error = std::current_exception();
          return;
        }
      }
    });
  for (auto& th : pool) th.join();
  if (first_error) std::rethrow_exception(first_error);
}

// Locale-free shortest round-trip formatting for CSV cells.
inline std::string csv_num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

class CsvFile {
 public:
  CsvFile(const std::filesystem::path& path,
          const std::vector<std::string>& header) {
    if (!path.parent_path().empty())
      std::filesystem::create_directories(path.parent_path());
    out_.open(path);
    if (!out_) throw IoError("cannot open '" + path.string() + "' for writing");
    write_cells(header);
  }

  void row(const std::vector<std::string>& cells) { write_cells(cells); }

  void row_num(const std::vector<double>& values) {
    std::vector<std::string> cells(values.size());
    for (std::size_t i = 0; i < values.size(); ++i) cells[i] = csv_num(values[i]);
    write_cells(cells);
  }

 private:
  void write_cells(const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) out_ << ',';
      out_ << cells[i];
    }
    out_ << '\n';
    if (!out_) throw IoError("write failure on CSV output");
  }
  std::ofstream out_;
};

inline void write_json(const std::filesystem::path& path,
                       const nlohmann::json& j) {
  if (!path.parent_path().empty())
    std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out << j.dump(2) << '\n';
  if (!out) throw IoError("write failure on '" + path.string() + "'");
}

// ---------------------------------------------------------------------------
// shared scenario plumbing

struct PreparedScenario {
  GridSpec grid;
  Field kernel_table;
  KernelSplit split;
  InteractionKernel kernel;
  bool parametric_kernel = true;
};

inline PreparedScenario prepare(const ScenarioConfig& cfg) {
  PreparedScenario p{cfg.grid(), {}, {}, cfg.kernel(),
                     !cfg.split_kernel_given()};
  p.kernel_table = cfg.kernel_table(p.grid);
  p.split = split_kernel(p.kernel_table, p.grid);
  return p;
}

// Sample the initial ensemble for one realization; warns once per process
// when a mean-velocity component is (near) zero and applies the configured
// Galilean shift if requested.
inline ParticleEnsemble sample_initial(const ScenarioConfig& cfg,
                                       std::uint64_t realization) {
  Rng rng(child_seed(cfg.seed, RngStream::initial_conditions, realization));
  ParticleEnsemble ens = sample_ensemble(cfg.law(), cfg.torus(), cfg.N, rng);
  auto vb = mean_velocity(ens);
  bool near_zero = false;
  for (double c : vb)
    if (std::abs(c) < 1e-9) near_zero = true;
  if (near_zero) {
    static std::atomic<bool> warned{false};
    if (!warned.exchange(true))
      std::cerr << "warning: mean velocity has a (near-)zero component; "
                   "the reduced models exclude vbar = 0. Consider "
                   "galilean_shift.\n";
  }
  if (cfg.galilean_shift != 0.0)
    for (double& v : ens.vel) v += cfg.galilean_shift;
  return ens;
}

inline std::optional<WeightField> make_weight(const ScenarioConfig& cfg,
                                              const ParticleEnsemble& ens,
                                              double vbar,
                                              const GridSpec& grid) {
  const WeightMode mode = cfg.weight_mode_enum();
  if (mode == WeightMode::none) return std::nullopt;
  WeightField w;
  w.mode = mode;
  w.C_a = cfg.effective_weight_rate();
  w.w_min = cfg.w_min;
  w.w_max = cfg.w_max;
  w.w0 = exact_weight(ens, cfg.epsilon, vbar, grid, cfg.effective_rho_min(),
                      cfg.w_min, cfg.w_max);
  return w;
}

// Advance a particle ensemble to the given horizon with step <= dt_max.
inline void advance_particles(ParticleEnsemble& ens,
                              const InteractionKernel& kernel, double from,
                              double to, double dt_max) {
  const int steps = std::max(1, (int)std::ceil((to - from) / dt_max - 1e-12));
  const double dt = (to - from) / steps;
  for (int q = 0; q < steps; ++q) step_cs(ens, kernel, dt);
}

enum class NormKind { L2, Hm2 };

// |N^-1 sum_i (v_i^2 - vbar^2) delta_eps'(x - x_i)| in the selected norm;
// the derivative of the assembled bump field is taken spectrally.
inline double closing_residual(const ParticleEnsemble& ens, double epsilon,
                               const GridSpec& grid, const SpectralPlan& plan,
                               NormKind norm) {
  if (grid.dim() != 1)
    throw ConfigError("closing_residual: stated for d = 1");
  const double vbar = mean_velocity(ens)[0];
  VonMisesMollifier moll(epsilon, grid);
  Field u = make_field(grid);
  const double inv_n = 1.0 / ens.N;
  detail::deposit(
      ens, moll,
      [&](int i) {
        const double v = ens.velocity(i)[0];
        return (v * v - vbar * vbar) * inv_n;
      },
      u);
  Field du = plan.derivative(u, 0);
  return norm == NormKind::L2 ? norm_L2(grid, du) : plan.norm_Hm2(du);
}

// ---------------------------------------------------------------------------
// run_compare: PDE and particles side by side

struct ErrorReport {
  std::vector<double> times;
  std::vector<double> err_l2;           // pair L2 distance
  std::vector<double> err_hm2;          // pair H^-2 distance (d = 1)
  std::vector<double> closing_l2;       // closing residual, L2
  std::vector<double> pde_gap;          // |j - vbar rho|_L2
  std::vector<double> particle_spread;  // (sum |v_i - vbar|^2)^1/2
  double pde_mass_drift = 0.0;          // max relative drift over the run
  double pde_momentum_drift = 0.0;
  double particle_momentum_drift = 0.0;
  double fitted_gap_exponent = 0.0;
  double fitted_spread_exponent = 0.0;
  bool fit_degenerate = false;
  nlohmann::json meta;
};

namespace detail {

struct CompareSeries {
  std::vector<double> err_l2, err_hm2, closing, gap, spread;
  double mass_drift = 0.0, mom_drift = 0.0, part_mom_drift = 0.0;
};

inline double rel_drift(double now, double initial) {
  const double scale = std::max(std::abs(initial), 1e-12);
  return std::abs(now - initial) / scale;
}

// One realization of the deterministic or stochastic comparison (d = 1).
inline CompareSeries compare_once_1d(const ScenarioConfig& cfg,
                                     const PreparedScenario& prep,
                                     const std::vector<double>& times,
                                     std::uint64_t ri) {
  ParticleEnsemble ens = sample_initial(cfg, ri);
  const GridSpec& grid = prep.grid;
  const double vbar = mean_velocity(ens)[0];

  FieldPair init = empirical_density(ens, cfg.epsilon, grid);
  Solver1DOptions opts;
  opts.cfl = cfg.cfl;
  opts.spde_ca = prep.split.C_a;
  opts.dealias = cfg.dealias;
  Solver1D pde(grid, prep.kernel_table, vbar, init,
               make_weight(cfg, ens, vbar, grid), opts);

  const bool stochastic = cfg.sigma > 0.0;
  Rng part_noise(child_seed(cfg.seed, RngStream::particle_noise, ri));
  Rng field_noise(child_seed(cfg.seed, RngStream::field_noise, ri));

  CompareSeries out;
  const auto mom0 = mean_velocity(ens);
  const double mass0 = pde.mass();
  const double momentum0 = pde.momentum();

  for (std::size_t s = 0; s < times.size(); ++s) {
    if (s > 0) {
      const double t0 = times[s - 1], t1 = times[s];
      if (!stochastic) {
        advance_particles(ens, prep.kernel, t0, t1, cfg.dt);
        int steps = std::max(1, (int)std::ceil((t1 - t0) / pde.max_dt() - 1e-12));
        const double dtp = (t1 - t0) / steps;
        for (int q = 0; q < steps; ++q) pde.step(dtp);
      } else if (cfg.couple_noise) {
        // shared time grid and shared Brownian increments
        const double cap = std::min(cfg.dt, pde.max_dt_spde());
        const int steps = std::max(1, (int)std::ceil((t1 - t0) / cap - 1e-12));
        const double dt = (t1 - t0) / steps;
        for (int q = 0; q < steps; ++q) {
          const double dB = std::sqrt(dt) * part_noise.normal();
          step_cs_stochastic(ens, prep.kernel, cfg.sigma, dt, dB, vbar);
          pde.step_spde(cfg.sigma, dt, dB);
        }
      } else {
        {
          const int steps = std::max(1, (int)std::ceil((t1 - t0) / cfg.dt - 1e-12));
          const double dt = (t1 - t0) / steps;
          for (int q = 0; q < steps; ++q)
            step_cs_stochastic(ens, prep.kernel, cfg.sigma, dt,
                               std::sqrt(dt) * part_noise.normal(), vbar);
        }
        {
          const double cap = pde.max_dt_spde();
          const int steps = std::max(1, (int)std::ceil((t1 - t0) / cap - 1e-12));
          const double dt = (t1 - t0) / steps;
          for (int q = 0; q < steps; ++q)
            pde.step_spde(cfg.sigma, dt, std::sqrt(dt) * field_noise.normal());
        }
      }
    }

    FieldPair smoothed = empirical_density(ens, cfg.epsilon, grid);
    Field drho(grid.nodes()), dj(grid.nodes());
    for (std::size_t i = 0; i < drho.size(); ++i) {
      drho[i] = pde.rho()[i] - smoothed.rho[i];
      dj[i] = pde.j()[i] - smoothed.j[0][i];
    }
    const double nr = norm_L2(grid, drho);
    const double nj = norm_L2(grid, dj);
    out.err_l2.push_back(std::sqrt(nr * nr + nj * nj));
    out.err_hm2.push_back(norm_pair_Hm2(pde.plan(), drho, dj, vbar));
    out.closing.push_back(
        closing_residual(ens, cfg.epsilon, grid, pde.plan(), NormKind::L2));
    out.gap.push_back(pde.flocking_gap());
    out.spread.push_back(velocity_spread(ens));

    out.mass_drift = std::max(out.mass_drift, rel_drift(pde.mass(), mass0));
    out.mom_drift =
        std::max(out.mom_drift, rel_drift(pde.momentum(), momentum0));
    const auto mom_now = mean_velocity(ens);
    double dm = 0.0, m0 = 0.0;
    for (int k = 0; k < grid.dim(); ++k) {
      dm += (mom_now[k] - mom0[k]) * (mom_now[k] - mom0[k]);
      m0 += mom0[k] * mom0[k];
    }
    out.part_mom_drift = std::max(
        out.part_mom_drift, std::sqrt(dm) / std::max(std::sqrt(m0), 1e-12));
  }
  return out;
}

// d = 2 variant: L2 errors only; regularisation only when reg_v is given.
inline CompareSeries compare_once_nd(const ScenarioConfig& cfg,
                                     const PreparedScenario& prep,
                                     const std::vector<double>& times,
                                     std::uint64_t ri) {
  ParticleEnsemble ens = sample_initial(cfg, ri);
  const GridSpec& grid = prep.grid;
  const auto vbar = mean_velocity(ens);

  FieldPair init = empirical_density(ens, cfg.epsilon, grid);
  RegularizationConfig reg;
  if (cfg.reg_v) {
    reg.V = *cfg.reg_v;
    reg.W = cfg.reg_w;
    reg.hat_radius = cfg.reg_radius;
  }
  SolverNd pde(grid, prep.kernel_table, vbar, init, reg, cfg.cfl);

  CompareSeries out;
  const auto mom0 = mean_velocity(ens);
  const double mass0 = pde.mass();
  const auto momentum0 = pde.momentum();

  for (std::size_t s = 0; s < times.size(); ++s) {
    if (s > 0) {
      const double t0 = times[s - 1], t1 = times[s];
      advance_particles(ens, prep.kernel, t0, t1, cfg.dt);
      double left = t1 - t0;
      while (left > 1e-14) {
        const double cap = pde.suggested_dt();
        const int steps = std::max(1, (int)std::ceil(left / cap - 1e-12));
        const double dt = left / steps;
        pde.step(dt);
        left -= dt;
      }
    }
    FieldPair smoothed = empirical_density(ens, cfg.epsilon, grid);
    double acc = 0.0;
    Field diff(grid.nodes());
    for (std::size_t i = 0; i < diff.size(); ++i)
      diff[i] = pde.rho()[i] - smoothed.rho[i];
    double n = norm_L2(grid, diff);
    acc += n * n;
    for (int m = 0; m < grid.dim(); ++m) {
      for (std::size_t i = 0; i < diff.size(); ++i)
        diff[i] = pde.j()[m][i] - smoothed.j[m][i];
      n = norm_L2(grid, diff);
      acc += n * n;
    }
    out.err_l2.push_back(std::sqrt(acc));
    out.err_hm2.push_back(std::numeric_limits<double>::quiet_NaN());
    out.closing.push_back(std::numeric_limits<double>::quiet_NaN());
    out.gap.push_back(pde.flocking_gap());
    out.spread.push_back(velocity_spread(ens));

    out.mass_drift = std::max(out.mass_drift, rel_drift(pde.mass(), mass0));
    const auto mom_now = pde.momentum();
    for (int k = 0; k < grid.dim(); ++k)
      out.mom_drift =
          std::max(out.mom_drift, rel_drift(mom_now[k], momentum0[k]));
    const auto pmom = mean_velocity(ens);
    double dm = 0.0, m0 = 0.0;
    for (int k = 0; k < grid.dim(); ++k) {
      dm += (pmom[k] - mom0[k]) * (pmom[k] - mom0[k]);
      m0 += mom0[k] * mom0[k];
    }
    out.part_mom_drift = std::max(
        out.part_mom_drift, std::sqrt(dm) / std::max(std::sqrt(m0), 1e-12));
  }
  return out;
}

}  // namespace detail

inline ErrorReport run_compare(const ScenarioConfig& cfg) {
  if (cfg.d > 2)
    throw ConfigError("run_compare: stated for d in {1, 2}");
  PreparedScenario prep = prepare(cfg);

  std::vector<double> times(cfg.n_samples);
  for (int s = 0; s < cfg.n_samples; ++s)
    times[s] = cfg.t_end * s / (cfg.n_samples - 1);

  const int R = cfg.realizations;
  std::vector<detail::CompareSeries> per(R);
  parallel_for(R, cfg.threads, [&](int ri) {
    per[ri] = cfg.d == 1
                  ? detail::compare_once_1d(cfg, prep, times, ri)
                  : detail::compare_once_nd(cfg, prep, times, ri);
  });

  ErrorReport rep;
  rep.times = times;
  const std::size_t S = times.size();
  rep.err_l2.assign(S, 0.0);
  rep.err_hm2.assign(S, 0.0);
  rep.closing_l2.assign(S, 0.0);
  rep.pde_gap.assign(S, 0.0);
  rep.particle_spread.assign(S, 0.0);
  for (const auto& c : per) {
    for (std::size_t s = 0; s < S; ++s) {
      rep.err_l2[s] += c.err_l2[s] / R;
      rep.err_hm2[s] += c.err_hm2[s] / R;
      rep.closing_l2[s] += c.closing[s] / R;
      rep.pde_gap[s] += c.gap[s] / R;
      rep.particle_spread[s] += c.spread[s] / R;
    }
    rep.pde_mass_drift = std::max(rep.pde_mass_drift, c.mass_drift);
    rep.pde_momentum_drift = std::max(rep.pde_momentum_drift, c.mom_drift);
    rep.particle_momentum_drift =
        std::max(rep.particle_momentum_drift, c.part_mom_drift);
  }

  if (times.size() >= 10) {
    FlockingFit gap_fit = flocking_rate_fit(times, rep.pde_gap);
    FlockingFit spread_fit = flocking_rate_fit(times, rep.particle_spread);
    rep.fitted_gap_exponent = gap_fit.exponent;
    rep.fitted_spread_exponent = spread_fit.exponent;
    rep.fit_degenerate = gap_fit.degenerate || spread_fit.degenerate;
  } else {
    rep.fit_degenerate = true;
  }

  rep.meta = nlohmann::json{
      {"config", config_echo(cfg)},
      {"fitted_gap_exponent", rep.fitted_gap_exponent},
      {"fitted_spread_exponent", rep.fitted_spread_exponent},
      {"fit_degenerate", rep.fit_degenerate},
      {"pde_mass_drift", rep.pde_mass_drift},
      {"pde_momentum_drift", rep.pde_momentum_drift},
      {"particle_momentum_drift", rep.particle_momentum_drift},
      {"err_l2_final", rep.err_l2.back()},
      {"err_hm2_final", rep.err_hm2.back()},
  };
  return rep;
}

inline void write_report(const ErrorReport& rep,
                         const std::filesystem::path& dir) {
  CsvFile csv(dir / "report.csv",
              {"t", "err_l2", "err_hm2", "closing_l2", "pde_gap",
               "particle_spread"});
  for (std::size_t s = 0; s < rep.times.size(); ++s)
    csv.row_num({rep.times[s], rep.err_l2[s], rep.err_hm2[s],
                 rep.closing_l2[s], rep.pde_gap[s], rep.particle_spread[s]});
  write_json(dir / "meta.json", rep.meta);
}

// ---------------------------------------------------------------------------
// ensemble statistics

struct FieldStats {
  FieldPair mean;
  FieldPair variance;  // unbiased
  int realizations = 0;
};

inline FieldStats ensemble_stats(const std::vector<FieldPair>& samples) {
  if (samples.size() < 2)
    throw NumericError("ensemble_stats: need >= 2 realizations");
  const GridSpec grid = samples.front().grid;
  for (const auto& s : samples)
    if (!(s.grid == grid) || s.rho.size() != grid.nodes())
      throw NumericError("ensemble_stats: mismatched shapes");
  const int R = static_cast<int>(samples.size());
  FieldStats st;
  st.mean = FieldPair(grid);
  st.variance = FieldPair(grid);
  st.realizations = R;
  for (const auto& s : samples) {
    for (std::size_t i = 0; i < s.rho.size(); ++i) st.mean.rho[i] += s.rho[i] / R;
    for (int m = 0; m < grid.dim(); ++m)
      for (std::size_t i = 0; i < s.rho.size(); ++i)
        st.mean.j[m][i] += s.j[m][i] / R;
  }
  for (const auto& s : samples) {
    for (std::size_t i = 0; i < s.rho.size(); ++i) {
      const double d = s.rho[i] - st.mean.rho[i];
      st.variance.rho[i] += d * d / (R - 1);
    }
    for (int m = 0; m < grid.dim(); ++m)
      for (std::size_t i = 0; i < s.rho.size(); ++i) {
        const double d = s.j[m][i] - st.mean.j[m][i];
        st.variance.j[m][i] += d * d / (R - 1);
      }
  }
  return st;
}

// ---------------------------------------------------------------------------
// benchmark

struct BenchRecord {
  int N = 0;
  double particle_step_seconds = 0.0;
  double pde_step_seconds = 0.0;
  int repetitions = 0;
};

namespace detail {

struct MedianTime {
  double seconds = 0.0;
  int repetitions = 0;
};

// Median wall time of `timed`; `setup` runs outside the clock. The requested
// repetition count is reduced to fit the wall-clock budget, floor 10.
template <typename S, typename F>
inline MedianTime median_seconds(S&& setup, F&& timed, int target_reps,
                                 double budget_s) {
  using clock = std::chrono::steady_clock;
  setup();
  timed();  // warm-up
  setup();
  const auto t0 = clock::now();
  timed();
  const double est =
      std::chrono::duration<double>(clock::now() - t0).count() + 1e-9;
  const int reps = std::clamp(static_cast<int>(budget_s / est), 10,
                              std::max(10, target_reps));
  std::vector<double> t(reps);
  for (int q = 0; q < reps; ++q) {
    setup();
    const auto a = clock::now();
    timed();
    t[q] = std::chrono::duration<double>(clock::now() - a).count();
  }
  std::sort(t.begin(), t.end());
  return {t[reps / 2], reps};
}

inline Field random_smooth_field(const GridSpec& grid, Rng& rng,
                                 double offset) {
  Field f(grid.nodes(), offset);
  const int modes = 3;
  const double two_pi = 2.0 * SpectralPlan::pi();
  const int d = grid.dim();
  for (int rep = 0; rep < modes; ++rep) {
    std::vector<int> k(d);
    for (int a = 0; a < d; ++a)
      k[a] = 1 + static_cast<int>(rng.uniform01() * 3.0);
    const double amp = 0.2 * rng.uniform(-1.0, 1.0) * offset;
    const double phase = rng.uniform(0.0, two_pi);
    for (std::size_t flat = 0; flat < f.size(); ++flat) {
      std::size_t rem = flat;
      double arg = phase;
      for (int a = d - 1; a >= 0; --a) {
        arg += two_pi * k[a] * static_cast<double>(rem % grid.M) / grid.M;
        rem /= grid.M;
      }
      f[flat] += amp * std::cos(arg);
    }
  }
  return f;
}

}  // namespace detail

struct BenchResult {
  std::vector<BenchRecord> records;
  double particle_slope = 0.0;  // log-log slope vs N
  double pde_slope = 0.0;
  int crossover_N = -1;  // smallest N with particle time >= pde time
};

// Median wall time of one RK4 step (RHS + update) for the particle system
// and the PDE on a fixed grid, over fresh random states. Single-threaded.
inline BenchResult run_benchmark(const ScenarioConfig& cfg,
                                 const std::vector<int>& n_values,
                                 int repetitions = 1000,
                                 double budget_s = 1.5) {
  if (repetitions < 10)
    throw ConfigError("run_benchmark: repetitions must be >= 10");
  PreparedScenario prep = prepare(cfg);
  const GridSpec& grid = prep.grid;
  BenchResult out;

  double area = 1.0;
  for (int k = 0; k < grid.dim(); ++k) area *= grid.torus.L;

  // The PDE step cost does not depend on N; it is still timed per sweep
  // point so the fitted slope carries real measurement jitter.
  auto time_pde = [&](std::uint64_t tag) -> detail::MedianTime {
    Rng rng(child_seed(cfg.seed, RngStream::bench, tag));
    if (cfg.d == 1) {
      FieldPair init(grid);
      init.rho = detail::random_smooth_field(grid, rng, 1.0 / area);
      init.j[0] = detail::random_smooth_field(grid, rng, 1.0 / area);
      Solver1D pde(grid, prep.kernel_table, 1.0, init, {},
                   {cfg.cfl, 0.0, false});
      const double dt = 0.9 * pde.max_dt();
      return detail::median_seconds([] {}, [&] { pde.step(dt); }, repetitions,
                                    budget_s);
    }
    FieldPair init(grid);
    init.rho = detail::random_smooth_field(grid, rng, 1.0 / area);
    for (int m = 0; m < grid.dim(); ++m)
      init.j[m] = detail::random_smooth_field(grid, rng, 1.0 / area);
    std::vector<double> vbar(grid.dim(), 1.0);
    SolverNd pde(grid, prep.kernel_table, vbar, init, {}, cfg.cfl);
    const double dt = 0.9 * pde.max_dt();
    return detail::median_seconds([] {}, [&] { pde.step(dt); }, repetitions,
                                  budget_s);
  };

  std::vector<double> log_n, log_part, log_pde;
  for (std::size_t q = 0; q < n_values.size(); ++q) {
    const int N = n_values[q];
    if (N < 1) throw ConfigError("run_benchmark: N must be >= 1");
    Rng sampler(child_seed(cfg.seed, RngStream::bench, 1000 + q));
    ParticleEnsemble ens = sample_ensemble(cfg.law(), cfg.torus(), N, sampler);
    const auto part = detail::median_seconds(
        [&] {
          for (double& v : ens.vel)
            v = sampler.uniform(cfg.v_box[0], cfg.v_box[1]);
        },
        [&] { step_cs(ens, prep.kernel, cfg.dt); }, repetitions, budget_s);
    const auto pde = time_pde(q);
    BenchRecord rec;
    rec.N = N;
    rec.particle_step_seconds = part.seconds;
    rec.pde_step_seconds = pde.seconds;
    rec.repetitions = std::min(part.repetitions, pde.repetitions);
    out.records.push_back(rec);
    log_n.push_back(std::log((double)N));
    log_part.push_back(std::log(part.seconds));
    log_pde.push_back(std::log(pde.seconds));
  }

  if (out.records.size() >= 2) {
    out.particle_slope = least_squares_slope(log_n, log_part);
    out.pde_slope = least_squares_slope(log_n, log_pde);
  }
  for (const auto& r : out.records)
    if (r.particle_step_seconds >= r.pde_step_seconds) {
      out.crossover_N = r.N;
      break;
    }
  return out;
}

// ---------------------------------------------------------------------------
// sweeps

enum class SweepAxis { velocity_spread, epsilon, von_mises_k, sigma, N };

inline SweepAxis parse_axis(const std::string& name) {
  if (name == "velocity_spread") return SweepAxis::velocity_spread;
  if (name == "epsilon") return SweepAxis::epsilon;
  if (name == "von_mises_k") return SweepAxis::von_mises_k;
  if (name == "sigma") return SweepAxis::sigma;
  if (name == "N") return SweepAxis::N;
  throw ConfigError("sweep: unknown axis '" + name + "'");
}

inline ScenarioConfig apply_axis(const ScenarioConfig& base, SweepAxis axis,
                                 double value) {
  ScenarioConfig cfg = base;
  switch (axis) {
    case SweepAxis::velocity_spread: {
      const double center = 0.5 * (cfg.v_box[0] + cfg.v_box[1]);
      cfg.v_box = {center - 0.5 * value, center + 0.5 * value};
      break;
    }
    case SweepAxis::epsilon:
      cfg.epsilon = value;
      break;
    case SweepAxis::von_mises_k:
      cfg.von_mises_k = value;
      break;
    case SweepAxis::sigma:
      cfg.sigma = value;
      break;
    case SweepAxis::N:
      cfg.N = static_cast<int>(value);
      break;
  }
  cfg.validate();
  return cfg;
}

struct SweepPoint {
  double value = 0.0;
  std::uint64_t seed = 0;
  ErrorReport report;
};

// Each sweep point gets a seed derived from (master seed, point index), so
// duplicate values yield distinct realization streams.
inline std::vector<SweepPoint> run_sweep(const ScenarioConfig& base,
                                         SweepAxis axis,
                                         const std::vector<double>& values) {
  std::vector<SweepPoint> points(values.size());
  for (std::size_t q = 0; q < values.size(); ++q) {
    ScenarioConfig cfg = apply_axis(base, axis, values[q]);
    cfg.seed = child_seed(base.seed, RngStream::sweep, q);
    points[q].value = values[q];
    points[q].seed = cfg.seed;
    points[q].report = run_compare(cfg);
  }
  return points;
}

inline void write_sweep(const std::vector<SweepPoint>& points,
                        const std::string& axis_name,
                        const std::filesystem::path& dir,
                        const nlohmann::json& base_echo) {
  CsvFile csv(dir / "sweep.csv",
              {"axis", "value", "point", "seed", "t", "err_l2", "err_hm2",
               "closing_l2"});
  for (std::size_t q = 0; q < points.size(); ++q) {
    const auto& rep = points[q].report;
    for (std::size_t s = 0; s < rep.times.size(); ++s)
      csv.row({axis_name, csv_num(points[q].value), std::to_string(q),
               std::to_string(points[q].seed), csv_num(rep.times[s]),
               csv_num(rep.err_l2[s]), csv_num(rep.err_hm2[s]),
               csv_num(rep.closing_l2[s])});
  }
  nlohmann::json meta;
  meta["config"] = base_echo;
  meta["axis"] = axis_name;
  nlohmann::json finals = nlohmann::json::array();
  for (const auto& p : points)
    finals.push_back({{"value", p.value},
                      {"seed", p.seed},
                      {"err_l2_final", p.report.err_l2.back()}});
  meta["points"] = finals;
  write_json(dir / "meta.json", meta);
}

}  // namespace flocklab
