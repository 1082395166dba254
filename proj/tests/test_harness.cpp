#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "flocklab/harness.hpp"
#include "flocklab/runners.hpp"

using namespace flocklab;

namespace {

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

ScenarioConfig small_compare_config() {
  ScenarioConfig cfg;
  cfg.d = 1;
  cfg.L = 2.0 * SpectralPlan::pi();
  cfg.M = 64;
  cfg.N = 40;
  cfg.t_end = 0.4;
  cfg.dt = 2e-3;
  cfg.epsilon = 0.5;
  cfg.x_box = {-2.0, 2.0};
  cfg.v_box = {0.8, 1.2};
  cfg.n_samples = 11;
  cfg.seed = 2024;
  cfg.out.clear();
  return cfg;
}

}  // namespace

TEST_CASE("closing residual") {
  GridSpec g(Torus(1, 2.0 * SpectralPlan::pi()), 128);
  SpectralPlan plan(g);
  Torus t = g.torus;

  SECTION("aligned velocities give zero") {
    ParticleEnsemble e(t, 8);
    Rng rng(3);
    for (double& x : e.pos) x = rng.uniform(0.0, t.L);
    for (double& v : e.vel) v = 1.7;
    CHECK(closing_residual(e, 0.3, g, plan, NormKind::L2) < 1e-12);
    CHECK(closing_residual(e, 0.3, g, plan, NormKind::Hm2) < 1e-12);
  }

  SECTION("spread makes it positive, and Hm2 <= L2") {
    ParticleEnsemble e(t, 8);
    Rng rng(5);
    for (double& x : e.pos) x = rng.uniform(0.0, t.L);
    for (double& v : e.vel) v = rng.uniform(-2.0, 4.0);
    const double l2 = closing_residual(e, 0.3, g, plan, NormKind::L2);
    const double hm2 = closing_residual(e, 0.3, g, plan, NormKind::Hm2);
    CHECK(l2 > 0.0);
    CHECK(hm2 > 0.0);
    CHECK(hm2 <= l2);
  }
}

TEST_CASE("ensemble statistics") {
  GridSpec g(Torus(1, 4.0), 16);

  SECTION("identical realizations have zero variance") {
    FieldPair fp(g);
    for (int n = 0; n < g.M; ++n) fp.rho[n] = 0.1 * n;
    std::vector<FieldPair> reals(5, fp);
    FieldStats st = ensemble_stats(reals);
    for (int n = 0; n < g.M; ++n) {
      CHECK(st.mean.rho[n] == Catch::Approx(fp.rho[n]));
      CHECK(st.variance.rho[n] <= 1e-30);  // round-off of the mean only
    }
  }

  SECTION("two-point formula for f and -f") {
    FieldPair fp(g), fm(g);
    for (int n = 0; n < g.M; ++n) {
      fp.rho[n] = std::sin(0.3 * n);
      fm.rho[n] = -fp.rho[n];
      fp.j[0][n] = 0.5 * n;
      fm.j[0][n] = -fp.j[0][n];
    }
    FieldStats st = ensemble_stats({fp, fm});
    for (int n = 0; n < g.M; ++n) {
      CHECK(st.mean.rho[n] == Catch::Approx(0.0).margin(1e-15));
      CHECK(st.variance.rho[n] ==
            Catch::Approx(2.0 * fp.rho[n] * fp.rho[n]).margin(1e-13));
    }
  }

  SECTION("mismatched shapes and too-few realizations are errors") {
    FieldPair a(g);
    FieldPair b(GridSpec(Torus(1, 4.0), 32));
    CHECK_THROWS_AS(ensemble_stats({a}), NumericError);
    CHECK_THROWS_AS(ensemble_stats({a, b}), NumericError);
  }
}

TEST_CASE("config parsing") {
  SECTION("unknown keys are a hard error") {
    nlohmann::json j{{"d", 1}, {"bogus_key", 3}};
    CHECK_THROWS_AS(parse_config(j), ConfigError);
  }

  SECTION("round trip of a representative config") {
    nlohmann::json j{{"d", 2},          {"L", 12.5},       {"M", 64},
                     {"N", 10},         {"t_end", 0.5},    {"epsilon", 0.8},
                     {"weight_mode", "exponential"},       {"sigma", 0.25},
                     {"seed", 99},      {"realizations", 3}};
    ScenarioConfig cfg = parse_config(j);
    CHECK(cfg.d == 2);
    CHECK(cfg.L == 12.5);
    CHECK(cfg.weight_mode_enum() == WeightMode::exponential);
    CHECK(cfg.effective_weight_rate() == Catch::Approx(25.0));  // lambda/2
    CHECK(cfg.seed == 99);
  }

  SECTION("validation rejects bad values") {
    nlohmann::json j{{"M", 2}};
    CHECK_THROWS_AS(parse_config(j), ConfigError);
    nlohmann::json j2{{"weight_mode", "frozen"}};
    CHECK_THROWS_AS(parse_config(j2), ConfigError);
    nlohmann::json j3{{"epsilon", -0.5}};
    CHECK_THROWS_AS(parse_config(j3), ConfigError);
  }
}

TEST_CASE("parallel_for covers every index once and propagates errors") {
  std::vector<int> hits(257, 0);
  parallel_for(257, 3, [&](int i) { hits[i] += 1; });
  for (int h : hits) CHECK(h == 1);
  CHECK_THROWS_AS(parallel_for(8, 2,
                               [&](int i) {
                                 if (i == 5) throw NumericError("boom");
                               }),
                  NumericError);
}

TEST_CASE("run_compare on a near-flocked ensemble") {
  ScenarioConfig cfg = small_compare_config();
  cfg.v_box = {0.999, 1.001};  // essentially zero spread
  ErrorReport rep = run_compare(cfg);

  // t = 0: the PDE is initialised from the smoothed densities
  CHECK(rep.err_l2.front() < 1e-12);
  CHECK(rep.err_hm2.front() < 1e-12);
  // tiny spread keeps the closure error at the discretisation floor
  for (double e : rep.err_l2) CHECK(e < 1e-2);
  CHECK(rep.pde_mass_drift < 1e-10);
}

TEST_CASE("run_compare determinism: identical config and seed, identical bytes") {
  ScenarioConfig cfg = small_compare_config();
  cfg.realizations = 2;
  cfg.threads = 2;  // fixed-order reduction must make threading invisible
  ErrorReport r1 = run_compare(cfg);
  ErrorReport r2 = run_compare(cfg);
  REQUIRE(r1.err_l2.size() == r2.err_l2.size());
  for (std::size_t i = 0; i < r1.err_l2.size(); ++i) {
    CHECK(r1.err_l2[i] == r2.err_l2[i]);
    CHECK(r1.err_hm2[i] == r2.err_hm2[i]);
  }

  auto tmp = std::filesystem::temp_directory_path() / "flocklab_test";
  std::filesystem::remove_all(tmp);
  write_report(r1, tmp / "a");
  write_report(r2, tmp / "b");
  CHECK(slurp(tmp / "a" / "report.csv") == slurp(tmp / "b" / "report.csv"));
}

TEST_CASE("sweep") {
  ScenarioConfig cfg = small_compare_config();
  cfg.n_samples = 5;
  cfg.t_end = 0.2;

  SECTION("empty value list gives an empty table") {
    auto points = run_sweep(cfg, SweepAxis::epsilon, {});
    CHECK(points.empty());
  }

  SECTION("duplicate values get distinct derived seeds") {
    auto points = run_sweep(cfg, SweepAxis::epsilon, {0.5, 0.5});
    REQUIRE(points.size() == 2);
    CHECK(points[0].seed != points[1].seed);
    CHECK(points[0].value == points[1].value);
  }

  SECTION("unknown axis is an error") {
    CHECK_THROWS_AS(parse_axis("resolution"), ConfigError);
  }

  SECTION("velocity_spread axis resizes the box around its center") {
    ScenarioConfig out = apply_axis(cfg, SweepAxis::velocity_spread, 3.0);
    CHECK(out.v_box[1] - out.v_box[0] == Catch::Approx(3.0));
    CHECK(0.5 * (out.v_box[0] + out.v_box[1]) ==
          Catch::Approx(0.5 * (cfg.v_box[0] + cfg.v_box[1])));
  }
}

TEST_CASE("benchmark smoke run") {
  ScenarioConfig cfg;
  cfg.d = 1;
  cfg.L = 2.0 * SpectralPlan::pi();
  cfg.M = 32;
  cfg.dt = 1e-3;
  cfg.x_box = {-2.0, 2.0};
  cfg.v_box = {-1.0, 1.0};
  BenchResult res = run_benchmark(cfg, {20, 40}, 10, 0.02);
  REQUIRE(res.records.size() == 2);
  for (const auto& r : res.records) {
    CHECK(r.particle_step_seconds > 0.0);
    CHECK(r.pde_step_seconds > 0.0);
    CHECK(r.repetitions >= 10);
  }
  CHECK_THROWS_AS(run_benchmark(cfg, {10}, 5), ConfigError);
}

TEST_CASE("stats runner machinery on a tiny ensemble") {
  ScenarioConfig cfg;
  cfg.d = 1;
  cfg.L = 2.0 * SpectralPlan::pi();
  cfg.M = 64;
  cfg.N = 30;
  cfg.t_end = 0.1;
  cfg.dt = 1e-3;
  cfg.epsilon = 0.5;
  cfg.x_box = {-2.0, 2.0};
  cfg.v_box = {0.9, 1.1};
  cfg.sigma = 0.5;
  cfg.realizations = 16;
  cfg.seed = 7;
  cfg.out.clear();
  StatsRunResult res = run_stats(cfg);
  CHECK(res.particles.realizations == 16);
  CHECK(res.spde.realizations == 16);
  CHECK(res.rho_consistent_fraction >= 0.0);
  CHECK(res.rho_consistent_fraction <= 1.0);
  // the two mean density fields agree to leading order even at this tiny
  // realization count (statistical consistency is acceptance territory)
  double l2 = 0.0, scale = 0.0;
  for (int n = 0; n < cfg.M; ++n) {
    const double d = res.particles.mean.rho[n] - res.spde.mean.rho[n];
    l2 += d * d;
    scale += res.particles.mean.rho[n] * res.particles.mean.rho[n];
  }
  CHECK(std::sqrt(l2 / scale) < 0.05);
}

TEST_CASE("runner files are written") {
  auto tmp = std::filesystem::temp_directory_path() / "flocklab_runner";
  std::filesystem::remove_all(tmp);

  ScenarioConfig cfg = small_compare_config();
  cfg.N = 10;
  cfg.t_end = 0.1;
  cfg.n_samples = 11;
  cfg.out = (tmp / "particles").string();
  run_particles(cfg);
  CHECK(std::filesystem::exists(tmp / "particles" / "trajectory.csv"));
  CHECK(std::filesystem::exists(tmp / "particles" / "meta.json"));

  cfg.out = (tmp / "pde").string();
  run_pde1d(cfg, false);
  CHECK(std::filesystem::exists(tmp / "pde" / "fields.csv"));
  CHECK(std::filesystem::exists(tmp / "pde" / "series.csv"));
  CHECK(std::filesystem::exists(tmp / "pde" / "kernel.csv"));

  cfg.out = (tmp / "hydro").string();
  run_hydro(cfg);
  CHECK(std::filesystem::exists(tmp / "hydro" / "discrepancy.csv"));
}
