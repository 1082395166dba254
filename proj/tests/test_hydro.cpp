#include <catch2/catch_amalgamated.hpp>

#include "flocklab/fields1d.hpp"
#include "flocklab/hydro.hpp"

using namespace flocklab;

namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;

Field cosine_density(const GridSpec& g, double mod) {
  Field rho(g.nodes());
  const double L = g.torus.L;
  for (int n = 0; n < g.M; ++n)
    rho[n] = (1.0 + mod * std::cos(kTwoPi * g.coord(n) / L)) / L;
  return rho;
}

}  // namespace

TEST_CASE("rhs_hydro") {
  const double L = kTwoPi;
  GridSpec g(Torus(1, L), 128);
  Field a = build_kernel_table(InteractionKernel{50.0, 0.5}, g);

  SECTION("uniform state is steady") {
    Field rho = cosine_density(g, 0.0);
    std::vector<Field> ru{rho};
    for (double& v : ru[0]) v *= 1.4;
    HydroSolver solver(g, a, rho, ru);
    Field drho;
    std::vector<Field> dru;
    solver.rhs(rho, ru, drho, dru);
    for (double v : drho) CHECK(std::abs(v) < 1e-13);
    for (double v : dru[0]) CHECK(std::abs(v) < 1e-13);
  }

  SECTION("u = vbar constant: rigid transport, convolutions cancel") {
    const double vbar = 1.4;
    Field rho = cosine_density(g, 0.35);
    std::vector<Field> ru{rho};
    for (double& v : ru[0]) v *= vbar;
    HydroSolver solver(g, a, rho, ru);
    Field drho;
    std::vector<Field> dru;
    solver.rhs(rho, ru, drho, dru);
    SpectralPlan plan(g);
    Field grad = plan.derivative(rho, 0);
    for (int n = 0; n < g.M; ++n) {
      CHECK(drho[n] == Catch::Approx(-vbar * grad[n]).margin(1e-10));
      CHECK(dru[0][n] ==
            Catch::Approx(-vbar * vbar * grad[n]).margin(1e-10));
    }
  }

  SECTION("RHS integrates to zero") {
    Field rho = cosine_density(g, 0.3);
    std::vector<Field> ru{rho};
    for (int n = 0; n < g.M; ++n)
      ru[0][n] = rho[n] * (1.0 + 0.4 * std::sin(kTwoPi * g.coord(n) / L));
    HydroSolver solver(g, a, rho, ru);
    Field drho;
    std::vector<Field> dru;
    solver.rhs(rho, ru, drho, dru);
    CHECK(std::abs(field_integral(g, drho)) < 1e-13);
    CHECK(std::abs(field_integral(g, dru[0])) < 1e-13);
  }

  SECTION("vacuum is an error naming the first offending node") {
    Field rho = cosine_density(g, 0.3);
    std::vector<Field> ru{rho};
    HydroSolver solver(g, a, rho, ru, 1e-4);
    Field bad = rho;
    bad[17] = 1e-9;
    Field drho;
    std::vector<Field> dru;
    CHECK_THROWS_WITH(solver.rhs(bad, ru, drho, dru),
                      Catch::Matchers::ContainsSubstring("node 17"));
  }
}

TEST_CASE("step_hydro") {
  const double L = kTwoPi;
  GridSpec g(Torus(1, L), 128);
  Field a = build_kernel_table(InteractionKernel{50.0, 0.5}, g);

  SECTION("uniform state is fixed for all t") {
    Field rho = cosine_density(g, 0.0);
    std::vector<Field> ru{rho};
    HydroSolver solver(g, a, rho, ru);
    for (int q = 0; q < 50; ++q) solver.step(0.9 * solver.max_dt());
    for (int n = 0; n < g.M; ++n)
      CHECK(solver.rho()[n] == Catch::Approx(rho[n]).margin(1e-13));
  }

  SECTION("conservation over t_end = 5") {
    GridSpec g256(Torus(1, L), 256);
    Field a256 = build_kernel_table(InteractionKernel{50.0, 0.5}, g256);
    Field rho = cosine_density(g256, 0.3);
    std::vector<Field> ru{rho};
    for (int n = 0; n < g256.M; ++n)
      ru[0][n] = rho[n] * (1.0 + 0.3 * std::sin(kTwoPi * g256.coord(n) / L));
    HydroSolver solver(g256, a256, rho, ru);
    const double m0 = solver.mass();
    const double p0 = solver.momentum()[0];
    double t = 0.0;
    while (t < 5.0) {
      const double dt = std::min(0.9 * solver.max_dt(), 5.0 - t);
      solver.step(dt);
      t += dt;
    }
    CHECK(std::abs(solver.mass() - m0) / std::abs(m0) < 1e-8);
    CHECK(std::abs(solver.momentum()[0] - p0) / std::abs(p0) < 1e-8);
  }

  SECTION("flocked data follows the same wave equation as the reduced model") {
    const double vbar = 1.2;
    Field rho = cosine_density(g, 0.4);
    std::vector<Field> ru{rho};
    for (double& v : ru[0]) v *= vbar;
    HydroSolver hydro(g, a, rho, ru);
    FieldPair init(g);
    init.rho = rho;
    init.j[0] = ru[0];
    Solver1D reduced(g, a, vbar, init);
    const double T = 1.0;
    const double dt = 0.5 * std::min(hydro.max_dt(), reduced.max_dt());
    const int steps = (int)std::ceil(T / dt);
    for (int q = 0; q < steps; ++q) {
      hydro.step(T / steps);
      reduced.step(T / steps);
    }
    for (int n = 0; n < g.M; ++n) {
      CHECK(hydro.rho()[n] == Catch::Approx(reduced.rho()[n]).margin(1e-9));
      CHECK(hydro.ru()[0][n] == Catch::Approx(reduced.j()[n]).margin(1e-9));
    }
  }

  SECTION("self-convergence order is about 4") {
    Field rho = cosine_density(g, 0.3);
    std::vector<Field> ru{rho};
    for (int n = 0; n < g.M; ++n)
      ru[0][n] = rho[n] * (1.0 + 0.4 * std::sin(kTwoPi * g.coord(n) / L));
    auto run = [&](double dt, double T) {
      HydroSolver s(g, a, rho, ru);
      const int steps = (int)std::round(T / dt);
      for (int q = 0; q < steps; ++q) s.step(dt);
      return std::pair<Field, Field>{s.rho(), s.ru()[0]};
    };
    const double T = 0.2, dt0 = 0.002;
    const auto ref = run(dt0 / 64.0, T);
    auto dist = [&](const std::pair<Field, Field>& s) {
      double acc = 0.0;
      for (int n = 0; n < g.M; ++n) {
        acc += (s.first[n] - ref.first[n]) * (s.first[n] - ref.first[n]);
        acc += (s.second[n] - ref.second[n]) * (s.second[n] - ref.second[n]);
      }
      return std::sqrt(acc);
    };
    const double e1 = dist(run(dt0, T));
    const double e2 = dist(run(dt0 / 2.0, T));
    CHECK(e1 / e2 > 10.0);
    CHECK(e1 / e2 < 24.0);
  }
}

TEST_CASE("model discrepancy") {
  const double L = kTwoPi;
  GridSpec g(Torus(1, L), 64);

  SECTION("identical series give zero") {
    std::vector<double> times{0.0, 0.5, 1.0};
    std::vector<FieldPair> a(3, FieldPair(g)), b(3, FieldPair(g));
    for (auto& fp : a) fp.rho = cosine_density(g, 0.2);
    for (auto& fp : b) fp.rho = cosine_density(g, 0.2);
    auto d = model_discrepancy(g, times, a, times, b);
    for (double v : d) CHECK(v == 0.0);
  }

  SECTION("time mismatch is an error") {
    std::vector<double> ta{0.0, 0.5}, tb{0.0, 0.6};
    std::vector<FieldPair> a(2, FieldPair(g)), b(2, FieldPair(g));
    CHECK_THROWS_AS(model_discrepancy(g, ta, a, tb, b), NumericError);
  }

  SECTION("flocked initial data keeps the two models together") {
    const double vbar = 1.1;
    Field a = build_kernel_table(InteractionKernel{50.0, 0.5}, g);
    Field rho = cosine_density(g, 0.35);
    std::vector<Field> ru{rho};
    for (double& v : ru[0]) v *= vbar;
    HydroSolver hydro(g, a, rho, ru);
    FieldPair init(g);
    init.rho = rho;
    init.j[0] = ru[0];
    Solver1D reduced(g, a, vbar, init);

    std::vector<double> times;
    std::vector<FieldPair> ha, rb;
    const int S = 6;
    const double T = 1.0;
    for (int s = 0; s <= S; ++s) times.push_back(T * s / S);
    auto snap_h = [&] {
      FieldPair fp(g);
      fp.rho = hydro.rho();
      fp.j[0] = hydro.ru()[0];
      ha.push_back(fp);
    };
    snap_h();
    rb.push_back(reduced.fields());
    for (int s = 1; s <= S; ++s) {
      const double dt = 0.5 * std::min(hydro.max_dt(), reduced.max_dt());
      const double span = times[s] - times[s - 1];
      const int steps = (int)std::ceil(span / dt);
      for (int q = 0; q < steps; ++q) {
        hydro.step(span / steps);
        reduced.step(span / steps);
      }
      snap_h();
      rb.push_back(reduced.fields());
    }
    auto d = model_discrepancy(g, times, ha, times, rb);
    for (double v : d) CHECK(v < 1e-8);
  }
}
