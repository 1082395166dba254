#include <catch2/catch_amalgamated.hpp>

#include "flocklab/core.hpp"
#include "flocklab/rng.hpp"

using namespace flocklab;

TEST_CASE("wrap maps into the canonical box") {
  Torus t(1, 40.0);
  CHECK(t.wrap1(40.0 + 0.5) == Catch::Approx(0.5));
  CHECK(t.wrap1(-0.25 * 40.0) == Catch::Approx(0.75 * 40.0));
  CHECK(t.wrap1(0.0) == 0.0);
  CHECK(t.wrap1(-1e-18) >= 0.0);
  // periodicity: wrap(x + k L) == wrap(x)
  for (double x : {0.0, 3.7, 39.999, -121.5}) {
    const double w = t.wrap1(x);
    CHECK(t.wrap1(x + 3 * t.L) == Catch::Approx(w).margin(1e-12));
    CHECK(w >= 0.0);
    CHECK(w < t.L);
  }
}

TEST_CASE("geodesic displacement takes the minimal image") {
  Torus t(1, 1.0);
  // wrap(y + disp(x, y)) = x pins the orientation: disp(0.1, 0.9) = +0.2
  CHECK(t.disp1(0.1, 0.9) == Catch::Approx(0.2));
  CHECK(t.disp1(0.9, 0.1) == Catch::Approx(-0.2));
  CHECK(t.disp1(0.3, 0.3) == 0.0);
  // half-distance convention: the negative representative
  CHECK(t.disp1(0.0, 0.5) == Catch::Approx(-0.5));
  CHECK(t.disp1(0.5, 0.0) == Catch::Approx(-0.5));
  // antisymmetry off the half shell
  CHECK(t.disp1(0.2, 0.7) == Catch::Approx(-t.disp1(0.7, 0.2)));
}

TEST_CASE("wrap and displacement are mutually consistent") {
  Torus t(1, 7.0);
  Rng rng(99);
  for (int q = 0; q < 200; ++q) {
    const double x = t.wrap1(rng.uniform(-20.0, 20.0));
    const double y = t.wrap1(rng.uniform(-20.0, 20.0));
    const double d = t.disp1(x, y);
    CHECK(t.wrap1(y + d) == Catch::Approx(x).margin(1e-12));
  }
}

TEST_CASE("mean velocity") {
  Torus t(1, 10.0);
  ParticleEnsemble e(t, 2);
  e.vel = {1.0, 3.0};
  CHECK(mean_velocity(e)[0] == Catch::Approx(2.0));
  e.vel = {5.0, -5.0};
  CHECK(mean_velocity(e)[0] == Catch::Approx(0.0).margin(1e-15));
  ParticleEnsemble single(t, 1);
  single.vel = {0.7};
  CHECK(mean_velocity(single)[0] == Catch::Approx(0.7));
}

TEST_CASE("grid spacing is exact and field integral is a rectangle rule") {
  GridSpec g(Torus(1, 40.0), 256);
  CHECK(g.h() == 40.0 / 256);
  Field f = make_field(g, 2.5);
  CHECK(field_integral(g, f) == Catch::Approx(2.5 * 40.0));
  CHECK_THROWS_AS(GridSpec(Torus(1, 1.0), 3), ConfigError);
}

TEST_CASE("field pair bookkeeping") {
  GridSpec g(Torus(2, 2.0), 8);
  FieldPair fp(g);
  REQUIRE(fp.j.size() == 2);
  std::fill(fp.rho.begin(), fp.rho.end(), 0.25);
  CHECK(fp.mass() == Catch::Approx(1.0));
}

TEST_CASE("child seeds are stable and distinct across streams") {
  const auto a = child_seed(42, RngStream::initial_conditions, 0);
  const auto b = child_seed(42, RngStream::initial_conditions, 1);
  const auto c = child_seed(42, RngStream::particle_noise, 0);
  CHECK(a != b);
  CHECK(a != c);
  CHECK(a == child_seed(42, RngStream::initial_conditions, 0));
}

TEST_CASE("least squares slope recovers a line") {
  std::vector<double> x{0, 1, 2, 3, 4}, y;
  for (double xi : x) y.push_back(3.0 - 2.0 * xi);
  CHECK(least_squares_slope(x, y) == Catch::Approx(-2.0));
}
