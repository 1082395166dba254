#include <catch2/catch_amalgamated.hpp>

#include "flocklab/kernels.hpp"
#include "flocklab/rng.hpp"
#include "flocklab/spectral.hpp"

using namespace flocklab;

namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;

Field white_noise(const GridSpec& g, std::uint64_t seed) {
  Rng rng(seed);
  Field f(g.nodes());
  for (double& v : f) v = rng.uniform(-1.0, 1.0);
  return f;
}

// O(M^2) direct-sum quadrature oracle for the periodic convolution.
Field convolve_direct(const GridSpec& g, const Field& a, const Field& f) {
  const int M = g.M;
  Field out(M, 0.0);
  for (int n = 0; n < M; ++n) {
    double s = 0.0;
    for (int m = 0; m < M; ++m) s += a[(n - m + M) % M] * f[m];
    out[n] = s * g.h();
  }
  return out;
}

Field smooth_random(const GridSpec& g, std::uint64_t seed) {
  Rng rng(seed);
  Field f(g.nodes(), 0.0);
  for (int k = 1; k <= 6; ++k) {
    const double amp = rng.uniform(-1.0, 1.0) / k;
    const double phase = rng.uniform(0.0, kTwoPi);
    for (int n = 0; n < g.M; ++n)
      f[n] += amp * std::cos(kTwoPi * k * n / g.M + phase);
  }
  return f;
}

}  // namespace

TEST_CASE("transform round trip on white noise") {
  GridSpec g(Torus(1, 2.0 * SpectralPlan::pi()), 128);
  SpectralPlan plan(g);
  Field f = white_noise(g, 7);
  Spectrum c;
  plan.forward(f, c);
  Field back;
  plan.inverse(c, back);
  double err = 0.0;
  for (std::size_t i = 0; i < f.size(); ++i)
    err = std::max(err, std::abs(f[i] - back[i]));
  CHECK(err <= 100 * std::numeric_limits<double>::epsilon());
}

TEST_CASE("Parseval: grid L2 equals coefficient l2 under the normalisation") {
  GridSpec g(Torus(1, 5.0), 64);
  SpectralPlan plan(g);
  Field f = white_noise(g, 11);
  Spectrum c;
  plan.forward(f, c);
  double s = 0.0;
  for (const auto& z : c) s += std::norm(z);
  const double coeff_norm = std::sqrt(s * g.cell_volume() / g.nodes());
  CHECK(coeff_norm == Catch::Approx(norm_L2(g, f)).epsilon(1e-12));
}

TEST_CASE("spectral gradient") {
  const double L = 4.0;
  GridSpec g(Torus(1, L), 64);
  SpectralPlan plan(g);

  Field constant = make_field(g, 3.0);
  Field dc = plan.derivative(constant, 0);
  for (double v : dc) CHECK(std::abs(v) < 1e-12);

  Field s(g.nodes());
  for (int n = 0; n < g.M; ++n) s[n] = std::sin(kTwoPi * n / g.M);
  Field ds = plan.derivative(s, 0);
  for (int n = 0; n < g.M; ++n)
    CHECK(ds[n] ==
          Catch::Approx((kTwoPi / L) * std::cos(kTwoPi * n / g.M)).margin(1e-11));
}

TEST_CASE("spectral gradient agrees with centered differences to O(h^2)") {
  GridSpec g(Torus(1, 2.0 * SpectralPlan::pi()), 128);
  SpectralPlan plan(g);
  Field f = smooth_random(g, 3);
  Field df = plan.derivative(f, 0);
  const double h = g.h();
  double max_dev = 0.0;
  for (int n = 0; n < g.M; ++n) {
    const double fd =
        (f[(n + 1) % g.M] - f[(n - 1 + g.M) % g.M]) / (2.0 * h);
    max_dev = std::max(max_dev, std::abs(df[n] - fd));
  }
  CHECK(max_dev < 12.0 * h * h);  // both converge; difference is O(h^2)
}

TEST_CASE("norm_L2 closed forms") {
  const double L = 2.0 * SpectralPlan::pi();
  GridSpec g(Torus(1, L), 128);
  CHECK(norm_L2(g, make_field(g, 0.0)) == 0.0);
  CHECK(norm_L2(g, make_field(g, 1.5)) == Catch::Approx(1.5 * std::sqrt(L)));
  Field s(g.nodes());
  for (int n = 0; n < g.M; ++n) s[n] = std::sin(kTwoPi * n / g.M);
  CHECK(norm_L2(g, s) == Catch::Approx(std::sqrt(L / 2.0)).epsilon(1e-12));
}

TEST_CASE("norm_Hm2 oracle values") {
  const double L = 2.0 * SpectralPlan::pi();
  GridSpec g(Torus(1, L), 256);
  SpectralPlan plan(g);

  CHECK(plan.norm_Hm2(make_field(g, 0.0)) == 0.0);
  const double c = 0.8;
  CHECK(plan.norm_Hm2(make_field(g, c)) ==
        Catch::Approx(c * std::sqrt(L)).epsilon(1e-12));

  // sin(kx) on the 2 pi torus: sqrt(pi) / (1 + k^2)
  for (int k = 1; k <= 10; ++k) {
    Field s(g.nodes());
    for (int n = 0; n < g.M; ++n) s[n] = std::sin(k * kTwoPi * n / g.M);
    const double expected = std::sqrt(SpectralPlan::pi()) / (1.0 + k * k);
    CHECK(plan.norm_Hm2(s) == Catch::Approx(expected).epsilon(1e-10));
  }
}

TEST_CASE("norm_Hm2 never exceeds norm_L2") {
  GridSpec g(Torus(1, 3.0), 64);
  SpectralPlan plan(g);
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    Field f = white_noise(g, seed);
    CHECK(plan.norm_Hm2(f) <= norm_L2(g, f) * (1.0 + 1e-12));
  }
}

TEST_CASE("convolution against the direct quadrature oracle") {
  GridSpec g(Torus(1, 40.0), 128);
  SpectralPlan plan(g);
  Field a = build_kernel_table(InteractionKernel{50.0, 0.5}, g);
  Field f = smooth_random(g, 17);
  for (double& v : f) v += 2.0;

  Field fast = plan.convolve(a, f);
  Field slow = convolve_direct(g, a, f);
  for (int n = 0; n < g.M; ++n)
    CHECK(fast[n] == Catch::Approx(slow[n]).epsilon(1e-10));
}

TEST_CASE("convolution identities") {
  GridSpec g(Torus(1, 2.0), 64);
  SpectralPlan plan(g);

  // constant kernel: a*f = C * integral(f)
  Field c = make_field(g, 4.0);
  Field f = smooth_random(g, 23);
  for (double& v : f) v += 1.0;
  Field conv = plan.convolve(c, f);
  const double expected = 4.0 * field_integral(g, f);
  for (double v : conv) CHECK(v == Catch::Approx(expected).epsilon(1e-12));

  // commutativity and zero-mode product
  Field a = smooth_random(g, 29);
  for (double& v : a) v += 3.0;
  Field ab = plan.convolve(a, f);
  Field ba = plan.convolve(f, a);
  for (std::size_t i = 0; i < ab.size(); ++i)
    CHECK(ab[i] == Catch::Approx(ba[i]).margin(1e-11));
  CHECK(field_integral(g, ab) ==
        Catch::Approx(field_integral(g, a) * field_integral(g, f))
            .epsilon(1e-12));

  // impulse: a * (unit-mass spike) reproduces the kernel translated
  Field spike = make_field(g, 0.0);
  spike[10] = 1.0 / g.h();
  Field shifted = plan.convolve(a, spike);
  for (int n = 0; n < g.M; ++n)
    CHECK(shifted[n] == Catch::Approx(a[(n - 10 + g.M) % g.M]).margin(1e-9));
}

TEST_CASE("convolution of single modes matches quadrature") {
  const double L = 2.0 * SpectralPlan::pi();
  GridSpec g(Torus(1, L), 64);
  SpectralPlan plan(g);
  Field s(g.nodes());
  for (int n = 0; n < g.M; ++n) s[n] = std::sin(kTwoPi * n / g.M);
  Field conv = plan.convolve(s, s);
  // sin * sin on the 2 pi torus = -pi cos (only the +-1 modes survive)
  for (int n = 0; n < g.M; ++n)
    CHECK(conv[n] ==
          Catch::Approx(-SpectralPlan::pi() * std::cos(kTwoPi * n / g.M))
              .margin(1e-10));
}

TEST_CASE("spectral operations are linear") {
  GridSpec g(Torus(1, 1.0), 32);
  SpectralPlan plan(g);
  Field f = white_noise(g, 5), u = white_noise(g, 6);
  const double al = 2.5, be = -1.25;
  Field combo(g.nodes());
  for (std::size_t i = 0; i < combo.size(); ++i)
    combo[i] = al * f[i] + be * u[i];
  Field da = plan.derivative(combo, 0);
  Field df = plan.derivative(f, 0), du = plan.derivative(u, 0);
  for (std::size_t i = 0; i < combo.size(); ++i)
    CHECK(da[i] == Catch::Approx(al * df[i] + be * du[i]).margin(1e-10));
}

TEST_CASE("grid mismatch is an error") {
  GridSpec g(Torus(1, 1.0), 32);
  SpectralPlan plan(g);
  Field small(16, 0.0), ok(32, 0.0);
  CHECK_THROWS_AS(plan.convolve(small, ok), NumericError);
}

TEST_CASE("pair H-2 norm") {
  GridSpec g(Torus(1, 2.0 * SpectralPlan::pi()), 64);
  SpectralPlan plan(g);
  Field zero = make_field(g, 0.0);
  CHECK(norm_pair_Hm2(plan, zero, zero, 2.0) == 0.0);
  Field u = smooth_random(g, 31);
  const double vbar = -1.7;
  CHECK(norm_pair_Hm2(plan, u, zero, vbar) ==
        Catch::Approx(std::abs(vbar) * plan.norm_Hm2(u)).epsilon(1e-12));
  // identical pairs cancel
  CHECK(norm_pair_Hm2(plan, zero, zero, 1.0) == 0.0);
}

TEST_CASE("kernel fourier check") {
  const double L = 2.0 * SpectralPlan::pi();
  GridSpec g(Torus(1, L), 256);
  SpectralPlan plan(g);

  // constant kernel: only xi = 0 contributes, value C sqrt(2 pi); the
  // derivative orders vanish
  Field c = make_field(g, 25.0);
  auto chk = kernel_fourier_check(plan, c);
  CHECK(chk.by_order[0] ==
        Catch::Approx(25.0 * std::sqrt(2.0 * SpectralPlan::pi()))
            .epsilon(1e-10));
  CHECK(chk.by_order[1] < 1e-8);
  CHECK(chk.by_order[2] < 1e-6);

  // linearity in lambda
  GridSpec g40(Torus(1, 40.0), 512);
  SpectralPlan plan40(g40);
  auto k1 = kernel_fourier_check(
      plan40, build_kernel_table(InteractionKernel{50.0, 0.5}, g40));
  auto k2 = kernel_fourier_check(
      plan40, build_kernel_table(InteractionKernel{100.0, 0.5}, g40));
  CHECK(std::isfinite(k1.overall));
  CHECK(k1.overall > 0.0);
  CHECK(k2.overall == Catch::Approx(2.0 * k1.overall).epsilon(1e-9));

  // the r = 0 constant is resolution-stable; the minimal-image kink makes
  // the higher orders grow with the Nyquist frequency
  GridSpec g40b(Torus(1, 40.0), 1024);
  SpectralPlan plan40b(g40b);
  auto k1b = kernel_fourier_check(
      plan40b, build_kernel_table(InteractionKernel{50.0, 0.5}, g40b));
  CHECK(k1b.by_order[0] == Catch::Approx(k1.by_order[0]).epsilon(0.05));
}
