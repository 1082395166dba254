#pragma once

// Domain types shared by every solver: the periodic box, particle ensembles,
// uniform grids and the (rho, j) field pair.

#include <array>
#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace flocklab {

// Errors are mapped to process exit codes by the CLI:
// ConfigError -> 2, NumericError -> 3, IoError -> 4.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Flat d-torus with the same circumference L on every axis. Canonical
// coordinates live in [0, L) per axis.
struct Torus {
  int d = 1;
  double L = 40.0;

  Torus() = default;
  Torus(int d_, double L_) : d(d_), L(L_) {
    if (d < 1) throw ConfigError("Torus: dimension must be >= 1");
    if (!(L > 0.0)) throw ConfigError("Torus: circumference must be > 0");
  }

  // Map a real coordinate into [0, L).
  double wrap1(double x) const {
    double y = x - L * std::floor(x / L);
    if (y >= L) y -= L;  // guards x = -tiny rounding up to L
    if (y < 0.0) y = 0.0;
    return y;
  }

  void wrap(std::span<double> x) const {
    for (double& xi : x) xi = wrap1(xi);
  }

  // Per-axis minimal-image difference x - y in [-L/2, L/2).
  // The half-distance case maps to the negative representative.
  double disp1(double x, double y) const {
    double dxy = x - y;
    if (dxy >= 0.5 * L)
      dxy -= L;
    else if (dxy < -0.5 * L)
      dxy += L;
    return dxy;
  }

  void disp(std::span<const double> x, std::span<const double> y,
            std::span<double> out) const {
    for (int k = 0; k < d; ++k) out[k] = disp1(x[k], y[k]);
  }
};

inline double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double norm2(std::span<const double> a) {
  return std::sqrt(dot(a, a));
}

// N particles on the torus: positions are canonical torus coordinates,
// velocities are unconstrained reals. Both stored row-major N x d.
struct ParticleEnsemble {
  Torus torus;
  int N = 0;
  std::vector<double> pos;  // N*d
  std::vector<double> vel;  // N*d

  ParticleEnsemble() = default;
  ParticleEnsemble(const Torus& t, int n)
      : torus(t), N(n), pos(static_cast<std::size_t>(n) * t.d, 0.0),
        vel(static_cast<std::size_t>(n) * t.d, 0.0) {
    if (N < 1) throw ConfigError("ParticleEnsemble: N must be >= 1");
  }

  int dim() const { return torus.d; }

  std::span<double> position(int i) {
    return {pos.data() + static_cast<std::size_t>(i) * torus.d,
            static_cast<std::size_t>(torus.d)};
  }
  std::span<const double> position(int i) const {
    return {pos.data() + static_cast<std::size_t>(i) * torus.d,
            static_cast<std::size_t>(torus.d)};
  }
  std::span<double> velocity(int i) {
    return {vel.data() + static_cast<std::size_t>(i) * torus.d,
            static_cast<std::size_t>(torus.d)};
  }
  std::span<const double> velocity(int i) const {
    return {vel.data() + static_cast<std::size_t>(i) * torus.d,
            static_cast<std::size_t>(torus.d)};
  }

  void wrap_positions() {
    for (int i = 0; i < N; ++i) torus.wrap(position(i));
  }
};

// Arithmetic mean of the velocity rows. Conserved by the deterministic
// dynamics, so this doubles as the flocking velocity of the run.
inline std::vector<double> mean_velocity(const ParticleEnsemble& e) {
  std::vector<double> vb(e.dim(), 0.0);
  for (int i = 0; i < e.N; ++i) {
    auto v = e.velocity(i);
    for (int k = 0; k < e.dim(); ++k) vb[k] += v[k];
  }
  for (double& c : vb) c /= e.N;
  return vb;
}

// Uniform periodic grid, M nodes per axis, node coordinates k*h.
struct GridSpec {
  Torus torus;
  int M = 256;

  GridSpec() = default;
  GridSpec(const Torus& t, int m) : torus(t), M(m) {
    if (M < 4) throw ConfigError("GridSpec: M must be >= 4");
  }

  double h() const { return torus.L / M; }
  int dim() const { return torus.d; }
  std::size_t nodes() const {
    std::size_t n = 1;
    for (int k = 0; k < torus.d; ++k) n *= static_cast<std::size_t>(M);
    return n;
  }
  double cell_volume() const {
    double v = 1.0;
    for (int k = 0; k < torus.d; ++k) v *= h();
    return v;
  }
  // Node coordinate along one axis.
  double coord(int k) const { return k * h(); }

  bool operator==(const GridSpec& o) const {
    return torus.d == o.torus.d && torus.L == o.torus.L && M == o.M;
  }
};

using Field = std::vector<double>;

inline Field make_field(const GridSpec& g, double fill = 0.0) {
  return Field(g.nodes(), fill);
}

// Rectangle-rule integral h^d * sum(f); exact for trigonometric polynomials
// resolved by the grid.
inline double field_integral(const GridSpec& g, const Field& f) {
  double s = 0.0;
  for (double v : f) s += v;
  return s * g.cell_volume();
}

// The pair (rho, j): scalar density plus d momentum components on one grid.
struct FieldPair {
  GridSpec grid;
  Field rho;
  std::vector<Field> j;

  FieldPair() = default;
  explicit FieldPair(const GridSpec& g)
      : grid(g), rho(make_field(g)), j(g.dim(), make_field(g)) {}

  double mass() const { return field_integral(grid, rho); }
  std::vector<double> momentum() const {
    std::vector<double> m(grid.dim());
    for (int k = 0; k < grid.dim(); ++k) m[k] = field_integral(grid, j[k]);
    return m;
  }
};

// Ordinary least-squares slope of y against x.
inline double least_squares_slope(std::span<const double> x,
                                  std::span<const double> y) {
  const std::size_t n = x.size();
  if (n < 2) throw NumericError("least_squares_slope: need >= 2 points");
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  if (sxx == 0.0) throw NumericError("least_squares_slope: degenerate abscissa");
  return sxy / sxx;
}

}  // namespace flocklab
