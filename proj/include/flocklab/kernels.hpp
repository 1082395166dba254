#pragma once

// Interaction kernel a, its constant/variable split a = C_a + theta*g, the
// periodic von Mises mollifier, smoothed empirical densities and the weight
// field for the enhanced 1d model.

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <vector>

#include "flocklab/core.hpp"
#include "flocklab/spectral.hpp"

namespace flocklab {

// a(x) = lambda / (1 + |x|^2)^r, evaluated on minimal-image displacements.
struct InteractionKernel {
  double lambda = 50.0;
  double r = 0.5;

  double eval_sq(double dist_sq) const {
    if (r == 0.0) return lambda;
    if (r == 0.5) return lambda / std::sqrt(1.0 + dist_sq);
    if (r == 1.0) return lambda / (1.0 + dist_sq);
    return lambda * std::pow(1.0 + dist_sq, -r);
  }

  double eval(std::span<const double> displacement) const {
    return eval_sq(dot(displacement, displacement));
  }
};

// Kernel sampled at node displacements (minimal image), even by construction:
// table[k] == table[M-k] along every axis.
inline Field build_kernel_table(const InteractionKernel& kernel,
                                const GridSpec& grid) {
  const int M = grid.M;
  const int d = grid.dim();
  const double h = grid.h();
  const double L = grid.torus.L;
  std::vector<double> axis_sq(M);
  for (int k = 0; k < M; ++k) {
    double x = k * h;
    if (x >= 0.5 * L) x -= L;
    axis_sq[k] = x * x;
  }
  Field table(grid.nodes());
  for (std::size_t flat = 0; flat < table.size(); ++flat) {
    std::size_t rem = flat;
    double s = 0.0;
    for (int a = d - 1; a >= 0; --a) {
      s += axis_sq[rem % M];
      rem /= M;
    }
    table[flat] = kernel.eval_sq(s);
  }
  return table;
}

// a = C_a + theta*g with C_a the grid minimum, theta the total oscillation
// and |g|_inf = 1 (g identically zero for constant kernels).
struct KernelSplit {
  double C_a = 0.0;
  double theta = 0.0;
  Field g;
};

inline KernelSplit split_kernel(const Field& table, const GridSpec& grid) {
  if (table.size() != grid.nodes())
    throw NumericError("split_kernel: table/grid mismatch");
  auto [mn, mx] = std::minmax_element(table.begin(), table.end());
  if (!(*mn > 0.0))
    throw NumericError("split_kernel: kernel must be strictly positive");
  KernelSplit s;
  s.C_a = *mn;
  s.theta = *mx - *mn;
  s.g = make_field(grid, 0.0);
  if (s.theta > 0.0)
    for (std::size_t i = 0; i < table.size(); ++i)
      s.g[i] = (table[i] - s.C_a) / s.theta;
  return s;
}

inline KernelSplit split_kernel(const InteractionKernel& kernel,
                                const GridSpec& grid) {
  return split_kernel(build_kernel_table(kernel, grid), grid);
}

struct FlockingCondition {
  bool holds = false;
  double K = 0.0;
  double threshold = 0.0;  // C_a / (4 theta |g|)
  double margin = 0.0;     // threshold - K
};

// Smallness condition on the initial data relative to the kernel's
// oscillation: K < C_a / (4 theta |g|_{L2}). theta = 0 holds vacuously.
inline FlockingCondition check_flocking_condition(
    const KernelSplit& split, const GridSpec& grid, const Field& rho0,
    const std::vector<Field>& j0, std::span<const double> vbar) {
  const double vb2 = dot(vbar, vbar);
  if (vb2 == 0.0)
    throw NumericError("check_flocking_condition: vbar = 0 is excluded");
  const double nr = norm_L2(grid, rho0);
  double nj2 = 0.0, gap2 = 0.0;
  Field diff(grid.nodes());
  for (int m = 0; m < grid.dim(); ++m) {
    const double nm = norm_L2(grid, j0[m]);
    nj2 += nm * nm;
    for (std::size_t i = 0; i < diff.size(); ++i)
      diff[i] = j0[m][i] - vbar[m] * rho0[i];
    const double gm = norm_L2(grid, diff);
    gap2 += gm * gm;
  }
  FlockingCondition out;
  out.K = std::sqrt(2.0 * (vb2 * nr * nr + nj2) / vb2 + 18.0 * gap2 / vb2);
  const double tg = split.theta * norm_L2(grid, split.g);
  if (tg == 0.0) {
    out.threshold = std::numeric_limits<double>::infinity();
    out.holds = true;
    out.margin = std::numeric_limits<double>::infinity();
    return out;
  }
  out.threshold = split.C_a / (4.0 * tg);
  out.holds = out.K < out.threshold;
  out.margin = out.threshold - out.K;
  return out;
}

// Periodic von Mises bump of scale epsilon. In the angle phi = 2*pi*x/L the
// unnormalised profile is exp(-sin^2(phi/2) / (eps_t^2/2)) with
// eps_t = 2*pi*epsilon/L, so for L = 2*pi the classical formula applies
// verbatim. Normalisation is by grid quadrature of the shifted profile,
// which makes every deposited bump carry exactly unit discrete mass.
class VonMisesMollifier {
 public:
  VonMisesMollifier(double epsilon, const GridSpec& grid)
      : epsilon_(epsilon), grid_(grid) {
    if (!(epsilon > 0.0))
      throw ConfigError("von Mises mollifier: epsilon must be > 0");
    const double eps_t = 2.0 * SpectralPlan::pi() * epsilon / grid.torus.L;
    inv_half_eps_sq_ = 2.0 / (eps_t * eps_t);
    pi_over_L_ = SpectralPlan::pi() / grid.torus.L;
  }

  double epsilon() const { return epsilon_; }
  const GridSpec& grid() const { return grid_; }

  // Unnormalised per-axis profile; periodic in dx with period L.
  double axis_value(double dx) const {
    const double s = std::sin(pi_over_L_ * dx);
    return std::exp(-s * s * inv_half_eps_sq_);
  }

  // row[n] = profile(x_n - center); z = h * sum(row).
  void axis_row(double center, std::vector<double>& row, double& z) const {
    const int M = grid_.M;
    const double h = grid_.h();
    row.resize(M);
    double s = 0.0;
    for (int n = 0; n < M; ++n) {
      row[n] = axis_value(n * h - center);
      s += row[n];
    }
    z = s * h;
  }

  // Normalised kernel field centered at the given torus coordinate.
  Field delta_field(std::span<const double> center) const {
    const int d = grid_.dim();
    const int M = grid_.M;
    std::vector<std::vector<double>> rows(d);
    double z = 1.0;
    for (int a = 0; a < d; ++a) {
      double za = 0.0;
      axis_row(center[a], rows[a], za);
      z *= za;
    }
    Field f(grid_.nodes());
    for (std::size_t flat = 0; flat < f.size(); ++flat) {
      std::size_t rem = flat;
      double p = 1.0;
      for (int a = d - 1; a >= 0; --a) {
        p *= rows[a][rem % M];
        rem /= M;
      }
      f[flat] = p / z;
    }
    return f;
  }

 private:
  double epsilon_;
  GridSpec grid_;
  double inv_half_eps_sq_;
  double pi_over_L_;
};

inline Field von_mises_delta(double epsilon, const GridSpec& grid) {
  VonMisesMollifier moll(epsilon, grid);
  std::vector<double> origin(grid.dim(), 0.0);
  return moll.delta_field(origin);
}

namespace detail {

// Deposit sum_i weight_i * delta_eps(x - x_i) for per-particle weights; each
// bump is normalised by its own quadrature so the discrete masses are exact.
template <typename WeightFn>
inline void deposit(const ParticleEnsemble& ens, const VonMisesMollifier& moll,
                    WeightFn&& weight, Field& out) {
  const GridSpec& grid = moll.grid();
  const int d = grid.dim();
  const int M = grid.M;
  std::vector<double> rowx, rowy, rowz;
  if (d == 1) {
    for (int i = 0; i < ens.N; ++i) {
      double z;
      moll.axis_row(ens.position(i)[0], rowx, z);
      const double w = weight(i) / z;
      for (int n = 0; n < M; ++n) out[n] += w * rowx[n];
    }
  } else if (d == 2) {
    for (int i = 0; i < ens.N; ++i) {
      auto x = ens.position(i);
      double zx, zy;
      moll.axis_row(x[0], rowx, zx);
      moll.axis_row(x[1], rowy, zy);
      const double w = weight(i) / (zx * zy);
      for (int n = 0; n < M; ++n) {
        const double wn = w * rowx[n];
        double* dst = out.data() + static_cast<std::size_t>(n) * M;
        for (int m = 0; m < M; ++m) dst[m] += wn * rowy[m];
      }
    }
  } else if (d == 3) {
    for (int i = 0; i < ens.N; ++i) {
      auto x = ens.position(i);
      double zx, zy, zz;
      moll.axis_row(x[0], rowx, zx);
      moll.axis_row(x[1], rowy, zy);
      moll.axis_row(x[2], rowz, zz);
      const double w = weight(i) / (zx * zy * zz);
      for (int n = 0; n < M; ++n)
        for (int m = 0; m < M; ++m) {
          const double wnm = w * rowx[n] * rowy[m];
          double* dst =
              out.data() + (static_cast<std::size_t>(n) * M + m) * M;
          for (int l = 0; l < M; ++l) dst[l] += wnm * rowz[l];
        }
    }
  } else {
    throw ConfigError("empirical density: d > 3 not supported");
  }
}

}  // namespace detail

// Smoothed empirical densities rho_eps, j_eps; discrete masses are exactly
// 1/N per particle and v_i/N per particle by construction.
inline FieldPair empirical_density(const ParticleEnsemble& ens, double epsilon,
                                   const GridSpec& grid) {
  VonMisesMollifier moll(epsilon, grid);
  FieldPair fp(grid);
  const double inv_n = 1.0 / ens.N;
  detail::deposit(ens, moll, [&](int) { return inv_n; }, fp.rho);
  for (int k = 0; k < grid.dim(); ++k)
    detail::deposit(
        ens, moll, [&](int i) { return ens.velocity(i)[k] * inv_n; }, fp.j[k]);
  return fp;
}

enum class WeightMode { none, exponential, exact_frozen };

// Space-time weight for the enhanced 1d kinetic term. In exponential mode
// w(x,t) = 1 - exp(-C_a t) + exp(-C_a t) w0(x).
struct WeightField {
  Field w0;
  double C_a = 25.0;
  WeightMode mode = WeightMode::none;
  double w_min = 0.1;
  double w_max = 10.0;

  Field at(double t) const {
    if (t < 0.0) throw NumericError("weight_at: t must be >= 0");
    Field w(w0.size(), 1.0);
    switch (mode) {
      case WeightMode::none:
        break;
      case WeightMode::exact_frozen:
        w = w0;
        break;
      case WeightMode::exponential: {
        const double f = std::exp(-C_a * t);
        for (std::size_t i = 0; i < w.size(); ++i)
          w[i] = 1.0 - f + f * w0[i];
        break;
      }
    }
    return w;
  }

  double max_w0() const {
    return w0.empty() ? 1.0 : *std::max_element(w0.begin(), w0.end());
  }
};

// Exact weight at time zero: local mean-square velocity over vbar^2 rho_eps,
// floored at rho_min in the denominator and clamped to [w_min, w_max].
inline Field exact_weight(const ParticleEnsemble& ens, double epsilon,
                          double vbar, const GridSpec& grid, double rho_min,
                          double w_min, double w_max) {
  if (grid.dim() != 1)
    throw ConfigError("exact_weight: weighted model is one-dimensional");
  if (vbar == 0.0) throw NumericError("exact_weight: vbar = 0 is excluded");
  VonMisesMollifier moll(epsilon, grid);
  Field num = make_field(grid);
  Field rho = make_field(grid);
  const double inv_n = 1.0 / ens.N;
  detail::deposit(ens, moll, [&](int) { return inv_n; }, rho);
  detail::deposit(
      ens, moll,
      [&](int i) {
        const double v = ens.velocity(i)[0];
        return v * v * inv_n;
      },
      num);
  Field w(grid.nodes());
  const double vb2 = vbar * vbar;
  for (std::size_t i = 0; i < w.size(); ++i) {
    const double raw = num[i] / (vb2 * std::max(rho[i], rho_min));
    w[i] = std::clamp(raw, w_min, w_max);
  }
  return w;
}

}  // namespace flocklab
