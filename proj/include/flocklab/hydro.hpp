#pragma once

// Reference solver for the mono-kinetic hydrodynamic model
//   rho_t = -div(rho u)
//   (rho u_i)_t = rho (a*(rho u_i)) - (rho u_i)(a*rho) - div(rho u u_i)
// evolved in the conservative variables (rho, rho u) on the same spectral
// RK4 framework as the reduced model, so discrepancies measure the models.

#include <string>
#include <vector>

#include "flocklab/core.hpp"
#include "flocklab/spectral.hpp"

namespace flocklab {

class HydroSolver {
 public:
  HydroSolver(const GridSpec& grid, const Field& kernel_table,
              const Field& rho0, const std::vector<Field>& ru0,
              double rho_floor = -1.0, double cfl = 0.4)
      : grid_(grid),
        plan_(grid),
        conv_(plan_, kernel_table),
        cfl_(cfl),
        rho_(rho0),
        ru_(ru0) {
    if (static_cast<int>(ru_.size()) != grid.dim())
      throw ConfigError("HydroSolver: momentum dimension mismatch");
    if (rho_floor > 0.0) {
      rho_floor_ = rho_floor;
    } else {
      double vol = 1.0;
      for (int k = 0; k < grid.dim(); ++k) vol *= grid.torus.L;
      rho_floor_ = 1e-8 / vol;
    }
    vbar_.resize(grid.dim());
    const double mass = field_integral(grid_, rho_);
    for (int k = 0; k < grid.dim(); ++k)
      vbar_[k] = field_integral(grid_, ru_[k]) / mass;
  }

  double t() const { return t_; }
  const GridSpec& grid() const { return grid_; }
  const Field& rho() const { return rho_; }
  const std::vector<Field>& ru() const { return ru_; }
  double rho_floor() const { return rho_floor_; }

  double mass() const { return field_integral(grid_, rho_); }
  std::vector<double> momentum() const {
    std::vector<double> m(grid_.dim());
    for (int k = 0; k < grid_.dim(); ++k) m[k] = field_integral(grid_, ru_[k]);
    return m;
  }

  double max_speed() const {
    const int d = grid_.dim();
    double best = 0.0;
    for (std::size_t i = 0; i < rho_.size(); ++i) {
      const double r = std::max(rho_[i], rho_floor_);
      double s = 0.0;
      for (int k = 0; k < d; ++k) {
        const double u = ru_[k][i] / r;
        s += u * u;
      }
      best = std::max(best, s);
    }
    return std::sqrt(best);
  }

  double max_dt() const {
    return cfl_ * grid_.h() / (max_speed() + norm2(vbar_) + 1e-30);
  }

  void rhs(const Field& rho, const std::vector<Field>& ru, Field& drho,
           std::vector<Field>& dru) const {
    const int d = grid_.dim();
    const std::size_t n = grid_.nodes();
    check_vacuum(rho);

    std::vector<Field> u(d, Field(n));
    for (std::size_t i = 0; i < n; ++i) {
      const double r = std::max(rho[i], rho_floor_);
      for (int k = 0; k < d; ++k) u[k][i] = ru[k][i] / r;
    }

    Spectrum crho;
    plan_.forward(rho, crho);
    const Field a_rho = conv_.apply_spectrum(crho);

    drho = plan_.divergence(ru);
    for (double& v : drho) v = -v;

    dru.assign(d, Field(n));
    std::vector<Field> flux(d, Field(n));
    for (int m = 0; m < d; ++m) {
      Spectrum cm;
      plan_.forward(ru[m], cm);
      const Field a_rum = conv_.apply_spectrum(cm);
      for (int z = 0; z < d; ++z)
        for (std::size_t i = 0; i < n; ++i) flux[z][i] = u[z][i] * ru[m][i];
      const Field divf = plan_.divergence(flux);
      for (std::size_t i = 0; i < n; ++i)
        dru[m][i] = rho[i] * a_rum[i] - ru[m][i] * a_rho[i] - divf[i];
    }
  }

  void step(double dt) {
    if (!(dt > 0.0)) throw NumericError("step_hydro: dt must be > 0");
    if (dt > max_dt() * (1.0 + 1e-9))
      throw NumericError("step_hydro: CFL violation");
    const int d = grid_.dim();
    const std::size_t n = grid_.nodes();
    Field k1r, k2r, k3r, k4r, sr(n);
    std::vector<Field> k1m, k2m, k3m, k4m, sm(d, Field(n));

    rhs(rho_, ru_, k1r, k1m);
    stage(sr, sm, k1r, k1m, 0.5 * dt);
    rhs(sr, sm, k2r, k2m);
    stage(sr, sm, k2r, k2m, 0.5 * dt);
    rhs(sr, sm, k3r, k3m);
    stage(sr, sm, k3r, k3m, dt);
    rhs(sr, sm, k4r, k4m);

    const double w = dt / 6.0;
    for (std::size_t i = 0; i < n; ++i)
      rho_[i] += w * (k1r[i] + 2.0 * k2r[i] + 2.0 * k3r[i] + k4r[i]);
    for (int m = 0; m < d; ++m)
      for (std::size_t i = 0; i < n; ++i)
        ru_[m][i] +=
            w * (k1m[m][i] + 2.0 * k2m[m][i] + 2.0 * k3m[m][i] + k4m[m][i]);
    t_ += dt;
  }

 private:
  void check_vacuum(const Field& rho) const {
    for (std::size_t i = 0; i < rho.size(); ++i)
      if (rho[i] < rho_floor_) {
        std::string where = "node " + std::to_string(i) + " (x =";
        std::size_t rem = i;
        std::vector<int> idx(grid_.dim());
        for (int a = grid_.dim() - 1; a >= 0; --a) {
          idx[a] = static_cast<int>(rem % grid_.M);
          rem /= grid_.M;
        }
        for (int a = 0; a < grid_.dim(); ++a)
          where += " " + std::to_string(idx[a] * grid_.h());
        where += ")";
        throw NumericError("rhs_hydro: density below floor at " + where);
      }
  }

  void stage(Field& sr, std::vector<Field>& sm, const Field& kr,
             const std::vector<Field>& km, double a) const {
    const std::size_t n = rho_.size();
    for (std::size_t i = 0; i < n; ++i) sr[i] = rho_[i] + a * kr[i];
    for (int m = 0; m < grid_.dim(); ++m)
      for (std::size_t i = 0; i < n; ++i)
        sm[m][i] = ru_[m][i] + a * km[m][i];
  }

  GridSpec grid_;
  SpectralPlan plan_;
  Convolver conv_;
  double cfl_;
  Field rho_;
  std::vector<Field> ru_;
  std::vector<double> vbar_;
  double rho_floor_;
  double t_ = 0.0;
};

// L2 distance of the pair states (rho_h - rho_r, rho u_h - j_r) at shared
// sample times.
inline std::vector<double> model_discrepancy(
    const GridSpec& grid, std::span<const double> times_a,
    std::span<const FieldPair> series_a, std::span<const double> times_b,
    std::span<const FieldPair> series_b) {
  if (times_a.size() != times_b.size() || series_a.size() != series_b.size() ||
      times_a.size() != series_a.size())
    throw NumericError("model_discrepancy: time grids do not match");
  std::vector<double> out(times_a.size());
  Field diff(grid.nodes());
  for (std::size_t s = 0; s < times_a.size(); ++s) {
    if (std::abs(times_a[s] - times_b[s]) > 1e-12)
      throw NumericError("model_discrepancy: time grids do not match");
    if (series_a[s].grid.nodes() != grid.nodes() ||
        !(series_a[s].grid == series_b[s].grid))
      throw NumericError("model_discrepancy: grid mismatch");
    double acc = 0.0;
    for (std::size_t i = 0; i < diff.size(); ++i)
      diff[i] = series_a[s].rho[i] - series_b[s].rho[i];
    double nr = norm_L2(grid, diff);
    acc += nr * nr;
    for (int m = 0; m < grid.dim(); ++m) {
      for (std::size_t i = 0; i < diff.size(); ++i)
        diff[i] = series_a[s].j[m][i] - series_b[s].j[m][i];
      const double nm = norm_L2(grid, diff);
      acc += nm * nm;
    }
    out[s] = std::sqrt(acc);
  }
  return out;
}

}  // namespace flocklab
