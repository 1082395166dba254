#pragma once

// Method-of-lines solver for the 1d reduced PDE
//   rho_t = -j_x,   j_t = rho (a*j) - j (a*rho) - vbar^2 (w rho)_x
// with optional space-time weight w and Euler-Maruyama stepping for the
// stochastic variant (noise sigma (j - vbar rho) dB on the j equation).

#include <optional>

#include "flocklab/core.hpp"
#include "flocklab/kernels.hpp"
#include "flocklab/spectral.hpp"

namespace flocklab {

struct Solver1DOptions {
  double cfl = 0.4;
  double spde_ca = 0.0;  // constant kernel part; caps the SPDE step if > 0
  bool dealias = false;
};

class Solver1D {
 public:
  Solver1D(const GridSpec& grid, const Field& kernel_table, double vbar,
           const FieldPair& init, std::optional<WeightField> weight = {},
           Solver1DOptions opts = {})
      : grid_(grid),
        plan_(grid),
        conv_(plan_, kernel_table),
        vbar_(vbar),
        weight_(std::move(weight)),
        opts_(opts),
        rho_(init.rho),
        j_(init.j.at(0)) {
    if (grid.dim() != 1) throw ConfigError("Solver1D: grid must be 1d");
    if (vbar == 0.0) throw ConfigError("Solver1D: vbar = 0 is excluded");
    if (rho_.size() != grid.nodes() || j_.size() != grid.nodes())
      throw ConfigError("Solver1D: initial fields do not match the grid");
  }

  double t() const { return t_; }
  double vbar() const { return vbar_; }
  const GridSpec& grid() const { return grid_; }
  const SpectralPlan& plan() const { return plan_; }
  const Field& rho() const { return rho_; }
  const Field& j() const { return j_; }
  FieldPair fields() const {
    FieldPair fp(grid_);
    fp.rho = rho_;
    fp.j[0] = j_;
    return fp;
  }

  double mass() const { return field_integral(grid_, rho_); }
  double momentum() const { return field_integral(grid_, j_); }
  double flocking_gap() const {
    Field diff(rho_.size());
    for (std::size_t i = 0; i < diff.size(); ++i)
      diff[i] = j_[i] - vbar_ * rho_[i];
    return norm_L2(grid_, diff);
  }

  // Wave speed of the kinetic term is |vbar| sqrt(w); the +1 guards small
  // mean velocities.
  double max_dt() const {
    double wmax = 1.0;
    if (weight_ && weight_->mode != WeightMode::none)
      wmax = std::max(1.0, weight_->max_w0());
    return opts_.cfl * grid_.h() / (std::abs(vbar_) * std::sqrt(wmax) + 1.0);
  }

  double max_dt_spde() const {
    double cap = max_dt();
    if (opts_.spde_ca > 0.0) cap = std::min(cap, 1.0 / (10.0 * opts_.spde_ca));
    return cap;
  }

  void rhs(const Field& rho, const Field& j, double time, Field& drho,
           Field& dj) const {
    Spectrum crho, cj;
    plan_.forward(rho, crho);
    plan_.forward(j, cj);

    const Field a_j = conv_.apply_spectrum(cj);
    const Field a_rho = conv_.apply_spectrum(crho);

    Spectrum cd = cj;
    plan_.apply_derivative(cd, 0);
    plan_.inverse(cd, drho);
    for (double& v : drho) v = -v;

    // kinetic term: -vbar^2 (w rho)_x, reducing to -vbar^2 rho_x for w == 1
    Field kin;
    if (weight_ && weight_->mode != WeightMode::none) {
      const Field w = weight_->at(time);
      Field wrho(rho.size());
      for (std::size_t i = 0; i < rho.size(); ++i) wrho[i] = w[i] * rho[i];
      Spectrum cw;
      plan_.forward(wrho, cw);
      plan_.apply_derivative(cw, 0);
      plan_.inverse(cw, kin);
    } else {
      Spectrum cw = crho;
      plan_.apply_derivative(cw, 0);
      plan_.inverse(cw, kin);
    }

    dj.resize(rho.size());
    for (std::size_t i = 0; i < rho.size(); ++i)
      dj[i] = rho[i] * a_j[i] - j[i] * a_rho[i];
    if (opts_.dealias) plan_.filter_23(dj);
    const double vb2 = vbar_ * vbar_;
    for (std::size_t i = 0; i < rho.size(); ++i) dj[i] -= vb2 * kin[i];
  }

  void step(double dt) {
    if (!(dt > 0.0)) throw NumericError("step_pde_1d: dt must be > 0");
    if (dt > max_dt() * (1.0 + 1e-9))
      throw NumericError("step_pde_1d: CFL violation");
    rk4(dt);
  }

  // Euler-Maruyama: deterministic drift plus sigma (j - vbar rho) dB on j,
  // with the noise coefficient frozen at the pre-step state.
  void step_spde(double sigma, double dt, double dB) {
    if (sigma < 0.0) throw ConfigError("step_spde_1d: sigma must be >= 0");
    if (!(dt > 0.0)) throw NumericError("step_spde_1d: dt must be > 0");
    if (dt > max_dt_spde() * (1.0 + 1e-9))
      throw NumericError("step_spde_1d: CFL violation");
    Field drho, dj;
    rhs(rho_, j_, t_, drho, dj);
    for (std::size_t i = 0; i < rho_.size(); ++i) {
      const double noise = sigma * (j_[i] - vbar_ * rho_[i]) * dB;
      rho_[i] += dt * drho[i];
      j_[i] += dt * dj[i] + noise;
    }
    t_ += dt;
  }

 private:
  void rk4(double dt) {
    const std::size_t n = rho_.size();
    Field k1r, k1j, k2r, k2j, k3r, k3j, k4r, k4j;
    Field sr(n), sj(n);

    rhs(rho_, j_, t_, k1r, k1j);
    for (std::size_t i = 0; i < n; ++i) {
      sr[i] = rho_[i] + 0.5 * dt * k1r[i];
      sj[i] = j_[i] + 0.5 * dt * k1j[i];
    }
    rhs(sr, sj, t_ + 0.5 * dt, k2r, k2j);
    for (std::size_t i = 0; i < n; ++i) {
      sr[i] = rho_[i] + 0.5 * dt * k2r[i];
      sj[i] = j_[i] + 0.5 * dt * k2j[i];
    }
    rhs(sr, sj, t_ + 0.5 * dt, k3r, k3j);
    for (std::size_t i = 0; i < n; ++i) {
      sr[i] = rho_[i] + dt * k3r[i];
      sj[i] = j_[i] + dt * k3j[i];
    }
    rhs(sr, sj, t_ + dt, k4r, k4j);
    const double w = dt / 6.0;
    for (std::size_t i = 0; i < n; ++i) {
      rho_[i] += w * (k1r[i] + 2.0 * k2r[i] + 2.0 * k3r[i] + k4r[i]);
      j_[i] += w * (k1j[i] + 2.0 * k2j[i] + 2.0 * k3j[i] + k4j[i]);
    }
    t_ += dt;
  }

  GridSpec grid_;
  SpectralPlan plan_;
  Convolver conv_;
  double vbar_;
  std::optional<WeightField> weight_;
  Solver1DOptions opts_;
  Field rho_, j_;
  double t_ = 0.0;
};

}  // namespace flocklab
