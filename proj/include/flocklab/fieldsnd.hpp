#pragma once

// Solver for the d > 1 reduced PDE
//   rho_t = -div j,   (j_m)_t = rho (a*j_m) - j_m (a*rho) - vbar_m div j
// with the cell-activated diffusive regularisation
//   + sum_c phi(|(rho,j)|_{grad,c}) div(e_c grad f)
// applied to rho and every j_m. Cells coincide with grid cells (one node per
// cell); e_c is a tensor-product hat bump with unit discrete mass.

#include <vector>

#include "flocklab/core.hpp"
#include "flocklab/kernels.hpp"
#include "flocklab/spectral.hpp"

namespace flocklab {

struct RegularizationConfig {
  double V = 0.0;       // activation threshold coefficient (y < V h^d: off)
  double W = 0.0;       // diffusion ceiling (0 disables the term)
  int hat_radius = 1;   // support radius of e_c in cells
};

// C1 smoothstep transition between 0 at y = V h^d and W at y = (V+1) h^d.
inline double cutoff_phi(double y, double V, double W, double h, int d) {
  if (y < 0.0) throw NumericError("cutoff_phi: y must be >= 0");
  double hd = 1.0;
  for (int k = 0; k < d; ++k) hd *= h;
  const double lo = V * hd;
  const double hi = (V + 1.0) * hd;
  if (y < lo) return 0.0;
  if (y >= hi) return W;
  const double u = (y - lo) / hd;
  return W * u * u * (3.0 - 2.0 * u);
}

class SolverNd {
 public:
  SolverNd(const GridSpec& grid, const Field& kernel_table,
           std::vector<double> vbar, const FieldPair& init,
           RegularizationConfig reg = {}, double cfl = 0.4)
      : grid_(grid),
        plan_(grid),
        conv_(plan_, kernel_table),
        vbar_(std::move(vbar)),
        reg_(reg),
        cfl_(cfl),
        rho_(init.rho),
        j_(init.j) {
    if (grid.dim() < 2) throw ConfigError("SolverNd: stated for d >= 2");
    if (static_cast<int>(vbar_.size()) != grid.dim())
      throw ConfigError("SolverNd: vbar dimension mismatch");
    if (norm2(vbar_) == 0.0) throw ConfigError("SolverNd: vbar = 0 is excluded");
    if (reg_.hat_radius < 1) throw ConfigError("SolverNd: hat radius >= 1");
    if (reg_.W < 0.0 || reg_.V < 0.0)
      throw ConfigError("SolverNd: V, W must be >= 0");
    if (reg_.W > 0.0) refresh_activation(rho_, j_);
  }

  double t() const { return t_; }
  const GridSpec& grid() const { return grid_; }
  const SpectralPlan& plan() const { return plan_; }
  const Field& rho() const { return rho_; }
  const std::vector<Field>& j() const { return j_; }
  const std::vector<double>& vbar() const { return vbar_; }
  FieldPair fields() const {
    FieldPair fp(grid_);
    fp.rho = rho_;
    fp.j = j_;
    return fp;
  }

  double mass() const { return field_integral(grid_, rho_); }
  std::vector<double> momentum() const {
    std::vector<double> m(grid_.dim());
    for (int k = 0; k < grid_.dim(); ++k) m[k] = field_integral(grid_, j_[k]);
    return m;
  }

  double flocking_gap() const {
    double s = 0.0;
    Field diff(rho_.size());
    for (int m = 0; m < grid_.dim(); ++m) {
      for (std::size_t i = 0; i < diff.size(); ++i)
        diff[i] = j_[m][i] - vbar_[m] * rho_[i];
      const double g = norm_L2(grid_, diff);
      s += g * g;
    }
    return std::sqrt(s);
  }

  // Per-cell activation quantity |(rho, j)|_{grad,c}: one grid cell per node,
  // one-node quadrature of the L2(c) norms of the spectral gradients.
  Field cell_norms(const Field& rho, const std::vector<Field>& j) const {
    const int d = grid_.dim();
    const double vol = grid_.cell_volume();
    const double vb2 = dot(vbar_, vbar_);
    Field y(grid_.nodes(), 0.0);
    auto grho = plan_.gradient(rho);
    for (int a = 0; a < d; ++a)
      for (std::size_t i = 0; i < y.size(); ++i)
        y[i] += vb2 * grho[a][i] * grho[a][i];
    for (int m = 0; m < d; ++m) {
      auto gj = plan_.gradient(j[m]);
      for (int a = 0; a < d; ++a)
        for (std::size_t i = 0; i < y.size(); ++i)
          y[i] += gj[a][i] * gj[a][i];
    }
    for (double& v : y) v = std::sqrt(v * vol);
    return y;
  }

  double cell_gradient_norm(std::size_t cell) const {
    return cell_norms(rho_, j_)[cell];
  }

  // Envelope E = sum_c phi_c e_c: a local stencil convolution of the phi
  // values with the hat weights. div(E grad f) then realises the whole
  // regularisation sum at once, since the phi_c are constants per cell.
  Field envelope(const Field& phi) const {
    const int d = grid_.dim();
    const int M = grid_.M;
    const int R = reg_.hat_radius;
    const double h = grid_.h();
    // per-axis hat weights u(o) = (1 - |o|/(R+1)) / (h (R+1)); h * sum = 1
    std::vector<double> u(2 * R + 1);
    for (int o = -R; o <= R; ++o)
      u[o + R] = (1.0 - std::abs(o) / double(R + 1)) / (h * (R + 1));
    Field e(grid_.nodes(), 0.0);
    if (d == 2) {
      for (int i = 0; i < M; ++i)
        for (int jn = 0; jn < M; ++jn) {
          double s = 0.0;
          for (int oi = -R; oi <= R; ++oi) {
            const int ii = (i - oi + M) % M;
            for (int oj = -R; oj <= R; ++oj) {
              const int jj = (jn - oj + M) % M;
              s += phi[static_cast<std::size_t>(ii) * M + jj] * u[oi + R] *
                   u[oj + R];
            }
          }
          e[static_cast<std::size_t>(i) * M + jn] = s;
        }
      return e;
    }
    if (d == 3) {
      for (std::size_t flat = 0; flat < e.size(); ++flat) {
        const int i = static_cast<int>(flat / (static_cast<std::size_t>(M) * M));
        const int jn = static_cast<int>((flat / M) % M);
        const int kn = static_cast<int>(flat % M);
        double s = 0.0;
        for (int oi = -R; oi <= R; ++oi)
          for (int oj = -R; oj <= R; ++oj)
            for (int ok = -R; ok <= R; ++ok) {
              const int ii = (i - oi + M) % M;
              const int jj = (jn - oj + M) % M;
              const int kk = (kn - ok + M) % M;
              s += phi[(static_cast<std::size_t>(ii) * M + jj) * M + kk] *
                   u[oi + R] * u[oj + R] * u[ok + R];
            }
        e[flat] = s;
      }
      return e;
    }
    throw ConfigError("SolverNd: d > 3 not supported");
  }

  // Conservative centered discretisation of div(E grad f): face-averaged E,
  // telescoping fluxes, so the discrete integral of the result is zero.
  Field diffuse(const Field& E, const Field& f) const {
    const int d = grid_.dim();
    const int M = grid_.M;
    const double inv_h2 = 1.0 / (grid_.h() * grid_.h());
    Field out(grid_.nodes(), 0.0);
    std::vector<std::size_t> strides(d);
    std::size_t s = 1;
    for (int a = d - 1; a >= 0; --a) {
      strides[a] = s;
      s *= M;
    }
    for (int a = 0; a < d; ++a) {
      const std::size_t st = strides[a];
      const std::size_t span = st * static_cast<std::size_t>(M);
      for (std::size_t flat = 0; flat < out.size(); ++flat) {
        const int k = static_cast<int>((flat / st) % M);
        const std::size_t up = (k + 1 < M) ? flat + st : flat + st - span;
        const std::size_t dn = (k > 0) ? flat - st : flat + span - st;
        const double e_up = 0.5 * (E[flat] + E[up]);
        const double e_dn = 0.5 * (E[flat] + E[dn]);
        out[flat] +=
            (e_up * (f[up] - f[flat]) - e_dn * (f[flat] - f[dn])) * inv_h2;
      }
    }
    return out;
  }

  // The full regularisation term for one target field at the current state.
  Field regularization_term(const Field& target) const {
    Field phi = cell_norms(rho_, j_);
    const int d = grid_.dim();
    for (double& y : phi) y = cutoff_phi(y, reg_.V, reg_.W, grid_.h(), d);
    return diffuse(envelope(phi), target);
  }

  void rhs(const Field& rho, const std::vector<Field>& j, Field& drho,
           std::vector<Field>& dj) const {
    const int d = grid_.dim();
    const std::size_t n = grid_.nodes();

    Spectrum crho;
    plan_.forward(rho, crho);
    const Field a_rho = conv_.apply_spectrum(crho);

    Spectrum acc(n, {0.0, 0.0});
    dj.assign(d, Field());
    for (int m = 0; m < d; ++m) {
      Spectrum cj;
      plan_.forward(j[m], cj);
      const Field a_jm = conv_.apply_spectrum(cj);
      dj[m].resize(n);
      for (std::size_t i = 0; i < n; ++i)
        dj[m][i] = rho[i] * a_jm[i] - j[m][i] * a_rho[i];
      plan_.apply_derivative(cj, m);
      for (std::size_t i = 0; i < n; ++i) acc[i] += cj[i];
    }
    Field divj;
    plan_.inverse(acc, divj);

    drho.resize(n);
    for (std::size_t i = 0; i < n; ++i) drho[i] = -divj[i];
    for (int m = 0; m < d; ++m)
      for (std::size_t i = 0; i < n; ++i) dj[m][i] -= vbar_[m] * divj[i];

    if (reg_.W > 0.0) {
      Field phi = cell_norms(rho, j);
      for (double& y : phi) y = cutoff_phi(y, reg_.V, reg_.W, grid_.h(), d);
      const Field E = envelope(phi);
      record_activation(phi, E);
      const Field dr = diffuse(E, rho);
      for (std::size_t i = 0; i < n; ++i) drho[i] += dr[i];
      for (int m = 0; m < d; ++m) {
        const Field dm = diffuse(E, j[m]);
        for (std::size_t i = 0; i < n; ++i) dj[m][i] += dm[i];
      }
    }
  }

  double max_phi() const { return last_max_phi_; }

  // Advective cap; when the cutoff is active the stated diffusive cap
  // h^2 / (4 W max e_c) applies on top (a dormant cutoff contributes nothing
  // and imposes no step restriction).
  double max_dt() const {
    const double h = grid_.h();
    double cap = cfl_ * h / (norm2(vbar_) + 1.0);
    if (reg_.W > 0.0 && last_max_phi_ > 0.0) {
      double max_ec = 1.0;
      for (int k = 0; k < grid_.dim(); ++k) max_ec /= h * (reg_.hat_radius + 1);
      cap = std::min(cap, h * h / (4.0 * reg_.W * max_ec));
    }
    return cap;
  }

  // Stricter choice for driving runs: explicit-diffusion stability against
  // the currently observed envelope maximum.
  double suggested_dt() const {
    double cap = max_dt();
    if (reg_.W > 0.0 && last_max_E_ > 0.0)
      cap = std::min(cap, 0.3 * grid_.h() * grid_.h() /
                              (2.0 * grid_.dim() * last_max_E_));
    return cap;
  }

  void step(double dt) {
    if (!(dt > 0.0)) throw NumericError("step_pde_nd: dt must be > 0");
    if (dt > max_dt() * (1.0 + 1e-9))
      throw NumericError("step_pde_nd: CFL violation");
    const int d = grid_.dim();
    const std::size_t n = grid_.nodes();
    Field k1r, k2r, k3r, k4r, sr(n);
    std::vector<Field> k1j, k2j, k3j, k4j, sj(d, Field(n));

    rhs(rho_, j_, k1r, k1j);
    stage(sr, sj, k1r, k1j, 0.5 * dt);
    rhs(sr, sj, k2r, k2j);
    stage(sr, sj, k2r, k2j, 0.5 * dt);
    rhs(sr, sj, k3r, k3j);
    stage(sr, sj, k3r, k3j, dt);
    rhs(sr, sj, k4r, k4j);

    const double w = dt / 6.0;
    for (std::size_t i = 0; i < n; ++i)
      rho_[i] += w * (k1r[i] + 2.0 * k2r[i] + 2.0 * k3r[i] + k4r[i]);
    for (int m = 0; m < d; ++m)
      for (std::size_t i = 0; i < n; ++i)
        j_[m][i] += w * (k1j[m][i] + 2.0 * k2j[m][i] + 2.0 * k3j[m][i] +
                         k4j[m][i]);
    t_ += dt;
  }

 private:
  void stage(Field& sr, std::vector<Field>& sj, const Field& kr,
             const std::vector<Field>& kj, double a) const {
    const std::size_t n = rho_.size();
    for (std::size_t i = 0; i < n; ++i) sr[i] = rho_[i] + a * kr[i];
    for (int m = 0; m < grid_.dim(); ++m)
      for (std::size_t i = 0; i < n; ++i)
        sj[m][i] = j_[m][i] + a * kj[m][i];
  }

  void record_activation(const Field& phi, const Field& E) const {
    double mp = 0.0, me = 0.0;
    for (double v : phi) mp = std::max(mp, v);
    for (double v : E) me = std::max(me, v);
    last_max_phi_ = mp;
    last_max_E_ = me;
  }

  void refresh_activation(const Field& rho, const std::vector<Field>& j) {
    Field phi = cell_norms(rho, j);
    for (double& y : phi)
      y = cutoff_phi(y, reg_.V, reg_.W, grid_.h(), grid_.dim());
    record_activation(phi, envelope(phi));
  }

  GridSpec grid_;
  SpectralPlan plan_;
  Convolver conv_;
  std::vector<double> vbar_;
  RegularizationConfig reg_;
  double cfl_;
  Field rho_;
  std::vector<Field> j_;
  double t_ = 0.0;
  mutable double last_max_phi_ = 0.0;
  mutable double last_max_E_ = 0.0;
};

// Default activation threshold: inactive on the given initial data, with a
// factor-two headroom (V h^d = 2 max_c |(rho0,j0)|_{grad,c}).
inline double default_reg_threshold(const SolverNd& solver) {
  Field y = solver.cell_norms(solver.rho(), solver.j());
  double ymax = 0.0;
  for (double v : y) ymax = std::max(ymax, v);
  double hd = 1.0;
  for (int k = 0; k < solver.grid().dim(); ++k) hd *= solver.grid().h();
  return 2.0 * ymax / hd;
}

}  // namespace flocklab
