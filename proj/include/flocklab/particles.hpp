#pragma once

// Time integration of the deterministic and stochastic Cucker-Smale systems
// plus particle-level flocking diagnostics and initial-condition samplers.

#include <cmath>
#include <vector>

#include "flocklab/core.hpp"
#include "flocklab/kernels.hpp"
#include "flocklab/rng.hpp"

namespace flocklab {

// acceleration_i = N^-1 sum_j a(x_i - x_j) (v_j - v_i), accumulated pairwise
// so the +/- contributions cancel exactly and momentum is preserved.
inline std::vector<double> cs_rhs(const ParticleEnsemble& ens,
                                  const InteractionKernel& kernel) {
  const int N = ens.N;
  const int d = ens.dim();
  std::vector<double> acc(static_cast<std::size_t>(N) * d, 0.0);
  const double inv_n = 1.0 / N;
  double disp[3];
  for (int i = 0; i < N; ++i) {
    auto xi = ens.position(i);
    auto vi = ens.velocity(i);
    double* ai = acc.data() + static_cast<std::size_t>(i) * d;
    for (int j = i + 1; j < N; ++j) {
      auto xj = ens.position(j);
      auto vj = ens.velocity(j);
      double s = 0.0;
      for (int k = 0; k < d; ++k) {
        disp[k] = ens.torus.disp1(xi[k], xj[k]);
        s += disp[k] * disp[k];
      }
      const double w = kernel.eval_sq(s) * inv_n;
      double* aj = acc.data() + static_cast<std::size_t>(j) * d;
      for (int k = 0; k < d; ++k) {
        const double f = w * (vj[k] - vi[k]);
        ai[k] += f;
        aj[k] -= f;
      }
    }
  }
  return acc;
}

// One classical RK4 step of the coupled position/velocity system; stage
// positions stay unwrapped (the kernel is evaluated through minimal-image
// displacements, which is periodic), final positions are wrapped.
inline void step_cs(ParticleEnsemble& ens, const InteractionKernel& kernel,
                    double dt) {
  if (!(dt > 0.0)) throw NumericError("step_cs: dt must be > 0");
  const std::size_t n = ens.pos.size();
  ParticleEnsemble stage = ens;

  std::vector<double> kx1 = ens.vel;
  std::vector<double> kv1 = cs_rhs(ens, kernel);

  for (std::size_t i = 0; i < n; ++i) {
    stage.pos[i] = ens.pos[i] + 0.5 * dt * kx1[i];
    stage.vel[i] = ens.vel[i] + 0.5 * dt * kv1[i];
  }
  std::vector<double> kx2 = stage.vel;
  std::vector<double> kv2 = cs_rhs(stage, kernel);

  for (std::size_t i = 0; i < n; ++i) {
    stage.pos[i] = ens.pos[i] + 0.5 * dt * kx2[i];
    stage.vel[i] = ens.vel[i] + 0.5 * dt * kv2[i];
  }
  std::vector<double> kx3 = stage.vel;
  std::vector<double> kv3 = cs_rhs(stage, kernel);

  for (std::size_t i = 0; i < n; ++i) {
    stage.pos[i] = ens.pos[i] + dt * kx3[i];
    stage.vel[i] = ens.vel[i] + dt * kv3[i];
  }
  std::vector<double> kx4 = stage.vel;
  std::vector<double> kv4 = cs_rhs(stage, kernel);

  const double w = dt / 6.0;
  for (std::size_t i = 0; i < n; ++i) {
    ens.pos[i] += w * (kx1[i] + 2.0 * kx2[i] + 2.0 * kx3[i] + kx4[i]);
    ens.vel[i] += w * (kv1[i] + 2.0 * kv2[i] + 2.0 * kv3[i] + kv4[i]);
  }
  ens.wrap_positions();
}

// Euler-Maruyama step of the stochastic system (d = 1): every particle sees
// the same Brownian increment dB ~ Normal(0, dt), and the noise coefficient
// sigma (v_i - vbar) sums to zero so the mean velocity is conserved pathwise.
inline void step_cs_stochastic(ParticleEnsemble& ens,
                               const InteractionKernel& kernel, double sigma,
                               double dt, double dB, double vbar) {
  if (ens.dim() != 1)
    throw ConfigError("step_cs_stochastic: stated for d = 1 only");
  if (!(dt > 0.0)) throw NumericError("step_cs_stochastic: dt must be > 0");
  if (sigma < 0.0) throw ConfigError("step_cs_stochastic: sigma must be >= 0");
  std::vector<double> drift = cs_rhs(ens, kernel);
  for (int i = 0; i < ens.N; ++i) {
    const double v_old = ens.vel[i];
    ens.pos[i] += v_old * dt;
    ens.vel[i] = v_old + drift[i] * dt + sigma * (v_old - vbar) * dB;
  }
  ens.wrap_positions();
}

// (sum_i |v_i - vbar|^2)^{1/2} with vbar the current ensemble mean.
inline double velocity_spread(const ParticleEnsemble& ens) {
  const auto vb = mean_velocity(ens);
  double s = 0.0;
  for (int i = 0; i < ens.N; ++i) {
    auto v = ens.velocity(i);
    for (int k = 0; k < ens.dim(); ++k) {
      const double dv = v[k] - vb[k];
      s += dv * dv;
    }
  }
  return std::sqrt(s);
}

// Largest pairwise geodesic distance; the empirical stand-in for the x_M
// level of the particle flocking bound.
inline double max_pairwise_distance(const ParticleEnsemble& ens) {
  double best = 0.0;
  double disp[3];
  for (int i = 0; i < ens.N; ++i)
    for (int j = i + 1; j < ens.N; ++j) {
      double s = 0.0;
      for (int k = 0; k < ens.dim(); ++k) {
        disp[k] = ens.torus.disp1(ens.position(i)[k], ens.position(j)[k]);
        s += disp[k] * disp[k];
      }
      best = std::max(best, s);
    }
  return std::sqrt(best);
}

struct ParticleTrajectory {
  std::vector<double> times;
  std::vector<ParticleEnsemble> snaps;
  std::uint64_t seed = 0;
};

// Integrate to evenly spaced sample times; each interval is subdivided so
// the step never exceeds dt_max and sample times are hit exactly.
inline ParticleTrajectory simulate_cs(const ParticleEnsemble& initial,
                                      const InteractionKernel& kernel,
                                      double dt_max, double t_end,
                                      int n_samples,
                                      std::uint64_t seed_tag = 0) {
  if (n_samples < 2) throw ConfigError("simulate_cs: need >= 2 samples");
  ParticleTrajectory traj;
  traj.seed = seed_tag;
  ParticleEnsemble ens = initial;
  traj.times.push_back(0.0);
  traj.snaps.push_back(ens);
  for (int s = 1; s < n_samples; ++s) {
    const double t0 = t_end * (s - 1) / (n_samples - 1);
    const double t1 = t_end * s / (n_samples - 1);
    const int steps = std::max(1, (int)std::ceil((t1 - t0) / dt_max - 1e-12));
    const double dt = (t1 - t0) / steps;
    for (int q = 0; q < steps; ++q) step_cs(ens, kernel, dt);
    traj.times.push_back(t1);
    traj.snaps.push_back(ens);
  }
  return traj;
}

struct FlockingFit {
  double exponent = 0.0;
  int points_used = 0;
  bool degenerate = false;
};

// Least-squares slope of log(spread) vs t over the latter half of the
// trajectory; entries below 1e-12 are dropped before they underflow the log.
inline FlockingFit flocking_rate_fit(std::span<const double> times,
                                     std::span<const double> spreads) {
  if (times.size() != spreads.size() || times.size() < 10)
    throw NumericError("flocking_rate_fit: need >= 10 samples");
  const std::size_t start = times.size() / 2;
  std::vector<double> ts, ls;
  for (std::size_t i = start; i < times.size(); ++i) {
    if (spreads[i] < 1e-12) break;
    ts.push_back(times[i]);
    ls.push_back(std::log(spreads[i]));
  }
  FlockingFit fit;
  fit.points_used = static_cast<int>(ts.size());
  if (ts.size() < 2) {
    fit.degenerate = true;
    return fit;
  }
  fit.exponent = least_squares_slope(ts, ls);
  return fit;
}

inline FlockingFit flocking_rate_fit(const ParticleTrajectory& traj) {
  std::vector<double> spreads(traj.snaps.size());
  for (std::size_t i = 0; i < traj.snaps.size(); ++i)
    spreads[i] = velocity_spread(traj.snaps[i]);
  return flocking_rate_fit(traj.times, spreads);
}

// Initial-condition law: uniform boxes for positions and velocities, or von
// Mises positions with concentration k (k = 0 falls back to the uniform box).
// User coordinates are shifted by L/2 onto the canonical chart [0, L).
struct InitialLaw {
  std::array<double, 2> x_box{-20.0, 20.0};
  std::array<double, 2> v_box{-10.0, 10.0};
  double von_mises_k = 0.0;
};

namespace detail {

// Inverse-CDF table for the von Mises position density exp(k cos(theta)).
class VonMisesSampler {
 public:
  explicit VonMisesSampler(double k, int table_size = 4096) : cdf_(table_size + 1) {
    const double pi = SpectralPlan::pi();
    thetas_.resize(table_size + 1);
    cdf_[0] = 0.0;
    double prev = std::exp(k * std::cos(-pi));
    thetas_[0] = -pi;
    for (int i = 1; i <= table_size; ++i) {
      const double th = -pi + 2.0 * pi * i / table_size;
      const double cur = std::exp(k * std::cos(th));
      thetas_[i] = th;
      cdf_[i] = cdf_[i - 1] + 0.5 * (prev + cur);
      prev = cur;
    }
    for (double& c : cdf_) c /= cdf_.back();
  }

  double sample(Rng& rng) const {
    const double u = rng.uniform01();
    auto it = std::upper_bound(cdf_.begin(), cdf_.end(), u);
    std::size_t hi = std::min<std::size_t>(cdf_.size() - 1,
                                           it - cdf_.begin());
    if (hi == 0) hi = 1;
    const std::size_t lo = hi - 1;
    const double span = cdf_[hi] - cdf_[lo];
    const double frac = span > 0.0 ? (u - cdf_[lo]) / span : 0.5;
    return thetas_[lo] + frac * (thetas_[hi] - thetas_[lo]);
  }

 private:
  std::vector<double> thetas_;
  std::vector<double> cdf_;
};

}  // namespace detail

inline ParticleEnsemble sample_ensemble(const InitialLaw& law,
                                        const Torus& torus, int N, Rng& rng) {
  ParticleEnsemble ens(torus, N);
  const double half = 0.5 * torus.L;
  if (law.von_mises_k > 0.0) {
    detail::VonMisesSampler vm(law.von_mises_k);
    const double scale = torus.L / (2.0 * SpectralPlan::pi());
    for (int i = 0; i < N; ++i) {
      auto x = ens.position(i);
      for (int k = 0; k < torus.d; ++k)
        x[k] = torus.wrap1(vm.sample(rng) * scale + half);
    }
  } else {
    for (int i = 0; i < N; ++i) {
      auto x = ens.position(i);
      for (int k = 0; k < torus.d; ++k)
        x[k] = torus.wrap1(rng.uniform(law.x_box[0], law.x_box[1]) + half);
    }
  }
  for (int i = 0; i < N; ++i) {
    auto v = ens.velocity(i);
    for (int k = 0; k < torus.d; ++k)
      v[k] = rng.uniform(law.v_box[0], law.v_box[1]);
  }
  return ens;
}

}  // namespace flocklab
