#pragma once

// ScenarioConfig: flat JSON experiment description. Unknown keys are a hard
// error; every run echoes the effective config into its metadata.

#include <array>
#include <cstdint>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>

#include <json.hpp>

#include "flocklab/core.hpp"
#include "flocklab/kernels.hpp"
#include "flocklab/particles.hpp"

namespace flocklab {

struct ScenarioConfig {
  // domain and discretisation
  int d = 1;
  double L = 40.0;
  int M = 256;
  int N = 1000;
  double t_end = 2.0;
  double dt = 1e-3;  // particle / SPDE time step
  double cfl = 0.4;  // PDE step factor

  // kernel: parametric (lambda, r) unless c_a is given, in which case
  // a = c_a + theta * cos(2 pi g_cos_k x / L)
  double lambda = 50.0;
  double r = 0.5;
  std::optional<double> c_a;
  double theta = 0.0;
  int g_cos_k = 1;

  // mollifier and initial-condition law
  double epsilon = 1.0;
  std::array<double, 2> x_box{-20.0, 20.0};
  std::array<double, 2> v_box{-10.0, 10.0};
  double von_mises_k = 0.0;

  // weight field
  std::string weight_mode = "none";  // none | exponential | exact_frozen
  std::optional<double> weight_rate; // default lambda/2 (or c_a when split)
  double w_min = 0.1;
  double w_max = 10.0;
  std::optional<double> rho_min;     // default 1e-6 / L

  // regularisation (d > 1)
  std::optional<double> reg_v;       // default: inactive on the initial data
  double reg_w = 1.0;
  int reg_radius = 1;

  // noise and replication
  double sigma = 0.0;
  std::uint64_t seed = 12345;
  int realizations = 1;
  bool couple_noise = false;

  // outputs and misc
  int n_samples = 41;
  std::string out;
  bool dealias = false;
  double galilean_shift = 0.0;
  std::optional<double> rho_floor;
  int threads = 1;

  Torus torus() const { return Torus(d, L); }
  GridSpec grid() const { return GridSpec(torus(), M); }
  InteractionKernel kernel() const { return InteractionKernel{lambda, r}; }

  InitialLaw law() const {
    InitialLaw l;
    l.x_box = x_box;
    l.v_box = v_box;
    l.von_mises_k = von_mises_k;
    return l;
  }

  bool split_kernel_given() const { return c_a.has_value(); }

  Field kernel_table(const GridSpec& g) const {
    if (!split_kernel_given()) return build_kernel_table(kernel(), g);
    if (!(*c_a > 0.0) || theta < 0.0 || !(*c_a - theta > 0.0 || theta == 0.0))
      throw ConfigError("config: split kernel must keep a > 0");
    Field table(g.nodes(), *c_a);
    if (theta > 0.0) {
      const double two_pi = 2.0 * SpectralPlan::pi();
      for (std::size_t flat = 0; flat < table.size(); ++flat) {
        std::size_t rem = flat;
        double v = 1.0;
        for (int a = g.dim() - 1; a >= 0; --a) {
          const int idx = static_cast<int>(rem % g.M);
          rem /= g.M;
          v *= std::cos(two_pi * g_cos_k * idx / g.M);
        }
        table[flat] += theta * v;
      }
    }
    return table;
  }

  WeightMode weight_mode_enum() const {
    if (weight_mode == "none") return WeightMode::none;
    if (weight_mode == "exponential") return WeightMode::exponential;
    if (weight_mode == "exact_frozen") return WeightMode::exact_frozen;
    throw ConfigError("config: unknown weight_mode '" + weight_mode + "'");
  }

  double effective_weight_rate() const {
    if (weight_rate) return *weight_rate;
    return split_kernel_given() ? *c_a : 0.5 * lambda;
  }
  double effective_rho_min() const { return rho_min ? *rho_min : 1e-6 / L; }

  void validate() const {
    if (d < 1 || d > 3) throw ConfigError("config: d must be in {1,2,3}");
    if (!(L > 0.0)) throw ConfigError("config: L must be > 0");
    if (M < 4) throw ConfigError("config: M must be >= 4");
    if (N < 1) throw ConfigError("config: N must be >= 1");
    if (!(t_end > 0.0)) throw ConfigError("config: t_end must be > 0");
    if (!(dt > 0.0)) throw ConfigError("config: dt must be > 0");
    if (!(cfl > 0.0)) throw ConfigError("config: cfl must be > 0");
    if (!(epsilon > 0.0)) throw ConfigError("config: epsilon must be > 0");
    if (sigma < 0.0) throw ConfigError("config: sigma must be >= 0");
    if (realizations < 1) throw ConfigError("config: realizations >= 1");
    if (n_samples < 2) throw ConfigError("config: n_samples >= 2");
    if (threads < 1) throw ConfigError("config: threads >= 1");
    if (!(w_min > 0.0) || !(w_max >= w_min))
      throw ConfigError("config: need 0 < w_min <= w_max");
    if (x_box[1] < x_box[0] || v_box[1] < v_box[0])
      throw ConfigError("config: box bounds must be ordered");
    if (von_mises_k < 0.0) throw ConfigError("config: von_mises_k >= 0");
    if (lambda < 0.0 || r < 0.0) throw ConfigError("config: lambda, r >= 0");
    if (reg_w < 0.0) throw ConfigError("config: reg_w >= 0");
    if (reg_radius < 1) throw ConfigError("config: reg_radius >= 1");
    weight_mode_enum();
  }
};

namespace detail {

inline double num(const nlohmann::json& v, const std::string& key) {
  if (!v.is_number()) throw ConfigError("config: '" + key + "' must be a number");
  return v.get<double>();
}
inline int integer(const nlohmann::json& v, const std::string& key) {
  if (!v.is_number_integer())
    throw ConfigError("config: '" + key + "' must be an integer");
  return v.get<int>();
}
inline std::array<double, 2> pair2(const nlohmann::json& v,
                                   const std::string& key) {
  if (!v.is_array() || v.size() != 2)
    throw ConfigError("config: '" + key + "' must be [lo, hi]");
  return {num(v[0], key), num(v[1], key)};
}

}  // namespace detail

inline ScenarioConfig parse_config(const nlohmann::json& root) {
  if (!root.is_object()) throw ConfigError("config: top level must be an object");
  ScenarioConfig c;
  using detail::integer;
  using detail::num;
  using detail::pair2;
  for (auto it = root.begin(); it != root.end(); ++it) {
    const std::string& k = it.key();
    const nlohmann::json& v = it.value();
    if (k == "d") c.d = integer(v, k);
    else if (k == "L") c.L = num(v, k);
    else if (k == "M") c.M = integer(v, k);
    else if (k == "N") c.N = integer(v, k);
    else if (k == "t_end") c.t_end = num(v, k);
    else if (k == "dt") c.dt = num(v, k);
    else if (k == "cfl") c.cfl = num(v, k);
    else if (k == "lambda") c.lambda = num(v, k);
    else if (k == "r") c.r = num(v, k);
    else if (k == "c_a") c.c_a = num(v, k);
    else if (k == "theta") c.theta = num(v, k);
    else if (k == "g_cos_k") c.g_cos_k = integer(v, k);
    else if (k == "epsilon") c.epsilon = num(v, k);
    else if (k == "x_box") c.x_box = pair2(v, k);
    else if (k == "v_box") c.v_box = pair2(v, k);
    else if (k == "von_mises_k") c.von_mises_k = num(v, k);
    else if (k == "weight_mode") {
      if (!v.is_string()) throw ConfigError("config: weight_mode is a string");
      c.weight_mode = v.get<std::string>();
    } else if (k == "weight_rate") c.weight_rate = num(v, k);
    else if (k == "w_min") c.w_min = num(v, k);
    else if (k == "w_max") c.w_max = num(v, k);
    else if (k == "rho_min") c.rho_min = num(v, k);
    else if (k == "reg_v") c.reg_v = num(v, k);
    else if (k == "reg_w") c.reg_w = num(v, k);
    else if (k == "reg_radius") c.reg_radius = integer(v, k);
    else if (k == "sigma") c.sigma = num(v, k);
    else if (k == "seed") {
      if (!v.is_number_unsigned() && !v.is_number_integer())
        throw ConfigError("config: seed must be an integer");
      c.seed = v.get<std::uint64_t>();
    } else if (k == "realizations") c.realizations = integer(v, k);
    else if (k == "couple_noise") {
      if (!v.is_boolean()) throw ConfigError("config: couple_noise is a bool");
      c.couple_noise = v.get<bool>();
    } else if (k == "n_samples") c.n_samples = integer(v, k);
    else if (k == "out") {
      if (!v.is_string()) throw ConfigError("config: out is a string");
      c.out = v.get<std::string>();
    } else if (k == "dealias") {
      if (!v.is_boolean()) throw ConfigError("config: dealias is a bool");
      c.dealias = v.get<bool>();
    } else if (k == "galilean_shift") c.galilean_shift = num(v, k);
    else if (k == "rho_floor") c.rho_floor = num(v, k);
    else if (k == "threads") c.threads = integer(v, k);
    else throw ConfigError("config: unknown key '" + k + "'");
  }
  c.validate();
  return c;
}

inline ScenarioConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file '" + path + "'");
  nlohmann::json root;
  try {
    in >> root;
  } catch (const std::exception& e) {
    throw ConfigError(std::string("config: JSON parse error: ") + e.what());
  }
  return parse_config(root);
}

inline nlohmann::json config_echo(const ScenarioConfig& c) {
  nlohmann::json j;
  j["d"] = c.d;
  j["L"] = c.L;
  j["M"] = c.M;
  j["N"] = c.N;
  j["t_end"] = c.t_end;
  j["dt"] = c.dt;
  j["cfl"] = c.cfl;
  j["lambda"] = c.lambda;
  j["r"] = c.r;
  if (c.c_a) j["c_a"] = *c.c_a;
  j["theta"] = c.theta;
  j["g_cos_k"] = c.g_cos_k;
  j["epsilon"] = c.epsilon;
  j["x_box"] = c.x_box;
  j["v_box"] = c.v_box;
  j["von_mises_k"] = c.von_mises_k;
  j["weight_mode"] = c.weight_mode;
  if (c.weight_rate) j["weight_rate"] = *c.weight_rate;
  j["w_min"] = c.w_min;
  j["w_max"] = c.w_max;
  if (c.rho_min) j["rho_min"] = *c.rho_min;
  if (c.reg_v) j["reg_v"] = *c.reg_v;
  j["reg_w"] = c.reg_w;
  j["reg_radius"] = c.reg_radius;
  j["sigma"] = c.sigma;
  j["seed"] = c.seed;
  j["realizations"] = c.realizations;
  j["couple_noise"] = c.couple_noise;
  j["n_samples"] = c.n_samples;
  j["out"] = c.out;
  j["dealias"] = c.dealias;
  j["galilean_shift"] = c.galilean_shift;
  if (c.rho_floor) j["rho_floor"] = *c.rho_floor;
  j["threads"] = c.threads;
  return j;
}

}  // namespace flocklab
