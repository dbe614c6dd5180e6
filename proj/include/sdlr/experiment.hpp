// Copyright 2026 The sdlr Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

// Declarative experiment description, the runner that evaluates every
// requested (method, rank) pair against a reference and the CSV writer.

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "sdlr/diagnostics.hpp"
#include "sdlr/do_method.hpp"
#include "sdlr/error.hpp"
#include "sdlr/lindblad.hpp"
#include "sdlr/linalg.hpp"
#include "sdlr/models.hpp"
#include "sdlr/random.hpp"
#include "sdlr/sdlr.hpp"
#include "sdlr/time_grid.hpp"

namespace sdlr {

enum class ExperimentKind { gbm, burgers, oscillator, custom_linear };
enum class Method { sdlr, do_method, full_mc, lindblad_ref, lowrank_qme };
enum class Unraveling { lqsd, qsd };

inline const char* to_string(ExperimentKind k) {
  switch (k) {
    case ExperimentKind::gbm: return "gbm";
    case ExperimentKind::burgers: return "burgers";
    case ExperimentKind::oscillator: return "oscillator";
    case ExperimentKind::custom_linear: return "custom-linear";
  }
  return "?";
}

inline const char* to_string(Method m) {
  switch (m) {
    case Method::sdlr: return "sdlr";
    case Method::do_method: return "do";
    case Method::full_mc: return "full_mc";
    case Method::lindblad_ref: return "lindblad_ref";
    case Method::lowrank_qme: return "lowrank_qme";
  }
  return "?";
}

inline const char* to_string(Unraveling u) {
  return u == Unraveling::lqsd ? "lqsd" : "qsd";
}

struct ExperimentConfig {
  ExperimentKind experiment = ExperimentKind::gbm;
  Index n = 20;
  std::vector<Index> ranks{1, 3, 5};
  Index samples = 10000;
  double dt = 1.0 / 300.0;
  double horizon = 1.0;
  std::uint64_t seed = 1;
  std::vector<Method> methods{Method::sdlr, Method::do_method};

  // Initial law: `initial_rank` atoms with p_k proportional to Poisson(k, rate).
  Index initial_rank = 5;
  double poisson_rate = 0.5;

  // gbm / custom-linear
  double theta_scale = 0.22360679774997896;  // sqrt(0.05)
  double eig_min = -4.5;
  double eig_max = -0.5;
  std::vector<double> lambda_real, lambda_imag, theta_real, theta_imag;

  // burgers
  double nu = 0.01;
  double gamma = 0.1;

  // oscillator
  double omega = 1.0;
  double gamma1 = 0.2;
  double gamma2 = 0.0;
  Unraveling unraveling = Unraveling::lqsd;

  std::string output_dir = "sdlr_output";
  Index spectrum_k = 5;
  double records_per_unit_time = 20.0;
};

// Eigenvalue columns actually written: spectrum_k capped at n.
inline Index effective_spectrum_k(const ExperimentConfig& c) {
  return std::min(c.spectrum_k, c.n);
}

// Configuration mirroring the published setup of each experiment.
inline ExperimentConfig default_config(ExperimentKind kind) {
  ExperimentConfig c;
  c.experiment = kind;
  switch (kind) {
    case ExperimentKind::gbm:
    case ExperimentKind::custom_linear:
      c.n = 20;
      c.ranks = {1, 3, 5};
      c.samples = 10000;
      c.dt = 1.0 / 300.0;
      c.methods = {Method::sdlr, Method::do_method};
      break;
    case ExperimentKind::burgers:
      c.n = 21;
      c.ranks = {3, 4, 5};
      c.samples = 10000;
      c.dt = 1.0 / 200.0;
      c.methods = {Method::sdlr, Method::do_method};
      break;
    case ExperimentKind::oscillator:
      c.n = 21;
      c.ranks = {3, 5};
      c.samples = 20000;
      c.dt = 1.0 / 500.0;
      c.methods = {Method::sdlr, Method::lindblad_ref};
      break;
  }
  return c;
}

struct ExperimentInfo {
  ExperimentKind kind;
  const char* name;
  const char* description;
};

inline std::vector<ExperimentInfo> list_experiments() {
  return {
      {ExperimentKind::gbm, "gbm",
       "geometric Brownian motion dX = Lambda X dt + Theta X dW, reference: moment ODE"},
      {ExperimentKind::burgers, "burgers",
       "spectral stochastic Burgers equation, reference: full-rank Monte Carlo (4x samples)"},
      {ExperimentKind::oscillator, "oscillator",
       "damped harmonic oscillator unraveling (lqsd|qsd), reference: RK4 Lindblad"},
      {ExperimentKind::custom_linear, "custom-linear",
       "user-supplied linear SDE (lambda_*/theta_* row-major), reference: moment ODE"},
  };
}

namespace config_detail {

using json = nlohmann::json;

inline std::string path(const std::string& key) { return "config." + key; }

inline double get_number(const json& j, const std::string& key) {
  if (!j.is_number()) throw ConfigError(path(key), "expected a number");
  return j.get<double>();
}

inline Index get_count(const json& j, const std::string& key) {
  if (!j.is_number_integer()) throw ConfigError(path(key), "expected an integer");
  const auto v = j.get<std::int64_t>();
  if (v < 0) throw ConfigError(path(key), "must be non-negative");
  return static_cast<Index>(v);
}

inline std::vector<double> get_numbers(const json& j, const std::string& key) {
  if (!j.is_array()) throw ConfigError(path(key), "expected an array of numbers");
  std::vector<double> out;
  for (std::size_t i = 0; i < j.size(); ++i) {
    out.push_back(get_number(j[i], key + "[" + std::to_string(i) + "]"));
  }
  return out;
}

inline ExperimentKind parse_kind(const json& j) {
  if (!j.is_string()) throw ConfigError(path("experiment"), "expected a string");
  const auto s = j.get<std::string>();
  for (const auto& info : list_experiments()) {
    if (s == info.name) return info.kind;
  }
  throw ConfigError(path("experiment"), "unknown experiment '" + s + "'");
}

inline Method parse_method(const json& j, const std::string& key) {
  if (!j.is_string()) throw ConfigError(path(key), "expected a string");
  const auto s = j.get<std::string>();
  for (Method m : {Method::sdlr, Method::do_method, Method::full_mc, Method::lindblad_ref,
                   Method::lowrank_qme}) {
    if (s == to_string(m)) return m;
  }
  throw ConfigError(path(key), "unknown method '" + s + "'");
}

}  // namespace config_detail

// Throws ConfigError naming the offending field.
inline void validate(const ExperimentConfig& c) {
  using config_detail::path;
  if (c.n < 1) throw ConfigError(path("n"), "must be at least 1");
  if (!(c.dt > 0.0) || !std::isfinite(c.dt)) throw ConfigError(path("dt"), "must be > 0");
  if (!(c.horizon > 0.0) || !std::isfinite(c.horizon)) {
    throw ConfigError(path("T"), "must be > 0");
  }
  if (c.samples < 1) throw ConfigError(path("samples"), "must be at least 1");
  if (c.ranks.empty()) throw ConfigError(path("ranks"), "must list at least one rank");
  for (std::size_t i = 0; i < c.ranks.size(); ++i) {
    if (c.ranks[i] < 1 || c.ranks[i] > c.n) {
      throw ConfigError(path("ranks[" + std::to_string(i) + "]"),
                        "rank must lie in [1, n]");
    }
  }
  if (c.methods.empty()) throw ConfigError(path("methods"), "must list at least one method");
  for (std::size_t i = 0; i < c.methods.size(); ++i) {
    const Method m = c.methods[i];
    const bool quantum_only = m == Method::lindblad_ref || m == Method::lowrank_qme;
    if (quantum_only && c.experiment != ExperimentKind::oscillator) {
      throw ConfigError(path("methods[" + std::to_string(i) + "]"),
                        std::string(to_string(m)) + " requires the oscillator experiment");
    }
    if (m == Method::do_method && c.experiment == ExperimentKind::oscillator) {
      throw ConfigError(path("methods[" + std::to_string(i) + "]"),
                        "do is not available for the oscillator experiment");
    }
  }
  if (c.initial_rank < 1 || c.initial_rank > c.n) {
    throw ConfigError(path("initial_rank"), "must lie in [1, n]");
  }
  if (!(c.poisson_rate > 0.0)) throw ConfigError(path("poisson_rate"), "must be > 0");
  if (c.spectrum_k < 0) throw ConfigError(path("spectrum_k"), "must be non-negative");
  if (!(c.records_per_unit_time > 0.0)) {
    throw ConfigError(path("records_per_unit_time"), "must be > 0");
  }
  switch (c.experiment) {
    case ExperimentKind::gbm:
      if (c.eig_min > c.eig_max) throw ConfigError(path("eig_min"), "must not exceed eig_max");
      break;
    case ExperimentKind::custom_linear: {
      const auto nn = static_cast<std::size_t>(c.n * c.n);
      if (c.lambda_real.size() != nn) {
        throw ConfigError(path("lambda_real"), "must hold n*n row-major entries");
      }
      for (const auto* v : {&c.lambda_imag, &c.theta_real, &c.theta_imag}) {
        if (!v->empty() && v->size() != nn) {
          const char* name = v == &c.lambda_imag  ? "lambda_imag"
                             : v == &c.theta_real ? "theta_real"
                                                  : "theta_imag";
          throw ConfigError(path(name), "must be empty or hold n*n entries");
        }
      }
      break;
    }
    case ExperimentKind::burgers:
      if (c.n % 2 == 0) throw ConfigError(path("n"), "burgers needs an odd mode count");
      if (c.n < 5) throw ConfigError(path("n"), "burgers initial law needs n >= 5");
      if (!(c.nu > 0.0)) throw ConfigError(path("nu"), "must be > 0");
      break;
    case ExperimentKind::oscillator:
      if (c.n < 2) throw ConfigError(path("n"), "oscillator needs n >= 2");
      if (c.gamma1 < 0.0) throw ConfigError(path("gamma1"), "must be >= 0");
      if (c.gamma2 < 0.0) throw ConfigError(path("gamma2"), "must be >= 0");
      break;
  }
}

// Keys absent from `j` keep the experiment's defaults. Unknown keys are
// rejected. "rank_list" and "method_list" are accepted for "ranks" and
// "methods".
inline ExperimentConfig parse_config(const nlohmann::json& j) {
  using namespace config_detail;
  if (!j.is_object()) throw ConfigError("config", "expected a JSON object");
  if (!j.contains("experiment")) throw ConfigError(path("experiment"), "is required");
  ExperimentConfig c = default_config(parse_kind(j.at("experiment")));
  for (const auto& [key, v] : j.items()) {
    if (key == "experiment") continue;
    if (key == "n") c.n = get_count(v, key);
    else if (key == "ranks" || key == "rank_list") {
      if (!v.is_array()) throw ConfigError(path(key), "expected an array of integers");
      c.ranks.clear();
      for (std::size_t i = 0; i < v.size(); ++i) {
        c.ranks.push_back(get_count(v[i], key + "[" + std::to_string(i) + "]"));
      }
    } else if (key == "samples") c.samples = get_count(v, key);
    else if (key == "dt") c.dt = get_number(v, key);
    else if (key == "T") c.horizon = get_number(v, key);
    else if (key == "seed") {
      if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<std::int64_t>() >= 0)) {
        throw ConfigError(path(key), "expected an unsigned 64-bit integer");
      }
      c.seed = v.get<std::uint64_t>();
    } else if (key == "methods" || key == "method_list") {
      if (!v.is_array()) throw ConfigError(path(key), "expected an array of strings");
      c.methods.clear();
      for (std::size_t i = 0; i < v.size(); ++i) {
        c.methods.push_back(parse_method(v[i], key + "[" + std::to_string(i) + "]"));
      }
    } else if (key == "initial_rank") c.initial_rank = get_count(v, key);
    else if (key == "poisson_rate") c.poisson_rate = get_number(v, key);
    else if (key == "theta_scale") c.theta_scale = get_number(v, key);
    else if (key == "eig_min") c.eig_min = get_number(v, key);
    else if (key == "eig_max") c.eig_max = get_number(v, key);
    else if (key == "lambda_real") c.lambda_real = get_numbers(v, key);
    else if (key == "lambda_imag") c.lambda_imag = get_numbers(v, key);
    else if (key == "theta_real") c.theta_real = get_numbers(v, key);
    else if (key == "theta_imag") c.theta_imag = get_numbers(v, key);
    else if (key == "nu") c.nu = get_number(v, key);
    else if (key == "gamma") c.gamma = get_number(v, key);
    else if (key == "omega") c.omega = get_number(v, key);
    else if (key == "gamma1") c.gamma1 = get_number(v, key);
    else if (key == "gamma2") c.gamma2 = get_number(v, key);
    else if (key == "unraveling") {
      if (!v.is_string()) throw ConfigError(path(key), "expected \"lqsd\" or \"qsd\"");
      const auto s = v.get<std::string>();
      if (s == "lqsd") c.unraveling = Unraveling::lqsd;
      else if (s == "qsd") c.unraveling = Unraveling::qsd;
      else throw ConfigError(path(key), "expected \"lqsd\" or \"qsd\", got '" + s + "'");
    } else if (key == "output_dir") {
      if (!v.is_string()) throw ConfigError(path(key), "expected a string");
      c.output_dir = v.get<std::string>();
    } else if (key == "spectrum_k") c.spectrum_k = get_count(v, key);
    else if (key == "records_per_unit_time") c.records_per_unit_time = get_number(v, key);
    else throw ConfigError(path(key), "unknown key");
  }
  validate(c);
  return c;
}

inline ExperimentConfig parse_config_text(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("config", std::string("malformed JSON: ") + e.what());
  }
  return parse_config(j);
}

inline ExperimentConfig load_config(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw ConfigError("config", "cannot open '" + file.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str());
}

inline nlohmann::json to_json(const ExperimentConfig& c) {
  nlohmann::json j;
  j["experiment"] = to_string(c.experiment);
  j["n"] = c.n;
  j["ranks"] = c.ranks;
  j["samples"] = c.samples;
  j["dt"] = c.dt;
  j["T"] = c.horizon;
  j["seed"] = c.seed;
  std::vector<std::string> methods;
  for (Method m : c.methods) methods.emplace_back(to_string(m));
  j["methods"] = methods;
  j["initial_rank"] = c.initial_rank;
  j["poisson_rate"] = c.poisson_rate;
  switch (c.experiment) {
    case ExperimentKind::gbm:
      j["theta_scale"] = c.theta_scale;
      j["eig_min"] = c.eig_min;
      j["eig_max"] = c.eig_max;
      break;
    case ExperimentKind::custom_linear:
      j["lambda_real"] = c.lambda_real;
      j["lambda_imag"] = c.lambda_imag;
      j["theta_real"] = c.theta_real;
      j["theta_imag"] = c.theta_imag;
      break;
    case ExperimentKind::burgers:
      j["nu"] = c.nu;
      j["gamma"] = c.gamma;
      break;
    case ExperimentKind::oscillator:
      j["omega"] = c.omega;
      j["gamma1"] = c.gamma1;
      j["gamma2"] = c.gamma2;
      j["unraveling"] = to_string(c.unraveling);
      break;
  }
  j["output_dir"] = c.output_dir;
  j["spectrum_k"] = c.spectrum_k;
  j["records_per_unit_time"] = c.records_per_unit_time;
  return j;
}

// ---------------------------------------------------------------------------
// Problem construction

// Burgers initial law: 1, sqrt2 sin(2 pi m z), sqrt2 cos(2 pi m z) for
// m = floor(k/2), k = 2..5, in Fourier coordinates.
inline CMat burgers_initial_atoms(Index n) {
  const Index half = (n - 1) / 2;
  if (half < 2) throw DomainError("burgers_initial_atoms: need n >= 5");
  const double s = std::sqrt(0.5);
  CMat atoms = CMat::Zero(n, 5);
  atoms(half, 0) = 1.0;
  for (Index k = 2; k <= 5; ++k) {
    const Index m = k / 2;
    if (k % 2 == 0) {  // sin: -i/sqrt2 at +m, +i/sqrt2 at -m
      atoms(half + m, k - 1) = Complex(0.0, -s);
      atoms(half - m, k - 1) = Complex(0.0, s);
    } else {  // cos
      atoms(half + m, k - 1) = s;
      atoms(half - m, k - 1) = s;
    }
  }
  return atoms;
}

struct GbmInstance {
  CMat lambda;
  CMat theta;
  DiscreteInitialMeasure initial;
};

// Lambda = Q D Q^H with D uniform on [eig_min, eig_max] and Q Haar-like
// unitary; Theta = theta_scale Id; orthonormal random atoms.
inline GbmInstance make_gbm_instance(Index n, Index atoms, double eig_min, double eig_max,
                                     double theta_scale, double poisson_rate,
                                     CounterRng rng) {
  CounterRng rd = rng.fork(1);
  RVec d(n);
  for (Index i = 0; i < n; ++i) d(i) = eig_min + (eig_max - eig_min) * rd.uniform();
  CounterRng rq = rng.fork(2);
  const CMat q = random_stiefel(n, n, rq).matrix();
  CMat lambda = q * d.cast<Complex>().asDiagonal() * q.adjoint();
  CMat theta = theta_scale * CMat::Identity(n, n);
  CounterRng ra = rng.fork(3);
  CMat x = random_stiefel(n, atoms, ra).matrix();
  return {std::move(lambda), std::move(theta),
          DiscreteInitialMeasure(std::move(x),
                                 poisson_weights(static_cast<std::size_t>(atoms),
                                                 poisson_rate))};
}

struct RunOutput {
  Method method;
  Index rank;
  std::string label;  // "<method>_r<rank>"
  std::vector<TrajectoryRecord> records;
  std::optional<std::string> error;
};

struct ExperimentResult {
  ExperimentConfig config;
  std::vector<RunOutput> runs;
  nlohmann::json metadata;

  const RunOutput* find(Method m, Index rank) const {
    for (const auto& r : runs) {
      if (r.method == m && r.rank == rank) return &r;
    }
    return nullptr;
  }
};

namespace run_detail {

struct Reference {
  std::vector<double> times;
  std::vector<std::optional<CVec>> means;  // nullopt: no reference mean
  std::vector<HermitianMatrix> seconds;
};

struct Problem {
  SdeModel model;
  DiscreteInitialMeasure initial;
  std::optional<LindbladGenerator> generator;
  Reference reference;
  std::optional<GrowthRate> growth;
};

inline CMat matrix_from(const std::vector<double>& re, const std::vector<double>& im,
                        Index n) {
  CMat m = CMat::Zero(n, n);
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < n; ++j) {
      const auto k = static_cast<std::size_t>(i * n + j);
      m(i, j) = Complex(re.empty() ? 0.0 : re[k], im.empty() ? 0.0 : im[k]);
    }
  }
  return m;
}

inline Reference linear_reference(const CMat& lambda, const std::vector<CMat>& thetas,
                                  const DiscreteInitialMeasure& initial, double horizon,
                                  double dt, std::int64_t stride) {
  Reference ref;
  for (auto& s : moment_ode_oracle(lambda, thetas, initial.mean(), initial.second_moment(),
                                   horizon, dt, stride)) {
    ref.times.push_back(s.t);
    ref.means.emplace_back(std::move(s.mean));
    ref.seconds.push_back(std::move(s.second));
  }
  return ref;
}

inline constexpr std::uint64_t kNoiseLabel = 0x6e6f697365ULL;
inline constexpr std::uint64_t kSampleLabel = 0x73616d706cULL;
inline constexpr std::uint64_t kModelLabel = 0x6d6f64656cULL;
inline constexpr std::uint64_t kReferenceLabel = 0x7265660000ULL;

inline bool record_step(std::int64_t s, std::int64_t steps, std::int64_t stride) {
  return s == 0 || s % stride == 0 || s == steps;
}

}  // namespace run_detail

// Burgers full-rank reference uses this many times the configured samples.
inline constexpr Index kBurgersReferenceFactor = 4;

inline ExperimentResult run_experiment(const ExperimentConfig& config) {
  using namespace run_detail;
  validate(config);
  const Index n = config.n;
  const std::int64_t steps = step_count(config.horizon, config.dt);
  const std::int64_t stride = record_stride(config.dt, config.records_per_unit_time);
  const CounterRng root(config.seed);
  const NoiseSource noise(hash_keys(config.seed, kNoiseLabel), 0);
  const Index k_eigs = effective_spectrum_k(config);

  ExperimentResult result;
  result.config = config;
  result.metadata["config"] = to_json(config);
  result.metadata["steps"] = steps;
  result.metadata["record_stride"] = stride;

  // Model, initial law and reference.
  std::optional<Problem> problem;
  switch (config.experiment) {
    case ExperimentKind::gbm:
    case ExperimentKind::custom_linear: {
      CMat lambda, theta;
      CMat atoms;
      std::vector<double> weights =
          poisson_weights(static_cast<std::size_t>(config.initial_rank), config.poisson_rate);
      if (config.experiment == ExperimentKind::gbm) {
        auto inst = make_gbm_instance(n, config.initial_rank, config.eig_min, config.eig_max,
                                      config.theta_scale, config.poisson_rate,
                                      root.fork(kModelLabel));
        lambda = inst.lambda;
        theta = inst.theta;
        atoms = inst.initial.atoms();
      } else {
        lambda = matrix_from(config.lambda_real, config.lambda_imag, n);
        theta = matrix_from(config.theta_real, config.theta_imag, n);
        CounterRng ra = root.fork(kModelLabel).fork(3);
        atoms = random_stiefel(n, config.initial_rank, ra).matrix();
      }
      DiscreteInitialMeasure initial(atoms, weights);
      SdeModel model = make_gbm(lambda, theta);
      Reference ref = linear_reference(lambda, {theta}, initial, config.horizon, config.dt, stride);
      GrowthRate g = growth_rate_bound(model);
      problem.emplace(Problem{std::move(model), std::move(initial), std::nullopt,
                              std::move(ref), std::move(g)});
      result.metadata["reference"] = "moment ODE (RK4)";
      break;
    }
    case ExperimentKind::burgers: {
      SdeModel model = make_burgers(n, config.nu, config.gamma);
      DiscreteInitialMeasure initial(burgers_initial_atoms(n),
                                     poisson_weights(5, config.poisson_rate));
      const Index ref_samples = kBurgersReferenceFactor * config.samples;
      CounterRng rs = root.fork(kReferenceLabel);
      CMat x = sample_initial(initial, ref_samples, rs);
      const NoiseSource ref_noise(hash_keys(config.seed, kReferenceLabel), 1);
      Reference ref;
      for (std::int64_t s = 0; s <= steps; ++s) {
        if (record_step(s, steps, stride)) {
          const auto [m, sec] = detail::column_moments(x);
          ref.times.push_back(static_cast<double>(s) * config.dt);
          ref.means.emplace_back(m);
          ref.seconds.push_back(HermitianMatrix::from_hermitian_part(sec));
        }
        if (s == steps) break;
        x = euler_maruyama_step(model, x, static_cast<double>(s) * config.dt, config.dt,
                                draw_noise(ref_noise, ref_samples,
                                           static_cast<std::uint64_t>(s), 1));
      }
      problem.emplace(Problem{std::move(model), std::move(initial), std::nullopt,
                              std::move(ref), std::nullopt});
      result.metadata["reference"] = "full-rank Euler-Maruyama Monte Carlo";
      result.metadata["reference_samples"] = ref_samples;
      break;
    }
    case ExperimentKind::oscillator: {
      LindbladGenerator gen =
          make_damped_oscillator(n, config.omega, config.gamma1, config.gamma2);
      const Index levels = std::min<Index>(config.initial_rank, n);
      DiscreteInitialMeasure initial(
          CMat::Identity(n, levels),
          poisson_weights(static_cast<std::size_t>(levels), config.poisson_rate));
      SdeModel model =
          config.unraveling == Unraveling::lqsd ? make_lqsd(gen) : make_qsd(gen);
      Reference ref;
      const auto traj =
          integrate_lindblad(gen, initial.second_moment(), config.horizon, config.dt, stride);
      // The LQSD mean obeys dm/dt = J m; QSD has no closed mean equation.
      std::optional<std::vector<MomentSnapshot>> means;
      if (config.unraveling == Unraveling::lqsd) {
        means = moment_ode_oracle(gen.effective(), {}, initial.mean(),
                                  HermitianMatrix::zero(n), config.horizon, config.dt, stride);
      }
      for (std::size_t i = 0; i < traj.size(); ++i) {
        ref.times.push_back(traj[i].t);
        ref.seconds.push_back(traj[i].rho);
        if (means) ref.means.emplace_back((*means)[i].mean);
        else ref.means.emplace_back(std::nullopt);
      }
      GrowthRate g = growth_rate_bound(model);
      problem.emplace(Problem{std::move(model), std::move(initial), gen, std::move(ref),
                              std::move(g)});
      result.metadata["reference"] = "RK4 Lindblad equation";
      result.metadata["unraveling"] = to_string(config.unraveling);
      if (config.unraveling == Unraveling::qsd) {
        result.metadata["rel_err_mean"] = "undefined for qsd (reported as inf)";
      }
      break;
    }
  }
  const Problem& p = *problem;
  const Reference& ref = p.reference;

  CounterRng rs = root.fork(kSampleLabel);
  const CMat x0 = sample_initial(p.initial, config.samples, rs);

  // Builds one diagnostic row from moments at record index `idx`.
  auto make_record = [&](std::size_t idx, const MomentSummary& mom, double residual,
                         std::optional<double> bound) {
    TrajectoryRecord rec;
    rec.t = ref.times[idx];
    const auto& ref_mean = ref.means[idx];
    const RelativeErrors err = relative_errors(ref_mean ? *ref_mean : CVec::Zero(n),
                                               ref.seconds[idx].matrix(), mom);
    rec.rel_err_mean = err.mean;
    rec.rel_err_second = err.second;
    rec.top_eigs = top_spectrum(mom.second_moment, k_eigs);
    rec.residual_eps_sq = residual;
    rec.trace = mom.second_moment.trace();
    rec.gronwall_bound = bound;
    return rec;
  };

  auto absolute_error = [&](std::size_t idx, const MomentSummary& mom) {
    return (ref.seconds[idx].matrix() - mom.second_moment.matrix()).norm();
  };

  for (const Method method : config.methods) {
    const bool rankless = method == Method::full_mc || method == Method::lindblad_ref;
    const std::vector<Index> ranks = rankless ? std::vector<Index>{n} : config.ranks;
    for (const Index rank : ranks) {
      RunOutput run{method, rank, std::string(to_string(method)) + "_r" + std::to_string(rank),
                    {}, std::nullopt};
      try {
        std::size_t idx = 0;
        switch (method) {
          case Method::sdlr: {
            LowRankState state = init_low_rank(x0, rank);
            double e0 = 0.0;
            double eps_max = 0.0;
            for (std::int64_t s = 0;; ++s) {
              if (record_step(s, steps, stride)) {
                const MomentSummary mom = ensemble_moments(state);
                const double res = residual_epsilon_sq(state, p.model);
                eps_max = std::max(eps_max, res);
                std::optional<double> bound;
                if (p.growth) {
                  if (s == 0) e0 = absolute_error(idx, mom);
                  bound = gronwall_bound(e0, eps_max, *p.growth, state.t);
                }
                run.records.push_back(make_record(idx++, mom, res, bound));
              }
              if (s == steps) break;
              state = sdlr_advance(state, p.model, config.dt, noise);
            }
            break;
          }
          case Method::do_method: {
            // The mean accounts for one rank.
            DoState state = do_init(x0, rank - 1);
            for (std::int64_t s = 0;; ++s) {
              if (record_step(s, steps, stride)) {
                const MomentSummary mom = do_moments(state);
                double res = 0.0;
                if (state.rank() < n) {
                  // Defect of the diffusion at the DO states relative to the DO frame.
                  const CMat x = state.states();
                  const auto bs = p.model.diffusion(x, state.t);
                  CMat acc = CMat::Zero(n, n);
                  for (const CMat& bj : bs) {
                    const CMat qb = complement_apply(state.frame, bj);
                    acc += qb * qb.adjoint();
                  }
                  res = acc.norm() / static_cast<double>(state.samples());
                }
                run.records.push_back(make_record(idx++, mom, res, std::nullopt));
              }
              if (s == steps) break;
              state = do_advance(state, p.model, config.dt, noise);
            }
            break;
          }
          case Method::full_mc: {
            CMat x = x0;
            for (std::int64_t s = 0;; ++s) {
              if (record_step(s, steps, stride)) {
                const auto [m, sec] = detail::column_moments(x);
                MomentSummary mom{m, HermitianMatrix::from_hermitian_part(sec),
                                  HermitianMatrix::from_hermitian_part(sec)};
                run.records.push_back(make_record(idx++, mom, 0.0, std::nullopt));
              }
              if (s == steps) break;
              x = euler_maruyama_step(p.model, x, static_cast<double>(s) * config.dt,
                                      config.dt,
                                      draw_noise(noise, config.samples,
                                                 static_cast<std::uint64_t>(s),
                                                 p.model.num_channels()));
            }
            break;
          }
          case Method::lindblad_ref: {
            for (std::size_t i = 0; i < ref.times.size(); ++i) {
              MomentSummary mom{ref.means[i] ? *ref.means[i] : CVec::Zero(n), ref.seconds[i],
                                ref.seconds[i]};
              run.records.push_back(make_record(i, mom, 0.0, std::nullopt));
            }
            break;
          }
          case Method::lowrank_qme: {
            const HermitianMatrix rho0 = p.initial.second_moment();
            const EigenDecomposition eig = hermitian_eigen(rho0);
            LowRankQmeState s0;
            s0.frame = StiefelFrame(eig.vectors.leftCols(rank));
            s0.sigma = HermitianMatrix::from_hermitian_part(
                s0.frame.matrix().adjoint() * rho0.matrix() * s0.frame.matrix());
            QmeOptions opts;
            opts.stride = stride;
            std::vector<LowRankQmeState> traj;
            std::optional<std::string> failure;
            try {
              traj = integrate_lowrank_qme(*p.generator, s0, config.horizon, config.dt, opts);
            } catch (const SingularityError& e) {
              failure = e.what();
            }
            for (const auto& st : traj) {
              MomentSummary mom{CVec::Zero(n), st.density(), st.sigma};
              const auto pr = projectors(st.frame);
              const CMat lr = p.generator->apply(mom.second_moment.matrix());
              const double res =
                  (pr.complement.matrix() * lr * pr.complement.matrix()).norm();
              TrajectoryRecord rec = make_record(idx++, mom, res, std::nullopt);
              rec.rel_err_mean = std::numeric_limits<double>::infinity();
              run.records.push_back(std::move(rec));
            }
            if (failure) throw SingularityError(*failure, 0.0);
            break;
          }
        }
      } catch (const Error& e) {
        run.error = e.what();
        result.metadata["errors"][run.label] = e.what();
      }
      result.runs.push_back(std::move(run));
    }
  }
  return result;
}

// ---------------------------------------------------------------------------
// CSV output

inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string csv_header(Index k) {
  std::string h = "t,rel_err_mean,rel_err_second";
  for (Index i = 1; i <= k; ++i) h += ",eig" + std::to_string(i);
  h += ",residual_eps_sq,trace,gronwall_bound";
  return h;
}

inline void write_csv(const std::vector<TrajectoryRecord>& records,
                      const std::filesystem::path& file, Index k) {
  std::ofstream out(file, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("write_csv: cannot open '" + file.string() + "' for writing");
  out << csv_header(k) << '\n';
  for (const auto& r : records) {
    if (static_cast<Index>(r.top_eigs.size()) != k) {
      throw DimensionError("write_csv: record carries " + std::to_string(r.top_eigs.size()) +
                           " eigenvalues, header expects " + std::to_string(k));
    }
    out << format_double(r.t) << ',' << format_double(r.rel_err_mean) << ','
        << format_double(r.rel_err_second);
    for (double e : r.top_eigs) out << ',' << format_double(e);
    out << ',' << format_double(r.residual_eps_sq) << ',' << format_double(r.trace) << ',';
    if (r.gronwall_bound) out << format_double(*r.gronwall_bound);
    out << '\n';
  }
  out.flush();
  if (!out) throw Error("write_csv: write failed for '" + file.string() + "'");
}

// Writes <label>.csv per run and metadata.json into `dir`.
inline void write_experiment(const ExperimentResult& result, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error("cannot create output directory '" + dir.string() + "': " + ec.message());
  for (const auto& run : result.runs) {
    write_csv(run.records, dir / (run.label + ".csv"), effective_spectrum_k(result.config));
  }
  std::ofstream meta(dir / "metadata.json", std::ios::binary | std::ios::trunc);
  if (!meta) throw Error("cannot write metadata.json in '" + dir.string() + "'");
  meta << result.metadata.dump(2) << '\n';
}

}  // namespace sdlr
