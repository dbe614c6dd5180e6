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

// SDE models dX = a(X, t) dt + sum_j b_j(X, t) dW_j on C^n driven by
// independent real Brownian motions, plus the concrete constructors used by
// the experiments and discrete initial laws.
//
// Models evaluate on batches: a state matrix holds one state per column.

#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "sdlr/error.hpp"
#include "sdlr/lindblad.hpp"
#include "sdlr/linalg.hpp"
#include "sdlr/parallel.hpp"
#include "sdlr/random.hpp"

namespace sdlr {

enum class Linearity { linear, nonlinear };

// a(x) = drift * x, b_j(x) = diffusion[j] * x.
struct LinearCoefficients {
  CMat drift;
  std::vector<CMat> diffusion;
};

class SdeModel {
 public:
  using DriftFn = std::function<CMat(const CMat& states, double t)>;
  using DiffusionFn = std::function<std::vector<CMat>(const CMat& states, double t)>;

  SdeModel(std::string name, Index dim, Index channels, DriftFn drift,
           DiffusionFn diffusion, Linearity linearity)
      : name_(std::move(name)),
        dim_(dim),
        channels_(channels),
        drift_(std::move(drift)),
        diffusion_(std::move(diffusion)),
        linearity_(linearity) {}

  const std::string& name() const noexcept { return name_; }
  Index dim() const noexcept { return dim_; }
  Index num_channels() const noexcept { return channels_; }
  Linearity linearity() const noexcept { return linearity_; }

  const std::optional<LinearCoefficients>& coefficients() const noexcept {
    return coefficients_;
  }
  const std::optional<LindbladGenerator>& generator() const noexcept {
    return generator_;
  }

  SdeModel& with_coefficients(LinearCoefficients c) {
    coefficients_ = std::move(c);
    return *this;
  }
  SdeModel& with_generator(LindbladGenerator g) {
    generator_ = std::move(g);
    return *this;
  }

  // Drift for every column of `states`.
  CMat drift(const CMat& states, double t) const {
    check_input(states);
    CMat out = drift_(states, t);
    check_output(out, states.cols(), "drift");
    return out;
  }

  // One n x m matrix per channel.
  std::vector<CMat> diffusion(const CMat& states, double t) const {
    check_input(states);
    std::vector<CMat> out = diffusion_(states, t);
    if (static_cast<Index>(out.size()) != channels_) {
      throw DimensionError(name_ + ": diffusion returned " +
                           std::to_string(out.size()) + " channels, expected " +
                           std::to_string(channels_));
    }
    for (const CMat& b : out) check_output(b, states.cols(), "diffusion");
    return out;
  }

 private:
  void check_input(const CMat& states) const {
    if (states.rows() != dim_) {
      throw DimensionError(name_ + ": state dimension " +
                           std::to_string(states.rows()) + ", expected " +
                           std::to_string(dim_));
    }
  }

  void check_output(const CMat& out, Index cols, const char* what) const {
    if (out.rows() != dim_ || out.cols() != cols) {
      throw DimensionError(name_ + ": " + what + " has shape " +
                           detail::shape(out));
    }
    if (!out.allFinite()) {
      for (Index c = 0; c < out.cols(); ++c) {
        if (!out.col(c).allFinite()) {
          throw NumericError(name_ + ": non-finite " + what + " at column " +
                                 std::to_string(c),
                             static_cast<long>(c));
        }
      }
    }
  }

  std::string name_;
  Index dim_;
  Index channels_;
  DriftFn drift_;
  DiffusionFn diffusion_;
  Linearity linearity_;
  std::optional<LinearCoefficients> coefficients_;
  std::optional<LindbladGenerator> generator_;
};

namespace detail {

// Runs f, translating chunk-local sample indices in NumericError to global
// ensemble indices.
template <typename F>
void with_sample_offset(Index offset, F&& f) {
  try {
    f();
  } catch (const NumericError& e) {
    if (e.index() < 0) throw;
    const long global = e.index() + static_cast<long>(offset);
    throw NumericError("non-finite model output for ensemble sample " +
                           std::to_string(global),
                       global);
  }
}

}  // namespace detail

struct ModelEvaluation {
  CVec drift;
  std::vector<CVec> diffusion;
};

inline ModelEvaluation eval_model(const SdeModel& model, const CVec& x, double t) {
  if (!x.allFinite()) throw NumericError("eval_model: non-finite state");
  const CMat state = x;
  ModelEvaluation out;
  out.drift = model.drift(state, t).col(0);
  for (const CMat& b : model.diffusion(state, t)) out.diffusion.push_back(b.col(0));
  return out;
}

// a(x) = drift x, b_j(x) = diffusion_j x.
inline SdeModel make_linear(CMat drift, std::vector<CMat> diffusion,
                            std::string name = "linear") {
  detail::require_square(drift, "make_linear");
  for (const CMat& d : diffusion) detail::require_same_shape(drift, d, "make_linear");
  const Index n = drift.rows();
  const auto channels = static_cast<Index>(diffusion.size());
  LinearCoefficients coeffs{drift, diffusion};
  SdeModel model(
      std::move(name), n, channels,
      [lam = std::move(drift)](const CMat& x, double) -> CMat { return lam * x; },
      [thetas = std::move(diffusion)](const CMat& x, double) {
        std::vector<CMat> out;
        out.reserve(thetas.size());
        for (const CMat& th : thetas) out.push_back(th * x);
        return out;
      },
      Linearity::linear);
  model.with_coefficients(std::move(coeffs));
  return model;
}

// Geometric Brownian motion dX = Lambda X dt + Theta X dW.
inline SdeModel make_gbm(CMat lambda, CMat theta) {
  detail::require_square(lambda, "make_gbm");
  detail::require_same_shape(lambda, theta, "make_gbm");
  return make_linear(std::move(lambda), {std::move(theta)}, "gbm");
}

// Fourier-Galerkin truncation of the periodic stochastic Burgers equation
//   dh = (nu h_zz - h h_z) dt + gamma cos(2 pi z) dW
// on modes k = -(n-1)/2 .. (n-1)/2, stored at slot k + (n-1)/2.
inline SdeModel make_burgers(Index n, double nu, double gamma) {
  if (n < 1 || n % 2 == 0) {
    throw DomainError("make_burgers: n must be a positive odd count, got " +
                      std::to_string(n));
  }
  if (!(nu > 0.0)) throw DomainError("make_burgers: viscosity must be positive");
  const Index half = (n - 1) / 2;
  const double two_pi = 2.0 * std::numbers::pi;

  RVec viscous(n);
  for (Index s = 0; s < n; ++s) {
    const double k = static_cast<double>(s - half);
    viscous(s) = -(two_pi * k) * (two_pi * k) * nu;
  }
  CVec forcing = CVec::Zero(n);
  if (half >= 1) {
    forcing(half + 1) = gamma / 2.0;
    forcing(half - 1) = gamma / 2.0;
  }

  auto drift = [n, half, two_pi, viscous](const CMat& x, double) -> CMat {
    CMat out(n, x.cols());
    for (Index c = 0; c < x.cols(); ++c) {
      for (Index s = 0; s < n; ++s) {
        const Index k = s - half;
        Complex conv{};
        // k' ranges over stored modes with k - k' also stored.
        const Index lo = std::max(-half, k - half);
        const Index hi = std::min(half, k + half);
        for (Index kp = lo; kp <= hi; ++kp) {
          conv += x(k - kp + half, c) * x(kp + half, c) *
                  Complex(0.0, two_pi * static_cast<double>(kp));
        }
        out(s, c) = viscous(s) * x(s, c) - conv;
      }
    }
    return out;
  };
  auto diffusion = [forcing](const CMat& x, double) {
    return std::vector<CMat>{forcing.replicate(1, x.cols())};
  };
  return SdeModel("burgers", n, 1, std::move(drift), std::move(diffusion),
                  Linearity::nonlinear);
}

// Linear quantum state diffusion:
//   a(x) = (-iH - 1/2 sum L^H L) x,
//   b_{k,1}(x) = L_k x / sqrt(2),  b_{k,2}(x) = i L_k x / sqrt(2).
inline SdeModel make_lqsd(const LindbladGenerator& gen) {
  const double s = std::sqrt(0.5);
  std::vector<CMat> thetas;
  for (const CMat& l : gen.jump_operators()) {
    thetas.push_back(s * l);
    thetas.push_back((s * kI) * l);
  }
  SdeModel model = make_linear(gen.effective(), std::move(thetas), "lqsd");
  model.with_generator(gen);
  return model;
}

// Nonlinear quantum state diffusion. With l_k = <x, L_k x>:
//   a(x) = (-iH + sum_k [conj(l_k) L_k - 1/2 L_k^H L_k - 1/2 |l_k|^2]) x,
//   b_{k,1}(x) = (L_k - l_k) x / sqrt(2),  b_{k,2}(x) = i (L_k - l_k) x / sqrt(2).
// conj(l_k) = <x, L_k^H x>.
inline SdeModel make_qsd(const LindbladGenerator& gen) {
  const Index n = gen.dim();
  const auto ops = gen.jump_operators();
  const CMat j = gen.effective();
  auto expectations = [ops](const CMat& x) {
    std::vector<std::pair<CMat, CVec>> out;  // (L_k X, <x, L_k x> per column)
    out.reserve(ops.size());
    for (const CMat& l : ops) {
      CMat lx = l * x;
      CVec ell = (x.conjugate().cwiseProduct(lx)).colwise().sum().transpose();
      out.emplace_back(std::move(lx), std::move(ell));
    }
    return out;
  };
  auto drift = [j, expectations](const CMat& x, double) -> CMat {
    CMat out = j * x;
    for (const auto& [lx, ell] : expectations(x)) {
      for (Index c = 0; c < x.cols(); ++c) {
        const Complex m = std::conj(ell(c));
        out.col(c) += m * lx.col(c) - 0.5 * std::norm(m) * x.col(c);
      }
    }
    return out;
  };
  auto diffusion = [expectations](const CMat& x, double) {
    const double s = std::sqrt(0.5);
    std::vector<CMat> out;
    for (const auto& [lx, ell] : expectations(x)) {
      CMat shifted = lx - x * ell.asDiagonal();
      out.push_back(s * shifted);
      out.push_back((s * kI) * shifted);
    }
    return out;
  };
  SdeModel model("qsd", n, 2 * static_cast<Index>(ops.size()), std::move(drift),
                 std::move(diffusion), Linearity::nonlinear);
  model.with_generator(gen);
  return model;
}

// || a x^H + x a^H + sum_j b_j b_j^H - L(x x^H) ||_HS
inline double verify_unraveling(const SdeModel& model, const LindbladGenerator& gen,
                                const CVec& x, double t = 0.0) {
  if (model.dim() != gen.dim() || x.size() != gen.dim()) {
    throw DimensionError("verify_unraveling: dimension mismatch");
  }
  const ModelEvaluation ev = eval_model(model, x, t);
  CMat lhs = ev.drift * x.adjoint() + x * ev.drift.adjoint();
  for (const CVec& b : ev.diffusion) lhs += b * b.adjoint();
  const CMat xx = x * x.adjoint();
  return (lhs - gen.apply(xx)).norm();
}

// Finitely supported probability law: atom k (column k) has weight p_k.
class DiscreteInitialMeasure {
 public:
  DiscreteInitialMeasure(CMat atoms, std::vector<double> weights)
      : atoms_(std::move(atoms)), weights_(std::move(weights)) {
    if (atoms_.cols() != static_cast<Index>(weights_.size()) || weights_.empty()) {
      throw DimensionError("DiscreteInitialMeasure: need one weight per atom");
    }
    double total = 0.0;
    for (double w : weights_) {
      if (!(w >= 0.0)) throw DomainError("DiscreteInitialMeasure: negative weight");
      total += w;
    }
    if (std::abs(total - 1.0) > 1e-12) {
      throw DomainError("DiscreteInitialMeasure: weights sum to " +
                        std::to_string(total));
    }
    detail::require_finite(atoms_, "DiscreteInitialMeasure");
  }

  Index dim() const noexcept { return atoms_.rows(); }
  Index size() const noexcept { return atoms_.cols(); }
  const CMat& atoms() const noexcept { return atoms_; }
  const std::vector<double>& weights() const noexcept { return weights_; }

  CVec mean() const {
    CVec m = CVec::Zero(dim());
    for (Index k = 0; k < size(); ++k) m += weights_[k] * atoms_.col(k);
    return m;
  }

  HermitianMatrix second_moment() const {
    CMat m = CMat::Zero(dim(), dim());
    for (Index k = 0; k < size(); ++k) {
      m += weights_[k] * atoms_.col(k) * atoms_.col(k).adjoint();
    }
    return HermitianMatrix::from_hermitian_part(m);
  }

 private:
  CMat atoms_;
  std::vector<double> weights_;
};

// i.i.d. draws by inverse CDF; column i is sample i.
inline CMat sample_initial(const DiscreteInitialMeasure& measure, Index count,
                           CounterRng& rng) {
  std::vector<double> cdf(measure.weights().size());
  double acc = 0.0;
  for (std::size_t k = 0; k < cdf.size(); ++k) {
    acc += measure.weights()[k];
    cdf[k] = acc;
  }
  CMat out(measure.dim(), count);
  for (Index i = 0; i < count; ++i) {
    const double u = rng.uniform() * acc;
    auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
    const auto k = std::min<std::ptrdiff_t>(it - cdf.begin(),
                                            static_cast<std::ptrdiff_t>(cdf.size()) - 1);
    out.col(i) = measure.atoms().col(k);
  }
  return out;
}

// p_k proportional to the Poisson(rate) mass at k, for k = 0 .. count-1.
inline std::vector<double> poisson_weights(std::size_t count, double rate) {
  std::vector<double> w(count);
  double term = std::exp(-rate);
  double total = 0.0;
  for (std::size_t k = 0; k < count; ++k) {
    if (k > 0) term *= rate / static_cast<double>(k);
    w[k] = term;
    total += term;
  }
  for (double& x : w) x /= total;
  return w;
}

// Direct Euler-Maruyama step on the full state:
//   X <- X + a(X, t) dt + sum_j b_j(X, t) sqrt(dt) xi_j,
// with noise(i, j) the increment of channel j for sample (column) i.
inline CMat euler_maruyama_step(const SdeModel& model, const CMat& states, double t,
                                double dt, const RMat& noise) {
  if (noise.rows() != states.cols() || noise.cols() != model.num_channels()) {
    throw DimensionError("euler_maruyama_step: noise must be samples x channels");
  }
  CMat out(states.rows(), states.cols());
  const double sq = std::sqrt(dt);
  parallel_chunks(states.cols(), [&](Index, Index b, Index e) {
    const CMat x = states.middleCols(b, e - b);
    CMat a;
    std::vector<CMat> bs;
    detail::with_sample_offset(b, [&] {
      a = model.drift(x, t);
      bs = model.diffusion(x, t);
    });
    CMat next = x + dt * a;
    for (std::size_t j = 0; j < bs.size(); ++j) {
      const RVec xi = sq * noise.block(b, static_cast<Index>(j), e - b, 1);
      next += bs[j] * xi.cast<Complex>().asDiagonal();
    }
    out.middleCols(b, e - b) = next;
  });
  return out;
}

}  // namespace sdlr
