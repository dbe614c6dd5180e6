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

// Lindblad generators, a dense RK4 reference integrator for the master
// equation and the deterministic low-rank master equation on (U, sigma).

#include <cmath>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "sdlr/error.hpp"
#include "sdlr/linalg.hpp"
#include "sdlr/time_grid.hpp"

namespace sdlr {

// rho -> -i[H, rho] + sum_k (L_k rho L_k^H - 1/2 {L_k^H L_k, rho}).
class LindbladGenerator {
 public:
  LindbladGenerator() = default;

  LindbladGenerator(HermitianMatrix hamiltonian, std::vector<CMat> jump_ops)
      : h_(std::move(hamiltonian)), ops_(std::move(jump_ops)) {
    const Index n = h_.dim();
    k_ = CMat::Zero(n, n);
    for (std::size_t i = 0; i < ops_.size(); ++i) {
      const CMat& l = ops_[i];
      if (l.rows() != n || l.cols() != n) {
        throw DimensionError("LindbladGenerator: operator " + std::to_string(i) +
                             " is " + detail::shape(l) + ", expected " +
                             std::to_string(n) + "x" + std::to_string(n));
      }
      detail::require_finite(l, "LindbladGenerator");
      k_ += l.adjoint() * l;
    }
    j_ = -kI * h_.matrix() - 0.5 * k_;
  }

  Index dim() const noexcept { return h_.dim(); }
  const HermitianMatrix& hamiltonian() const noexcept { return h_; }
  const std::vector<CMat>& jump_operators() const noexcept { return ops_; }

  // sum_k L_k^H L_k
  const CMat& dissipation() const noexcept { return k_; }

  // J = -iH - 1/2 sum_k L_k^H L_k, so that L(rho) = J rho + rho J^H + sum L rho L^H.
  const CMat& effective() const noexcept { return j_; }

  // Action on an arbitrary square matrix (the map is complex linear).
  CMat apply(const CMat& rho) const {
    check_dim(rho, "LindbladGenerator::apply");
    CMat out = j_ * rho;
    out += rho * j_.adjoint();
    for (const CMat& l : ops_) out += l * rho * l.adjoint();
    return out;
  }

  // Heisenberg-picture adjoint with respect to the HS inner product.
  CMat apply_adjoint(const CMat& obs) const {
    check_dim(obs, "LindbladGenerator::apply_adjoint");
    CMat out = j_.adjoint() * obs;
    out += obs * j_;
    for (const CMat& l : ops_) out += l.adjoint() * obs * l;
    return out;
  }

 private:
  void check_dim(const CMat& m, const char* op) const {
    if (m.rows() != dim() || m.cols() != dim()) {
      throw DimensionError(std::string(op) + ": operand is " + detail::shape(m) +
                           ", generator dimension " + std::to_string(dim()));
    }
  }

  HermitianMatrix h_;
  std::vector<CMat> ops_;
  CMat k_;
  CMat j_;
};

inline HermitianMatrix apply_generator(const LindbladGenerator& gen,
                                       const HermitianMatrix& rho) {
  return HermitianMatrix::from_hermitian_part(gen.apply(rho.matrix()));
}

// Annihilation operator truncated to n levels: d|k> = sqrt(k)|k-1>.
inline CMat annihilation_operator(Index n) {
  CMat d = CMat::Zero(n, n);
  for (Index k = 1; k < n; ++k) d(k - 1, k) = std::sqrt(static_cast<double>(k));
  return d;
}

// H = omega d^H d, L_1 = sqrt(gamma1) d, L_2 = sqrt(gamma2) d^H. Channels with
// zero rate are omitted.
inline LindbladGenerator make_damped_oscillator(Index n, double omega,
                                                double gamma1, double gamma2) {
  if (n < 2) throw DomainError("make_damped_oscillator: need n >= 2");
  if (gamma1 < 0.0 || gamma2 < 0.0) {
    throw DomainError("make_damped_oscillator: rates must be non-negative");
  }
  const CMat d = annihilation_operator(n);
  const CMat number = d.adjoint() * d;
  std::vector<CMat> ops;
  if (gamma1 > 0.0) ops.push_back(std::sqrt(gamma1) * d);
  if (gamma2 > 0.0) ops.push_back(std::sqrt(gamma2) * CMat(d.adjoint()));
  return LindbladGenerator(HermitianMatrix(omega * number), std::move(ops));
}

// sup over Hermitian F with ||F||_HS = 1 of ||L(F)||_HS, by power iteration
// on L^* L restricted to Hermitian matrices.
inline double generator_hs_norm(const LindbladGenerator& gen,
                                int max_iterations = 20000,
                                double rel_tol = 1e-13) {
  const Index n = gen.dim();
  if (n == 0) return 0.0;
  CounterRng rng(0x5eed0f1aULL);
  CMat f = random_hermitian(n, rng).matrix();
  f /= f.norm();
  double estimate = 0.0;
  for (int it = 0; it < max_iterations; ++it) {
    const CMat lf = gen.apply(f);
    const double value = lf.norm();
    CMat next = hermitian_part(gen.apply_adjoint(lf));
    const double nn = next.norm();
    if (nn == 0.0) return value;
    f = next / nn;
    if (it > 0 && std::abs(value - estimate) <= rel_tol * value) {
      return value;
    }
    estimate = value;
  }
  return gen.apply(f).norm();
}

struct DensitySnapshot {
  double t;
  HermitianMatrix rho;
};

namespace detail {

inline void require_density(const HermitianMatrix& rho, const char* op) {
  const double tr = rho.trace();
  if (std::abs(tr - 1.0) > 1e-10) {
    throw DomainError(std::string(op) + ": initial trace must be 1, got " +
                      std::to_string(tr));
  }
  if (rho.dim() > 0) {
    const auto spec = top_spectrum(rho, rho.dim());
    const double lmin = spec.back();
    if (lmin < -1e-10 * std::max(1.0, spec.front())) {
      throw DomainError(std::string(op) +
                        ": initial state is not positive semidefinite");
    }
  }
}

}  // namespace detail

// Classical RK4 on the master equation with Hermitian symmetrization after
// each step. Returns snapshots at t = 0 and every `stride` steps, always
// including the final time.
inline std::vector<DensitySnapshot> integrate_lindblad(
    const LindbladGenerator& gen, const HermitianMatrix& rho0, double horizon,
    double dt, std::int64_t stride = 1) {
  if (rho0.dim() != gen.dim()) {
    throw DimensionError("integrate_lindblad: state and generator dimensions differ");
  }
  const std::int64_t steps = step_count(horizon, dt);
  detail::require_density(rho0, "integrate_lindblad");
  if (stride < 1) stride = 1;

  std::vector<DensitySnapshot> out;
  out.push_back({0.0, rho0});
  CMat rho = rho0.matrix();
  for (std::int64_t s = 1; s <= steps; ++s) {
    const CMat k1 = gen.apply(rho);
    const CMat k2 = gen.apply(rho + 0.5 * dt * k1);
    const CMat k3 = gen.apply(rho + 0.5 * dt * k2);
    const CMat k4 = gen.apply(rho + dt * k3);
    rho += (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    rho = hermitian_part(rho);
    if (s % stride == 0 || s == steps) {
      out.push_back({static_cast<double>(s) * dt,
                     HermitianMatrix::from_hermitian_part(rho)});
    }
  }
  return out;
}

// rho_LR = U sigma U^H with sigma strictly positive.
struct LowRankQmeState {
  double t = 0.0;
  StiefelFrame frame;
  HermitianMatrix sigma;

  HermitianMatrix density() const {
    return HermitianMatrix::from_hermitian_part(frame.matrix() * sigma.matrix() *
                                                frame.matrix().adjoint());
  }
};

enum class QmeScheme {
  euler,  // forward Euler in (U, sigma), polar retraction of U
  rk4,    // classical RK4 in the ambient space, polar retraction of U
};

struct QmeOptions {
  QmeScheme scheme = QmeScheme::euler;
  std::int64_t stride = 1;
  double pinv_tolerance = kDefaultPinvTolerance;
};

namespace detail {

struct QmeRates {
  CMat d_frame;
  CMat d_sigma;
};

inline void check_sigma(const CMat& sigma, double tol, double t) {
  const Index r = sigma.rows();
  if (r == 0) return;
  const auto spec = top_spectrum(sigma, r);
  if (!(spec.front() > 0.0) || spec.back() <= tol * spec.front()) {
    throw SingularityError(
        "integrate_lowrank_qme: reduced density lost positive definiteness "
        "(lambda_min = " + std::to_string(spec.back()) +
            ", lambda_max = " + std::to_string(spec.front()) + ")",
        t);
  }
}

// d sigma = U^H L(U sigma U^H) U,  dU = Q_U L(U sigma U^H) U sigma^{-1}.
inline QmeRates qme_rates(const LindbladGenerator& gen, const CMat& u,
                          const CMat& sigma, double tol) {
  const CMat rho = u * sigma * u.adjoint();
  const CMat lr = gen.apply(rho);
  const CMat lru = lr * u;
  QmeRates out;
  out.d_sigma = u.adjoint() * lru;
  CMat q_lru = u.rows() == u.cols() ? CMat::Zero(u.rows(), u.cols())
                                    : CMat(lru - u * (u.adjoint() * lru));
  out.d_frame = q_lru * pinv_psd(sigma, tol).matrix();
  return out;
}

}  // namespace detail

inline std::vector<LowRankQmeState> integrate_lowrank_qme(
    const LindbladGenerator& gen, const LowRankQmeState& state0, double horizon,
    double dt, const QmeOptions& options = {}) {
  if (state0.frame.ambient_dim() != gen.dim()) {
    throw DimensionError("integrate_lowrank_qme: frame and generator dimensions differ");
  }
  if (state0.sigma.dim() != state0.frame.rank()) {
    throw DimensionError("integrate_lowrank_qme: sigma must be r x r");
  }
  const std::int64_t steps = step_count(horizon, dt);
  const std::int64_t stride = options.stride < 1 ? 1 : options.stride;
  const double tol = options.pinv_tolerance;
  detail::check_sigma(state0.sigma.matrix(), tol, state0.t);

  std::vector<LowRankQmeState> out{state0};
  CMat u = state0.frame.matrix();
  CMat sigma = state0.sigma.matrix();
  const double t0 = state0.t;
  for (std::int64_t s = 1; s <= steps; ++s) {
    CMat u_next;
    CMat sigma_next;
    if (options.scheme == QmeScheme::euler) {
      const auto k = detail::qme_rates(gen, u, sigma, tol);
      u_next = u + dt * k.d_frame;
      sigma_next = sigma + dt * k.d_sigma;
    } else {
      const auto k1 = detail::qme_rates(gen, u, sigma, tol);
      const auto k2 = detail::qme_rates(gen, u + 0.5 * dt * k1.d_frame,
                                        sigma + 0.5 * dt * k1.d_sigma, tol);
      const auto k3 = detail::qme_rates(gen, u + 0.5 * dt * k2.d_frame,
                                        sigma + 0.5 * dt * k2.d_sigma, tol);
      const auto k4 = detail::qme_rates(gen, u + dt * k3.d_frame,
                                        sigma + dt * k3.d_sigma, tol);
      u_next = u + (dt / 6.0) * (k1.d_frame + 2.0 * k2.d_frame +
                                 2.0 * k3.d_frame + k4.d_frame);
      sigma_next = sigma + (dt / 6.0) * (k1.d_sigma + 2.0 * k2.d_sigma +
                                         2.0 * k3.d_sigma + k4.d_sigma);
    }
    // Square frames never move.
    if (u.cols() != u.rows()) u = retract_to_stiefel(u_next).matrix();
    sigma = hermitian_part(sigma_next);
    const double t_next = t0 + static_cast<double>(s) * dt;
    detail::check_sigma(sigma, tol, t_next);
    if (s % stride == 0 || s == steps) {
      out.push_back({t_next, StiefelFrame(u),
                     HermitianMatrix::from_hermitian_part(sigma)});
    }
  }
  return out;
}

}  // namespace sdlr
