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

// Stochastic dynamical low-rank integrator. The law of X = U Y is carried by
// an orthonormal frame U(t) (n x r) and an ensemble of reduced states
// Y^(i) in C^r:
//
//   dY   = U^H a(UY, t) dt + sum_j U^H b_j(UY, t) dW_j
//   dU/dt = Q_U ( E[a(UY) Y^H] + sum_j E[b_j b_j^H] U ) E[Y Y^H]^+
//
// One step freezes coefficients at the pre-step (U, Y): Euler-Maruyama for
// the ensemble, forward Euler plus polar retraction for the frame.

#include <cmath>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "sdlr/error.hpp"
#include "sdlr/linalg.hpp"
#include "sdlr/models.hpp"
#include "sdlr/parallel.hpp"
#include "sdlr/random.hpp"

namespace sdlr {

struct LowRankState {
  double t = 0.0;
  std::uint64_t step = 0;  // keys the noise stream
  StiefelFrame frame;
  CMat ensemble;  // r x N_s, column i is Y^(i)

  Index dim() const noexcept { return frame.ambient_dim(); }
  Index rank() const noexcept { return frame.rank(); }
  Index samples() const noexcept { return ensemble.cols(); }

  // Full states X = U Y, one per column.
  CMat states() const { return frame.matrix() * ensemble; }
};

struct MomentSummary {
  CVec mean;                      // U E[Y]
  HermitianMatrix second_moment;  // U E[Y Y^H] U^H
  HermitianMatrix reduced_second; // E[Y Y^H]
};

namespace detail {

// (1/N) sum_i v_i v_i^H and (1/N) sum_i v_i over columns, chunk ordered.
inline std::pair<CVec, CMat> column_moments(const CMat& v) {
  const Index rows = v.rows();
  const Index count = v.cols();
  const Index chunks = chunk_count(count);
  std::vector<CVec> sums(static_cast<std::size_t>(chunks));
  std::vector<CMat> grams(static_cast<std::size_t>(chunks));
  parallel_chunks(count, [&](Index c, Index b, Index e) {
    const auto block = v.middleCols(b, e - b);
    sums[c] = block.rowwise().sum();
    grams[c] = block * block.adjoint();
  });
  CVec mean = CVec::Zero(rows);
  CMat second = CMat::Zero(rows, rows);
  for (Index c = 0; c < chunks; ++c) {
    mean += sums[c];
    second += grams[c];
  }
  if (count > 0) {
    mean /= static_cast<double>(count);
    second /= static_cast<double>(count);
  }
  return {mean, hermitian_part(second)};
}

}  // namespace detail

// Frame from the top-r eigenvectors of the empirical second moment of
// `samples` (one per column); reduced states Y = U^H x.
inline LowRankState init_low_rank(const CMat& samples, Index rank) {
  const Index n = samples.rows();
  if (rank < 1 || rank > n) {
    throw DomainError("init_low_rank: rank " + std::to_string(rank) +
                      " outside [1, " + std::to_string(n) + "]");
  }
  if (samples.cols() < 1) throw DomainError("init_low_rank: need at least one sample");
  detail::require_finite(samples, "init_low_rank");
  const CMat second = detail::column_moments(samples).second;
  const EigenDecomposition eig = hermitian_eigen(second);
  LowRankState state;
  state.frame = StiefelFrame(eig.vectors.leftCols(rank));
  state.ensemble = state.frame.matrix().adjoint() * samples;
  return state;
}

struct StepOptions {
  double pinv_tolerance = kDefaultPinvTolerance;
};

// One coupled step. noise(i, j) is the standard normal increment of channel j
// for sample i; it is scaled by sqrt(dt) internally.
inline LowRankState sdlr_step(const LowRankState& state, const SdeModel& model,
                              double dt, const RMat& noise,
                              const StepOptions& options = {}) {
  const Index n = state.dim();
  const Index r = state.rank();
  const Index ns = state.samples();
  const Index channels = model.num_channels();
  if (model.dim() != n) throw DimensionError("sdlr_step: model dimension mismatch");
  if (!(dt > 0.0)) throw DomainError("sdlr_step: dt must be positive");
  if (noise.rows() != ns || noise.cols() != channels) {
    throw DimensionError("sdlr_step: noise must be " + std::to_string(ns) + " x " +
                         std::to_string(channels));
  }
  const CMat& u = state.frame.matrix();
  const CMat uh = u.adjoint();
  const bool full_rank = (r == n);
  const double sq = std::sqrt(dt);

  const Index chunks = chunk_count(ns);
  std::vector<CMat> part_s(static_cast<std::size_t>(chunks));
  std::vector<CMat> part_a(static_cast<std::size_t>(chunks));
  std::vector<CMat> part_b(static_cast<std::size_t>(chunks));
  CMat next(r, ns);

  parallel_chunks(ns, [&](Index c, Index b, Index e) {
    const Index m = e - b;
    const auto y = state.ensemble.middleCols(b, m);
    const CMat x = u * y;
    CMat a;
    std::vector<CMat> bs;
    detail::with_sample_offset(b, [&] {
      a = model.drift(x, state.t);
      bs = model.diffusion(x, state.t);
    });

    CMat y_next = y + dt * (uh * a);
    for (Index j = 0; j < channels; ++j) {
      const RVec xi = sq * noise.block(b, j, m, 1);
      y_next += (uh * bs[j]) * xi.cast<Complex>().asDiagonal();
    }
    next.middleCols(b, m) = y_next;

    if (!full_rank) {
      part_s[c] = y * y.adjoint();
      part_a[c] = a * y.adjoint();
      CMat mb = CMat::Zero(n, r);
      for (const CMat& bj : bs) mb += bj * (bj.adjoint() * u);
      part_b[c] = std::move(mb);
    }
  });

  if (!next.allFinite()) {
    for (Index i = 0; i < ns; ++i) {
      if (!next.col(i).allFinite()) {
        throw NumericError("sdlr_step: non-finite reduced state for sample " +
                               std::to_string(i),
                           static_cast<long>(i));
      }
    }
  }

  LowRankState out;
  out.t = state.t + dt;
  out.step = state.step + 1;
  out.ensemble = std::move(next);
  if (full_rank) {
    // Q_U = 0: the frame is constant.
    out.frame = state.frame;
    return out;
  }

  CMat s = CMat::Zero(r, r);
  CMat ma = CMat::Zero(n, r);
  CMat mb = CMat::Zero(n, r);
  for (Index c = 0; c < chunks; ++c) {
    s += part_s[c];
    ma += part_a[c];
    mb += part_b[c];
  }
  const double inv_ns = 1.0 / static_cast<double>(ns);
  s = hermitian_part(s * inv_ns);
  if (s.norm() == 0.0) {
    throw SingularityError("sdlr_step: E[Y Y^H] vanished", state.t);
  }
  const CMat s_pinv = pinv_psd(s, options.pinv_tolerance).matrix();
  const CMat rhs = (ma + mb) * inv_ns;
  const CMat du = complement_apply(state.frame, rhs) * s_pinv;
  out.frame = retract_to_stiefel(u + dt * du);
  return out;
}

// Step with increments drawn from `noise` keyed by (sample, state.step).
inline LowRankState sdlr_advance(const LowRankState& state, const SdeModel& model,
                                 double dt, const NoiseSource& noise,
                                 const StepOptions& options = {}) {
  return sdlr_step(state, model, dt,
                   draw_noise(noise, state.samples(), state.step, model.num_channels()),
                   options);
}

inline MomentSummary ensemble_moments(const LowRankState& state) {
  const auto [mean_y, second_y] = detail::column_moments(state.ensemble);
  const CMat& u = state.frame.matrix();
  MomentSummary out;
  out.mean = u * mean_y;
  out.reduced_second = HermitianMatrix::from_hermitian_part(second_y);
  out.second_moment = HermitianMatrix::from_hermitian_part(u * second_y * u.adjoint());
  return out;
}

// || sum_j Q_U E[b_j b_j^H] Q_U ||_HS over the ensemble: the part of the
// diffusion the frame cannot represent.
inline double residual_epsilon_sq(const LowRankState& state, const SdeModel& model) {
  const Index n = state.dim();
  if (model.dim() != n) throw DimensionError("residual_epsilon_sq: model dimension mismatch");
  if (state.rank() == n) return 0.0;
  const Index ns = state.samples();
  const Index chunks = chunk_count(ns);
  std::vector<CMat> parts(static_cast<std::size_t>(chunks));
  const CMat& u = state.frame.matrix();
  parallel_chunks(ns, [&](Index c, Index b, Index e) {
    const CMat x = u * state.ensemble.middleCols(b, e - b);
    std::vector<CMat> bs;
    detail::with_sample_offset(b, [&] { bs = model.diffusion(x, state.t); });
    CMat acc = CMat::Zero(n, n);
    for (const CMat& bj : bs) {
      const CMat qb = complement_apply(state.frame, bj);
      acc += qb * qb.adjoint();
    }
    parts[c] = std::move(acc);
  });
  CMat total = CMat::Zero(n, n);
  for (const CMat& p : parts) total += p;
  return total.norm() / static_cast<double>(ns);
}

using GrowthRate = std::function<double(double)>;

// Error growth rate gamma(t). Models carrying a Lindblad generator use
// ||L||_HS; linear models use 2 ||Lambda||_2 + sum_j ||Theta_j||_2^2.
inline GrowthRate growth_rate_bound(const SdeModel& model) {
  if (model.generator()) {
    const double g = generator_hs_norm(*model.generator());
    return [g](double) { return g; };
  }
  if (model.coefficients()) {
    const auto& c = *model.coefficients();
    double g = 2.0 * spectral_norm(c.drift);
    for (const CMat& th : c.diffusion) {
      const double s = spectral_norm(th);
      g += s * s;
    }
    return [g](double) { return g; };
  }
  throw UnsupportedError("growth_rate_bound: model '" + model.name() +
                         "' is neither linear nor backed by a Lindblad generator");
}

// (E0 + eps^2 t) exp(int_0^t gamma), the integral by the trapezoid rule on
// `grid` (ascending, starting at 0); t is the last grid point.
inline double gronwall_bound(double e0, double eps_sq, const GrowthRate& gamma,
                             std::span<const double> grid) {
  if (e0 < 0.0 || eps_sq < 0.0) {
    throw DomainError("gronwall_bound: E0 and eps^2 must be non-negative");
  }
  if (grid.empty()) return e0;
  double integral = 0.0;
  for (std::size_t i = 1; i < grid.size(); ++i) {
    integral += 0.5 * (grid[i] - grid[i - 1]) * (gamma(grid[i]) + gamma(grid[i - 1]));
  }
  const double t = grid.back();
  return (e0 + eps_sq * t) * std::exp(integral);
}

// Uniform grid with `intervals` trapezoid panels on [0, t].
inline double gronwall_bound(double e0, double eps_sq, const GrowthRate& gamma,
                             double t, int intervals = 1000) {
  if (t < 0.0) throw DomainError("gronwall_bound: t must be non-negative");
  if (intervals < 1) intervals = 1;
  std::vector<double> grid(static_cast<std::size_t>(intervals) + 1);
  for (int i = 0; i <= intervals; ++i) grid[i] = t * i / intervals;
  return gronwall_bound(e0, eps_sq, gamma, grid);
}

}  // namespace sdlr
